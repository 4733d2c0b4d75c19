#include "voice_ehr/service.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "voice_ehr/asr_http.hpp"
#include "voice_ehr/codec.hpp"
#include "voice_ehr/hash.hpp"
#include "voice_ehr/http_client.hpp"
#include "voice_ehr/llm_http.hpp"
#include "voice_ehr/pipeline.hpp"
#include "voice_ehr/stats.hpp"

namespace voice_ehr {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

ServiceConfig ServiceConfig::load(const std::optional<fs::path>& file) {
  ServiceConfig c;
  if (file) {
    std::ifstream in(*file);
    if (!in) fail(ErrorCode::NotFound, file->string());
    const json j = json::parse(in);
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    c.data_dir = j.value("data_dir", c.data_dir.string());
    c.asr_endpoint = j.value("asr_endpoint", c.asr_endpoint);
    c.llm_endpoint = j.value("llm_endpoint", c.llm_endpoint);
    c.llm_model = j.value("llm_model", c.llm_model);
    c.token_secret = j.value("token_secret", c.token_secret);
    c.max_upload_bytes = j.value("max_upload_bytes", c.max_upload_bytes);
    c.ffmpeg_path = j.value("ffmpeg_path", c.ffmpeg_path);
    c.transcription_concurrency = j.value("transcription_concurrency", c.transcription_concurrency);
    c.eval_concurrency = j.value("eval_concurrency", c.eval_concurrency);
  }
  if (auto v = env_or_empty("VOICE_EHR_LISTEN"); !v.empty()) {
    const auto colon = v.rfind(':');
    if (colon == std::string::npos) fail(ErrorCode::BadRequest, "VOICE_EHR_LISTEN must be host:port");
    c.host = v.substr(0, colon);
    c.port = std::stoi(v.substr(colon + 1));
  }
  if (auto v = env_or_empty("VOICE_EHR_DATA_DIR"); !v.empty()) c.data_dir = v;
  if (auto v = env_or_empty("VOICE_EHR_ASR_ENDPOINT"); !v.empty()) c.asr_endpoint = v;
  if (auto v = env_or_empty("VOICE_EHR_LLM_ENDPOINT"); !v.empty()) c.llm_endpoint = v;
  if (auto v = env_or_empty("VOICE_EHR_LLM_MODEL"); !v.empty()) c.llm_model = v;
  if (auto v = env_or_empty("VOICE_EHR_TOKEN_SECRET"); !v.empty()) c.token_secret = v;
  if (auto v = env_or_empty("VOICE_EHR_MAX_UPLOAD_BYTES"); !v.empty()) c.max_upload_bytes = std::stoull(v);
  if (auto v = env_or_empty("VOICE_EHR_FFMPEG"); !v.empty()) c.ffmpeg_path = v;
  return c;
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingField:
    case ErrorCode::InvalidField:
    case ErrorCode::BadRequest:
    case ErrorCode::UnknownPrompt:
    case ErrorCode::RangeOutOfBounds:
    case ErrorCode::ChecksumMismatch:
    case ErrorCode::EmptyReference:
    case ErrorCode::EmptyInput:
    case ErrorCode::TooShort:
    case ErrorCode::EmptySignal:
    case ErrorCode::MissingRecording:
    case ErrorCode::MissingTranscript:
    case ErrorCode::MissingManualField:
      return 400;
    case ErrorCode::Unauthorized:
      return 401;
    case ErrorCode::Forbidden:
      return 403;
    case ErrorCode::NotFound:
    case ErrorCode::UnknownToken:
      return 404;
    case ErrorCode::ConsentAlreadyRecorded:
    case ErrorCode::ConsentRequired:
    case ErrorCode::PageIncomplete:
    case ErrorCode::WrongPage:
    case ErrorCode::DuplicatePart:
    case ErrorCode::SessionFrozen:
    case ErrorCode::SessionAbandoned:
    case ErrorCode::RangeConflict:
    case ErrorCode::IncompleteUpload:
    case ErrorCode::SessionNotFrozen:
      return 409;
    case ErrorCode::TokenExpired:
      return 401;
    case ErrorCode::PayloadTooLarge:
      return 413;
    case ErrorCode::UnsupportedFormat:
      return 415;
    case ErrorCode::CohortViolation:
    case ErrorCode::DecodeFailure:
    case ErrorCode::UnparseableRating:
      return 422;
    case ErrorCode::AsrUnavailable:
    case ErrorCode::LlmUnavailable:
      return 503;
    case ErrorCode::IoFailure:
    case ErrorCode::DanglingBlobRef:
    case ErrorCode::CorruptLog:
      return 500;
  }
  return 500;
}

// ---------------------------------------------------------------------------
// Routing helpers
// ---------------------------------------------------------------------------

namespace {

ApiResponse reply(int status, const json& body) { return {status, body.dump(), "application/json"}; }

ApiResponse error_reply(const Error& e) {
  return reply(http_status(e.code()), {{"error", std::string(to_string(e.code()))}, {"detail", e.detail()}});
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : path) {
    if (c == '/') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

json parse_body(const ApiRequest& req) {
  if (req.body.empty()) return json::object();
  json j;
  try {
    j = json::parse(req.body);
  } catch (const json::exception&) {
    fail(ErrorCode::BadRequest, "body is not valid JSON");
  }
  if (j.is_null()) return json::object();
  if (!j.is_object()) fail(ErrorCode::BadRequest, "body must be a JSON object");
  return j;
}

int parse_int(const std::string& s, const char* what) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) fail(ErrorCode::BadRequest, std::string("bad ") + what);
  return v;
}

json session_summary(const SessionState& s) {
  json audio = json::object();
  for (const auto& [pp, id] : s.audio) audio[to_key(pp)] = id;
  return {{"session_id", s.session_id},
          {"cohort", s.cohort},
          {"status", s.status},
          {"current_page", s.current_page},
          {"completed_pages", s.completed_pages},
          {"consent_given", s.consent_given},
          {"frozen", s.frozen},
          {"audio", audio}};
}

json page_json(const SessionState& s) {
  if (s.current_page == kPastEnd || s.status == SessionStatus::Complete)
    return {{"complete", true}, {"status", s.status}};
  const PageSpec& spec = page_spec(s.current_page);
  json j = spec;
  j["complete"] = false;
  j["status"] = s.status;
  if (spec.prompt_id) {
    const auto& p = prompt_spec(*spec.prompt_id);
    json parts = json::array();
    for (const auto& part : p.parts)
      parts.push_back({{"part", part.part},
                       {"display_text", part.display_text},
                       {"max_duration_s", part.max_duration_s},
                       {"attached", s.audio.contains(PromptPart{p.prompt_id, part.part})}});
    j["prompt"] = {{"prompt_id", p.prompt_id}, {"title", p.title}, {"display_text", p.display_text}, {"parts", parts}};
  }
  return j;
}

// "bytes 0-1023/4096" -> (0, 1024)
std::pair<std::uint64_t, std::uint64_t> parse_content_range(const std::string& v) {
  std::uint64_t a = 0, b = 0;
  std::string unit;
  const auto sp = v.find(' ');
  const auto dash = v.find('-');
  const auto slash = v.find('/');
  if (sp == std::string::npos || dash == std::string::npos || dash < sp)
    fail(ErrorCode::BadRequest, "Content-Range must be 'bytes start-end/total'");
  unit = v.substr(0, sp);
  const std::string first = v.substr(sp + 1, dash - sp - 1);
  const std::string last = v.substr(dash + 1, slash == std::string::npos ? std::string::npos : slash - dash - 1);
  auto r1 = std::from_chars(first.data(), first.data() + first.size(), a);
  auto r2 = std::from_chars(last.data(), last.data() + last.size(), b);
  if (unit != "bytes" || r1.ec != std::errc{} || r2.ec != std::errc{} || b < a)
    fail(ErrorCode::BadRequest, "Content-Range must be 'bytes start-end/total'");
  return {a, b + 1};
}

}  // namespace

// ---------------------------------------------------------------------------
// Service
// ---------------------------------------------------------------------------

struct Service::Impl {
  httplib::Server server;
};

Service::Service(ServiceConfig config, std::unique_ptr<AsrClient> asr, std::unique_ptr<LlmClient> llm, Clock clock)
    : config_(std::move(config)),
      clock_(std::move(clock)),
      blobs_(config_.data_dir / "blobs"),
      sessions_(config_.data_dir / "sessions", clock_),
      uploads_(config_.data_dir / "uploads", blobs_, clock_,
               UploadLimits{config_.max_upload_bytes, std::chrono::hours(24)}, AudioDecoder(config_.ffmpeg_path)),
      asr_(std::move(asr)),
      llm_(std::move(llm)),
      impl_(std::make_unique<Impl>()) {
  if (config_.token_secret.empty()) {
    config_.token_secret = random_hex(64);
    spdlog::warn("no token secret configured; generated an ephemeral one");
  }
  if (!asr_ && !config_.asr_endpoint.empty())
    asr_ = std::make_unique<AsrHttpClient>(AsrHttpConfig{config_.asr_endpoint});
  if (!llm_ && !config_.llm_endpoint.empty()) {
    LlmHttpConfig lc;
    lc.endpoint = config_.llm_endpoint;
    lc.model = config_.llm_model;
    lc.audit_log = config_.data_dir / "llm_audit.jsonl";
    llm_ = std::make_unique<LlmHttpClient>(lc);
  }
}

Service::~Service() { stop(); }

std::string Service::admin_token() const {
  return issue_token(config_.token_secret, TokenScope::Admin, "*", clock_() + kApiTokenTtl).token;
}

ApiResponse Service::handle(const ApiRequest& req) {
  try {
    const auto seg = split_path(req.path);
    const json body = req.method == "PUT" ? json::object() : parse_body(req);

    auto auth = [&]() -> ApiSessionToken {
      auto it = req.headers.find("authorization");
      if (it == req.headers.end() || it->second.rfind("Bearer ", 0) != 0)
        fail(ErrorCode::Unauthorized, "missing bearer token");
      return verify_token(config_.token_secret, it->second.substr(7), clock_());
    };
    auto require_session = [&](const std::string& id) {
      const auto tok = auth();
      if (tok.scope != TokenScope::Admin && tok.session_id != id) fail(ErrorCode::Forbidden, "token is for another session");
      if (!sessions_.exists(id)) fail(ErrorCode::NotFound, id);
      return tok;
    };
    auto require_admin = [&] {
      if (auth().scope != TokenScope::Admin) fail(ErrorCode::Forbidden, "admin scope required");
    };

    if (seg.empty() || seg[0] != "v1") fail(ErrorCode::NotFound, req.path);

    if (seg.size() == 2 && seg[1] == "health" && req.method == "GET") return reply(200, {{"ok", true}});

    // ---- sessions ----
    if (seg.size() >= 2 && seg[1] == "sessions") {
      if (seg.size() == 2 && req.method == "POST") {
        const auto answer = body.value("cohort_screening_answer", std::string());
        const Cohort cohort = cohort_from_screening(answer);
        const SessionState s = sessions_.create(cohort, answer);
        const auto tok = issue_token(config_.token_secret, TokenScope::Participant, s.session_id, clock_() + kApiTokenTtl);
        return reply(201, {{"session", session_summary(s)},
                           {"token", tok.token},
                           {"expires_at", timestamp_json(tok.expires_at)},
                           {"page", page_json(s)}});
      }
      if (seg.size() < 3) fail(ErrorCode::NotFound, req.path);
      const std::string& id = seg[2];
      const auto tok = require_session(id);

      if (seg.size() == 3 && req.method == "GET") return reply(200, session_summary(sessions_.get(id)));

      if (seg.size() == 4 && seg[3] == "consent" && req.method == "POST") {
        if (!body.contains("granted") || !body["granted"].is_boolean()) fail(ErrorCode::MissingField, "granted");
        const auto s = sessions_.append(id, Event{EventType::Consent, kConsentPage, {{"granted", body["granted"]}}, {}});
        return reply(200, {{"session", session_summary(s)}, {"page", page_json(s)}});
      }
      if (seg.size() == 4 && seg[3] == "page" && req.method == "GET") {
        SessionState s = sessions_.get(id);
        return reply(200, page_json(s));
      }
      if (seg.size() == 4 && seg[3] == "provider-token" && req.method == "POST") {
        if (tok.scope == TokenScope::Provider) fail(ErrorCode::Forbidden, "already a provider token");
        const auto s = sessions_.get(id);
        if (s.cohort != Cohort::Patient) fail(ErrorCode::CohortViolation, "provider section is patient-only");
        const auto p = issue_token(config_.token_secret, TokenScope::Provider, id, clock_() + kApiTokenTtl);
        return reply(200, {{"token", p.token}, {"expires_at", timestamp_json(p.expires_at)}});
      }
      if (seg.size() >= 5 && seg[3] == "pages") {
        const int page = parse_int(seg[4], "page");
        if (page < 0 || page > kLastPage) fail(ErrorCode::NotFound, "page " + seg[4]);
        if (seg.size() == 5 && req.method == "GET") {
          const auto s = sessions_.get(id);
          if (!page_required_for(s.cohort, page))
            fail(ErrorCode::CohortViolation, "page " + std::to_string(page) + " is not part of this cohort's flow");
          if (!s.is_completed(page)) fail(ErrorCode::WrongPage, "page " + std::to_string(page) + " not completed");
          json j{{"page", page_spec(page)}, {"read_only", true}};
          if (auto it = s.answers_by_page.find(page); it != s.answers_by_page.end()) j["answers"] = it->second;
          json audio = json::object();
          for (const auto& [pp, sid] : s.audio)
            if (prompt_spec(pp.prompt).app_page == page) audio[to_key(pp)] = sid;
          j["audio"] = audio;
          return reply(200, j);
        }
        if (seg.size() == 6 && seg[5] == "answers" && req.method == "POST") {
          const auto s = sessions_.append(id, Event{EventType::SubmitAnswers, page, body, {}});
          return reply(200, {{"session", session_summary(s)}, {"page", page_json(s)}});
        }
        if (seg.size() == 6 && seg[5] == "advance" && req.method == "POST") {
          const auto s = sessions_.append(id, Event{EventType::Advance, page, json::object(), {}});
          return reply(200, {{"session", session_summary(s)}, {"page", page_json(s)}});
        }
      }
      if (seg.size() == 6 && seg[3] == "audio") {
        const auto prompt = enum_from_name<PromptId>(seg[4]);
        if (!prompt) fail(ErrorCode::UnknownPrompt, seg[4]);
        const auto colon = seg[5].find(':');
        if (colon == std::string::npos) fail(ErrorCode::NotFound, req.path);
        const int part = parse_int(seg[5].substr(0, colon), "part");
        const std::string action = seg[5].substr(colon + 1);
        const PromptPart pp{*prompt, part};

        if (action == "begin" && req.method == "POST") {
          const auto s = sessions_.get(id);
          if (s.frozen) fail(ErrorCode::SessionFrozen, id);
          if (!body.contains("declared_size") || !body["declared_size"].is_number_unsigned())
            fail(ErrorCode::MissingField, "declared_size");
          // Refuse bytes the session could never attach. A finalized part falls through so
          // that a retried upload stays idempotent.
          try {
            attach_audio(s, *prompt, part, "smp_pending");
          } catch (const Error& e) {
            if (e.code() != ErrorCode::DuplicatePart) throw;
          }
          const auto t = uploads_.begin(id, s.cohort, *prompt, part, body["declared_size"].get<std::uint64_t>(),
                                        body.value("content_type", std::string()));
          return reply(200, {{"upload_token", t.token_id},
                             {"declared_size", t.declared_size},
                             {"received_bytes", t.received_bytes()},
                             {"expires_at", timestamp_json(t.expires_at)},
                             {"chunk_size", 64 * 1024}});
        }

        auto upload_token = [&]() {
          std::string t = body.value("upload_token", std::string());
          if (auto h = req.headers.find("x-upload-token"); t.empty() && h != req.headers.end()) t = h->second;
          if (auto q = req.query.find("token"); t.empty() && q != req.query.end()) t = q->second;
          if (t.empty()) fail(ErrorCode::MissingField, "upload_token");
          auto info = uploads_.token(t);
          if (!info) fail(ErrorCode::UnknownToken, t);
          if (info->session_id != id || info->prompt != pp) fail(ErrorCode::Forbidden, "upload token belongs elsewhere");
          return t;
        };

        if (action == "chunk" && req.method == "PUT") {
          const std::string t = upload_token();
          std::uint64_t offset = 0;
          if (auto h = req.headers.find("content-range"); h != req.headers.end()) {
            const auto [start, end] = parse_content_range(h->second);
            if (end - start != req.body.size()) fail(ErrorCode::BadRequest, "Content-Range length differs from body");
            offset = start;
          } else if (auto q = req.query.find("offset"); q != req.query.end()) {
            offset = std::stoull(q->second);
          }
          const auto ack = uploads_.append(
              t, offset, std::span(reinterpret_cast<const std::uint8_t*>(req.body.data()), req.body.size()));
          return reply(200, {{"upload_token", ack.token_id},
                             {"received_bytes", ack.received_bytes},
                             {"declared_size", ack.declared_size},
                             {"complete", ack.complete}});
        }

        if (action == "finalize" && req.method == "POST") {
          const std::string t = upload_token();
          if (!body.contains("checksum")) fail(ErrorCode::MissingField, "checksum");
          const AudioSample sample = uploads_.finalize(t, body["checksum"].get<std::string>());
          SessionState s = sessions_.get(id);
          if (auto it = s.audio.find(pp); it != s.audio.end()) {
            if (it->second != sample.sample_id) fail(ErrorCode::DuplicatePart, to_key(pp));
          } else {
            s = sessions_.mutate(id, [&](const SessionState&) {
              return Event{EventType::AttachAudio,
                           prompt_spec(*prompt).app_page,
                           {{"prompt", enum_name(*prompt)}, {"part", part}, {"sample_id", sample.sample_id},
                            {"sample", sample}},
                           {}};
            });
          }
          return reply(200, {{"sample", sample}, {"session", session_summary(s)}, {"page", page_json(s)}});
        }
      }
      fail(ErrorCode::NotFound, req.method + " " + req.path);
    }

    // ---- admin ----
    if (seg.size() >= 3 && seg[1] == "admin") {
      require_admin();
      if (seg.size() == 4 && seg[2] == "pipeline" && seg[3] == "run" && req.method == "POST") {
        PipelineOptions o;
        o.transcribe = body.value("transcribe", true);
        o.metrics = body.value("metrics", true);
        o.curate = body.value("curate", true);
        o.transcription.concurrency = config_.transcription_concurrency;
        const auto rep = run_pipeline(sessions_, blobs_, asr_.get(), o);
        json j = rep;
        j["asr_configured"] = asr_ != nullptr;
        return reply(200, j);
      }
      if (seg.size() == 3 && seg[2] == "stats" && req.method == "GET") {
        const auto data = load_dataset(sessions_);
        return reply(200, {{"demographics", demographic_report(data)},
                           {"condition_prevalence", condition_prevalence(data)},
                           {"totals", manifest_totals(data)}});
      }
      if (seg.size() == 3 && seg[2] == "export" && req.method == "GET") {
        const auto dest = config_.data_dir / "export";
        const auto m = export_manifest(load_dataset(sessions_), blobs_, dest, clock_());
        return reply(200, {{"destination", dest.string()},
                           {"schema_version", m.schema_version},
                           {"created_at", timestamp_json(m.created_at)},
                           {"sessions", m.sessions.size()},
                           {"totals", m.totals}});
      }
      if (seg.size() == 4 && seg[2] == "eval" && seg[3] == "run" && req.method == "POST") {
        if (!llm_) fail(ErrorCode::LlmUnavailable, "no LLM endpoint configured");
        const auto report = run_eval(load_dataset(sessions_), *llm_, config_.eval_concurrency, clock_);
        return reply(200, report);
      }
    }
    fail(ErrorCode::NotFound, req.method + " " + req.path);
  } catch (const Error& e) {
    return error_reply(e);
  } catch (const json::exception& e) {
    return reply(400, {{"error", "BadRequest"}, {"detail", e.what()}});
  } catch (const std::exception& e) {
    spdlog::error("{} {}: {}", req.method, req.path, e.what());
    return reply(500, {{"error", "Internal"}, {"detail", e.what()}});
  }
}

void Service::serve() {
  auto& srv = impl_->server;
  srv.set_payload_max_length(config_.max_upload_bytes + 1024 * 1024);
  auto bridge = [this](const httplib::Request& hreq, httplib::Response& hres) {
    ApiRequest req;
    req.method = hreq.method;
    req.path = hreq.path;
    for (const auto& [k, v] : hreq.params) req.query[k] = v;
    for (const auto& [k, v] : hreq.headers) {
      std::string key = k;
      std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
      req.headers[key] = v;
    }
    req.body = hreq.body;
    const auto res = handle(req);
    hres.status = res.status;
    hres.set_content(res.body, res.content_type);
  };
  srv.Get(".*", bridge);
  srv.Post(".*", bridge);
  srv.Put(".*", bridge);
  int port = config_.port;
  if (port == 0) {
    port = srv.bind_to_any_port(config_.host);
  } else if (!srv.bind_to_port(config_.host, port)) {
    fail(ErrorCode::IoFailure, "cannot bind " + config_.host + ":" + std::to_string(port));
  }
  if (port < 0) fail(ErrorCode::IoFailure, "cannot bind " + config_.host);
  bound_port_ = port;
  spdlog::info("listening on {}:{}", config_.host, port);
  srv.listen_after_bind();
}

void Service::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace voice_ehr
