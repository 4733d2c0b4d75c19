#include <csignal>
#include <cstdio>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "voice_ehr/acoustics.hpp"
#include "voice_ehr/blob_store.hpp"
#include "voice_ehr/codec.hpp"
#include "voice_ehr/eval.hpp"
#include "voice_ehr/pipeline.hpp"
#include "voice_ehr/quality.hpp"
#include "voice_ehr/service.hpp"
#include "voice_ehr/stats.hpp"
#include "voice_ehr/tokens.hpp"
#include "voice_ehr/transcription.hpp"

using namespace voice_ehr;
namespace fs = std::filesystem;

namespace {

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

// Routes an admin call through the same handler the HTTP server uses.
int admin_call(Service& svc, const std::string& method, const std::string& path, const json& body = json::object()) {
  ApiRequest req{method, path, {}, {{"authorization", "Bearer " + svc.admin_token()}}, body.dump()};
  const auto res = svc.handle(req);
  print(res.json());
  return res.status < 300 ? 0 : 1;
}

void serve(ServiceConfig cfg) {
  // Block the stop signals here so the listener threads inherit the mask, then wait
  // for them on a dedicated thread.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  Service svc(std::move(cfg));
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    spdlog::info("signal {}, shutting down", sig);
    svc.stop();
  });
  svc.serve();
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
}

int metrics(const std::string& path, const std::string& key, const std::string& ffmpeg) {
  const auto pp = prompt_part_from_key(key);
  if (!pp) fail(ErrorCode::UnknownPrompt, key);
  const auto bytes = read_file_bytes(path);
  auto format = sniff_container(bytes);
  if (format == ContainerFormat::Unknown) fail(ErrorCode::UnsupportedFormat, path);
  PcmAudio audio = AudioDecoder(ffmpeg).decode(bytes, format);
  if (audio.sample_rate != kCanonicalSampleRate) audio = resample(audio, kCanonicalSampleRate);
  const auto canonical = from_pcm16(to_canonical_pcm16(audio));
  json out{{"prompt", to_key(*pp)}, {"quality", quality_gate(canonical, *pp)}};
  try {
    out["metrics"] = measure(canonical, *pp);
  } catch (const Error& e) {
    out["metrics_error"] = {{"error", std::string(to_string(e.code()))}, {"detail", e.detail()}};
  }
  print(out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Voice EHR collection and analysis"};
  app.require_subcommand(1);
  std::string config_file;
  bool verbose = false;
  app.add_option("-c,--config", config_file, "JSON config file")->check(CLI::ExistingFile);
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  std::string listen, data_dir;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API");
  serve_cmd->add_option("--listen", listen, "host:port");
  app.add_option("--data-dir", data_dir, "Data directory (overrides config)");

  app.add_subcommand("admin-token", "Print an admin bearer token for the configured secret");

  auto* pipeline_cmd = app.add_subcommand("pipeline", "Freeze, transcribe, measure and curate finished sessions");
  bool no_transcribe = false;
  pipeline_cmd->add_flag("--no-transcribe", no_transcribe, "Skip ASR");

  app.add_subcommand("stats", "Demographic breakdowns and totals over included sessions");

  auto* export_cmd = app.add_subcommand("export", "Write manifest.jsonl and summaries");
  std::string out_dir;
  export_cmd->add_option("-o,--out", out_dir, "Destination (default <data-dir>/export)");

  auto* eval_cmd = app.add_subcommand("eval", "Summary evaluation");
  eval_cmd->require_subcommand(1);
  eval_cmd->add_subcommand("run", "Rate every eligible patient session with the configured LLM");
  auto* oracle_cmd = eval_cmd->add_subcommand("oracle", "Find rating histograms consistent with reported statistics");
  HistogramTargets targets;
  std::string std_flavor = "either", rounding = "either";
  bool all = false;
  oracle_cmd->add_option("-n", targets.n, "Number of ratings")->required();
  oracle_cmd->add_option("--mean", targets.mean, "Mean, 2 decimals");
  oracle_cmd->add_option("--median", targets.median, "Median");
  oracle_cmd->add_option("--std", targets.std_dev, "Standard deviation, 2 decimals");
  oracle_cmd->add_option("--gt2", targets.pct_gt2, "Percent of ratings above 2");
  oracle_cmd->add_option("--eq5", targets.pct_eq5, "Percent of ratings equal to 5");
  oracle_cmd->add_option("--std-flavor", std_flavor, "population | sample | either");
  oracle_cmd->add_option("--rounding", rounding, "round | truncate | either");
  oracle_cmd->add_flag("--all", all, "List every consistent histogram");

  auto* metrics_cmd = app.add_subcommand("metrics", "Quality gate and acoustic metrics for one recording");
  std::string audio_path, prompt_key;
  metrics_cmd->add_option("file", audio_path, "Audio file")->required()->check(CLI::ExistingFile);
  metrics_cmd->add_option("-p,--prompt", prompt_key, "Prompt part, e.g. P5.1")->required();

  auto* wer_cmd = app.add_subcommand("wer", "Word error rate between two texts");
  std::string ref, hyp;
  wer_cmd->add_option("reference", ref)->required();
  wer_cmd->add_option("hypothesis", hyp)->required();

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    auto cfg = ServiceConfig::load(config_file.empty() ? std::nullopt : std::optional<fs::path>(config_file));
    if (!data_dir.empty()) cfg.data_dir = data_dir;

    if (*serve_cmd) {
      if (!listen.empty()) {
        const auto colon = listen.rfind(':');
        if (colon == std::string::npos) fail(ErrorCode::BadRequest, "--listen must be host:port");
        cfg.host = listen.substr(0, colon);
        cfg.port = std::stoi(listen.substr(colon + 1));
      }
      serve(std::move(cfg));
      return 0;
    }
    if (app.got_subcommand("admin-token")) {
      if (cfg.token_secret.empty()) fail(ErrorCode::BadRequest, "no token secret configured");
      std::cout << issue_token(cfg.token_secret, TokenScope::Admin, "*", system_clock()() + kApiTokenTtl).token << "\n";
      return 0;
    }
    if (*pipeline_cmd) {
      Service svc(cfg);
      return admin_call(svc, "POST", "/v1/admin/pipeline/run", {{"transcribe", !no_transcribe}});
    }
    if (app.got_subcommand("stats")) {
      Service svc(cfg);
      return admin_call(svc, "GET", "/v1/admin/stats");
    }
    if (*export_cmd) {
      Service svc(cfg);
      const fs::path dest = out_dir.empty() ? cfg.data_dir / "export" : fs::path(out_dir);
      const auto m = export_manifest(load_dataset(svc.sessions()), svc.blobs(), dest, system_clock()());
      print({{"destination", dest.string()}, {"sessions", m.sessions.size()}, {"totals", m.totals}});
      return 0;
    }
    if (*eval_cmd) {
      if (eval_cmd->got_subcommand("run")) {
        Service svc(cfg);
        return admin_call(svc, "POST", "/v1/admin/eval/run");
      }
      OracleOptions o;
      const auto flavor = enum_from_name<StdFlavor>(std_flavor);
      const auto round = enum_from_name<Rounding>(rounding);
      if (!flavor || !round) fail(ErrorCode::BadRequest, "unknown --std-flavor or --rounding");
      o.std_flavor = *flavor;
      o.pct_rounding = *round;
      if (all) {
        print(all_consistent_histograms(targets, o));
        return 0;
      }
      const auto m = find_consistent_histogram(targets, o);
      if (!m) {
        print({{"match", nullptr}});
        return 1;
      }
      print({{"match", *m}, {"aggregate", aggregate_histogram(m->histogram)}});
      return 0;
    }
    if (*metrics_cmd) return metrics(audio_path, prompt_key, cfg.ffmpeg_path);
    if (*wer_cmd) {
      const auto w = word_error_rate(ref, hyp);
      print({{"wer", w.wer},
             {"substitutions", w.substitutions},
             {"insertions", w.insertions},
             {"deletions", w.deletions},
             {"reference_words", w.reference_words},
             {"hypothesis_words", w.hypothesis_words}});
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << to_string(e.code()) << ": " << e.detail() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  return 0;
}
