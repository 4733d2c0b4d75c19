#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "voice_ehr/acoustics.hpp"
#include "voice_ehr/error.hpp"
#include "voice_ehr/eval.hpp"
#include "voice_ehr/protocol.hpp"
#include "voice_ehr/transcription.hpp"

namespace py = pybind11;
using namespace voice_ehr;

namespace {

using Samples = py::array_t<float, py::array::c_style | py::array::forcecast>;

std::span<const float> view(const Samples& a) {
  if (a.ndim() != 1) throw py::value_error("expected a 1-D array of samples");
  return {a.data(), static_cast<std::size_t>(a.size())};
}

PcmAudio to_audio(const Samples& a, int sample_rate) {
  const auto v = view(a);
  return PcmAudio{std::vector<float>(v.begin(), v.end()), sample_rate};
}

PromptPart part_from(const std::string& key) {
  auto p = prompt_part_from_key(key);
  if (!p) throw py::value_error("unknown prompt part " + key);
  return *p;
}

py::dict aggregate_dict(const RatingAggregate& a) {
  py::dict d;
  d["n"] = a.n;
  d["mean"] = a.mean;
  d["median"] = a.median;
  d["std_dev"] = a.std_dev;
  d["sample_std_dev"] = a.sample_std_dev;
  d["pct_gt2"] = a.pct_gt2;
  d["pct_eq5"] = a.pct_eq5;
  d["histogram"] = std::vector<int>(a.histogram.begin(), a.histogram.end());
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Signal, transcript and rating utilities from the voice_ehr core";

  static py::exception<Error> error(m, "VoiceEhrError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, (std::string(to_string(e.code())) + ": " + e.detail()).c_str());
    }
  });

  m.attr("CANONICAL_SAMPLE_RATE") = kCanonicalSampleRate;
  m.attr("RAINBOW_PASSAGE") = std::string(kRainbowPassage);

  m.def("rms_dbfs", [](const Samples& x) { return rms_dbfs(view(x)); }, py::arg("samples"));
  m.def("clipping_fraction", [](const Samples& x, double level) { return clipping_fraction(view(x), level); },
        py::arg("samples"), py::arg("clip_level") = 0.999);

  m.def(
      "respiratory_rate",
      [](const Samples& x, int sample_rate, double window_s) -> py::dict {
        const auto est = respiratory_rate(to_audio(x, sample_rate), window_s);
        py::dict d;
        d["bpm"] = est.bpm ? py::cast(*est.bpm) : py::none();
        d["confidence"] = est.confidence;
        d["autocorr_bpm"] = est.autocorr_bpm ? py::cast(*est.autocorr_bpm) : py::none();
        d["peak_count"] = est.peak_count;
        return d;
      },
      py::arg("samples"), py::arg("sample_rate") = kCanonicalSampleRate, py::arg("window_s") = 0.0);
  m.def("deep_breath_count", [](const Samples& x, int rate) { return deep_breath_count(to_audio(x, rate)); },
        py::arg("samples"), py::arg("sample_rate") = kCanonicalSampleRate);
  m.def("max_phonation_time", [](const Samples& x, int rate) { return max_phonation_time(to_audio(x, rate)); },
        py::arg("samples"), py::arg("sample_rate") = kCanonicalSampleRate);

  m.def(
      "word_error_rate",
      [](const std::string& ref, const std::string& hyp) {
        const auto w = word_error_rate(ref, hyp);
        py::dict d;
        d["wer"] = w.wer;
        d["substitutions"] = w.substitutions;
        d["insertions"] = w.insertions;
        d["deletions"] = w.deletions;
        d["reference_words"] = w.reference_words;
        d["hypothesis_words"] = w.hypothesis_words;
        return d;
      },
      py::arg("reference"), py::arg("hypothesis"));

  m.def("aggregate", [](const std::vector<int>& ratings) { return aggregate_dict(aggregate(ratings)); },
        py::arg("ratings"));
  m.def(
      "find_consistent_histogram",
      [](int n, std::optional<double> mean, std::optional<int> median, std::optional<double> std_dev,
         std::optional<int> pct_gt2, std::optional<int> pct_eq5) -> py::object {
        const auto match = find_consistent_histogram(HistogramTargets{n, mean, median, std_dev, pct_gt2, pct_eq5});
        if (!match) return py::none();
        py::dict d;
        d["histogram"] = std::vector<int>(match->histogram.begin(), match->histogram.end());
        d["std_flavor"] = std::string(enum_name(match->std_flavor));
        d["pct_rounding"] = std::string(enum_name(match->pct_rounding));
        return d;
      },
      py::arg("n"), py::kw_only(), py::arg("mean") = py::none(), py::arg("median") = py::none(),
      py::arg("std") = py::none(), py::arg("pct_gt2") = py::none(), py::arg("pct_eq5") = py::none());

  m.def(
      "should_transcribe",
      [](const std::string& key) {
        const auto p = part_from(key);
        return std::string(enum_name(should_transcribe(p.prompt, p.part)));
      },
      py::arg("prompt_part"));
  m.def(
      "next_page",
      [](const std::string& cohort, int page) {
        const auto c = enum_from_name<Cohort>(cohort);
        if (!c) throw py::value_error("cohort must be Patient or Control");
        return next_page(*c, page);
      },
      py::arg("cohort"), py::arg("page"));
  m.def(
      "required_pages",
      [](const std::string& cohort) {
        const auto c = enum_from_name<Cohort>(cohort);
        if (!c) throw py::value_error("cohort must be Patient or Control");
        return required_pages(*c);
      },
      py::arg("cohort"));
}
