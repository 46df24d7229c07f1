#include "bellsim/pipeline.hpp"

#include <cmath>

#include "bellsim/error.hpp"
#include "bellsim/parallel.hpp"

namespace bellsim::pipeline {

StreamAnalysis analyze_streams(std::span<const TimeTag> alice, std::span<const TimeTag> bob,
                               const config::AnalysisConfig& opt) {
  StreamAnalysis out;
  out.offset = coincidence::find_offset(alice, bob, opt.offset);
  if (opt.drift_compensation) {
    auto drift = coincidence::compensate_drift(bob, alice, out.offset.offset, opt.drift);
    out.drift_clamped = drift.clamped;
    out.drift_blocks = std::move(drift.blocks);
    out.warnings = std::move(drift.warnings);
    out.coincidences = coincidence::match(alice, drift.tags, out.offset.offset, opt.match);
  } else {
    out.coincidences = coincidence::match(alice, bob, out.offset.offset, opt.match);
  }
  out.coincidences.pairs.shrink_to_fit();
  return out;
}

SimulationSummary simulate_and_analyze(const config::Config& cfg, std::uint64_t seed) {
  SimulationSummary summary;
  summary.duration = cfg.scenario.run_duration;
  const double seg = cfg.analysis.segment;
  const auto n = static_cast<std::size_t>(std::ceil(summary.duration / seg - 1e-9));
  summary.segments.resize(n);
  summary.verdict = photonsim::scenario_verdict(cfg.scenario);
  photonsim::check_exploit_gate(cfg.scenario, summary.verdict);
  summary.dark_rate_bob = photonsim::calibrated(cfg.scenario).dark_rate_bob;

  parallel_for(n, [&](std::size_t i) {
    config::Config part = cfg;
    const double len = std::min(seg, summary.duration - seg * static_cast<double>(i));
    config::set_duration(part, len);
    auto run = photonsim::run_experiment(part.scenario, derive_seed(seed, "segment", i));
    auto& s = summary.segments[i];
    s.duration = len;
    s.stats = run.stats;
    s.analysis = analyze_streams(run.alice, run.bob, cfg.analysis);
    s.analysis.coincidences.pairs.clear();
    s.analysis.coincidences.pairs.shrink_to_fit();
    for (auto& w : run.warnings) s.analysis.warnings.push_back(std::move(w));
  });

  std::vector<coincidence::CoincidenceSet> parts;
  for (const auto& s : summary.segments) {
    parts.push_back(s.analysis.coincidences);
    for (const auto& w : s.analysis.warnings) summary.warnings.push_back(w);
  }
  summary.merged = coincidence::merge(parts);
  try {
    summary.estimate = coincidence::estimate(summary.merged);
    summary.subtracted = coincidence::estimate_background_subtracted(summary.merged);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kInsufficientData) throw;
    summary.warnings.push_back(e.what());
  }
  return summary;
}

}  // namespace bellsim::pipeline
