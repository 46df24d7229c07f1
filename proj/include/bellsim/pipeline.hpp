#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bellsim/coincidence.hpp"
#include "bellsim/config.hpp"
#include "bellsim/photonsim.hpp"

namespace bellsim::pipeline {

struct StreamAnalysis {
  coincidence::OffsetResult offset;
  coincidence::CoincidenceSet coincidences;
  bool drift_clamped = false;
  std::vector<coincidence::DriftBlock> drift_blocks;
  std::vector<std::string> warnings;
};

/// Offset discovery, optional drift compensation of Bob's stream, matching.
StreamAnalysis analyze_streams(std::span<const TimeTag> alice, std::span<const TimeTag> bob,
                               const config::AnalysisConfig& opt);

struct Segment {
  double duration = 0.0;
  photonsim::RunStats stats;
  StreamAnalysis analysis;
};

struct SimulationSummary {
  spacetime::LoopholeVerdict verdict;
  std::vector<Segment> segments;
  coincidence::CoincidenceSet merged;
  std::optional<coincidence::BellEstimate> estimate;  // empty when a combination has no data
  std::optional<coincidence::BellEstimate> subtracted;
  double duration = 0.0;
  double dark_rate_bob = 0.0;
  std::vector<std::string> warnings;

  std::uint64_t coincidences() const { return merged.total; }
};

/// Simulate cfg in independent segments of at most analysis.segment seconds
/// (each with its own local clocks) and analyze each; tallies are merged.
SimulationSummary simulate_and_analyze(const config::Config& cfg, std::uint64_t seed);

}  // namespace bellsim::pipeline
