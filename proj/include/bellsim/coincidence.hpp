#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bellsim/timetag.hpp"

namespace bellsim::coincidence {

/// Offsets are t_bob - t_alice in picoseconds.
struct OffsetSearch {
  std::int64_t range_lo = -2'000'000'000;  // ps
  std::int64_t range_hi = 2'000'000'000;   // ps
  std::int64_t bin_width = 1000;           // ps
  double probe_duration = 20.0;            // s of data from the start of the streams
  double min_sigma = 5.0;
  double false_alarm = 1e-3;  // allowed chance of a noise bin passing, over all bins
};

struct OffsetResult {
  std::int64_t offset = 0;  // ps
  std::uint64_t peak_count = 0;
  double background = 0.0;  // mean counts per bin
  double significance = 0.0;
  std::uint64_t differences = 0;  // pairs histogrammed
};

/// Throws Error(kInput) on empty or unsorted streams and Error(kNoSignal)
/// when the histogram has no significant peak.
OffsetResult find_offset(std::span<const TimeTag> alice, std::span<const TimeTag> bob, const OffsetSearch& search = {});

/// P(X >= k) for X ~ Poisson(mean).
double poisson_upper_tail(std::uint64_t k, double mean);

struct DriftOptions {
  double max_drift = 10e-9;  // s
  double block = 60.0;       // s
  std::int64_t fine_half_width = 500;  // ps, around the block peak
};

struct DriftBlock {
  double center = 0.0;        // s, stream time
  std::int64_t measured = 0;  // ps, deviation from the nominal offset
  std::int64_t applied = 0;   // ps, after significance test and clamp
  std::uint64_t support = 0;  // differences near the peak
  bool clamped = false;
  bool found = false;
};

struct DriftResult {
  TagStream tags;
  std::vector<DriftBlock> blocks;
  bool clamped = false;
  std::vector<std::string> warnings;
};

/// Re-estimate the offset of `tags` against `reference` block by block and
/// remove the deviation from `nominal_offset`, interpolated between block
/// centers. Deviations beyond max_drift are clamped and flagged.
DriftResult compensate_drift(std::span<const TimeTag> tags, std::span<const TimeTag> reference,
                             std::int64_t nominal_offset, const DriftOptions& opt = {});

enum class WindowConvention { kTotalWidth, kHalfWidth };

struct MatchOptions {
  double window = 1.5e-9;  // s
  WindowConvention convention = WindowConvention::kTotalWidth;
  std::int64_t half_width_ps() const;
};

struct CoincidenceSet {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;  // (alice index, bob index)
  // tallies[a_bit][b_bit][A][B], outcome index 0 = +1, 1 = -1
  std::array<std::array<std::array<std::array<std::uint64_t, 2>, 2>, 2>, 2> tallies{};
  std::uint64_t total = 0;
  double accidentals = 0.0;  // expected accidental pairs

  std::uint64_t count(int a_bit, int b_bit) const;
};

/// Greedy nearest-first matching: candidate pairs with |t_b - t_a - offset|
/// within the half width are accepted in order of distance, each tag used at
/// most once; ties go to the earlier Alice tag. Pairs are listed in Bob
/// order. Throws Error(kInput) on unsorted streams.
CoincidenceSet match(std::span<const TimeTag> alice, std::span<const TimeTag> bob, std::int64_t offset,
                     const MatchOptions& opt = {});

/// singles_a * singles_b * window (all in Hz and s).
double accidental_rate(double singles_a, double singles_b, double window);

struct Correlation {
  double value = 0.0;
  double sigma = 0.0;
  std::uint64_t n = 0;
};

struct BellEstimate {
  std::array<std::array<Correlation, 2>, 2> e{};  // [a_bit][b_bit]
  double s = 0.0;  // E00 + E01 + E10 - E11
  double sigma_s = 0.0;
  double sigma_above_2 = 0.0;
  bool background_subtracted = false;
};

/// Throws Error(kInsufficientData) naming the first empty combination.
BellEstimate estimate(const CoincidenceSet& cs);
/// Secondary output: accidentals removed proportionally from each combination.
BellEstimate estimate_background_subtracted(const CoincidenceSet& cs);

/// Combine tallies of separately analyzed runs.
CoincidenceSet merge(const std::vector<CoincidenceSet>& parts);

/// Row labels for report tables, e.g. "(0,22.5)"; indexed [a_bit][b_bit].
using SettingLabels = std::array<std::array<std::string, 2>, 2>;
SettingLabels default_labels();

std::string format_report(const CoincidenceSet& cs, const BellEstimate& est, const SettingLabels& labels);
/// CSV: combination rows with tallies, E and sigma, then S.
std::string format_csv(const CoincidenceSet& cs, const BellEstimate& est, const SettingLabels& labels);

/// Histogram of t_b - t_a - offset for all pairs within +-range (ps).
std::vector<std::uint64_t> delta_histogram(std::span<const TimeTag> alice, std::span<const TimeTag> bob,
                                           std::int64_t offset, std::int64_t range, std::int64_t bin_width);

}  // namespace bellsim::coincidence
