#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace bellsim::randomness {

/// Beam-splitter QRNG memory toggling at `toggle_rate` per direction.
struct QuantumToggle {
  double toggle_rate = 30e6;
};

/// Function-generator square wave: `frequency` level changes per second,
/// `phase` in cycles of the change period.
struct Periodic {
  double frequency = 1e6;
  double phase = 0.0;
};

struct Predetermined {
  std::vector<std::uint8_t> bits;
};

using SourceMode = std::variant<QuantumToggle, Periodic, Predetermined>;

struct SettingSource {
  SourceMode mode = QuantumToggle{};
  double sample_rate = 1e6;

  bool stochastic() const { return std::holds_alternative<QuantumToggle>(mode); }
  /// Empty when valid; a warning when the toggle rate is below 10x the
  /// sample rate. Throws Error(kConfig) on non-positive rates.
  std::optional<std::string> validate() const;
};

/// Flip-flop trajectory: the state after each change is implied by
/// alternation from `initial_state`.
struct ToggleTrajectory {
  std::uint8_t initial_state = 0;
  double duration = 0.0;
  std::vector<double> change_times;

  std::uint8_t state_at(double t) const;
  double time_in_state_one() const;
};

/// Symmetric two-state continuous-time Markov chain. Calls `on_change(t)`
/// for each state change in [0, duration); returns the initial state.
template <class F>
std::uint8_t for_each_toggle(double toggle_rate, double duration, std::uint64_t seed, F&& on_change);

ToggleTrajectory toggle_process(double toggle_rate, double duration, std::uint64_t seed);

/// Sampled setting bits; timestamp(i) = start + i / sample_rate.
class SettingStream {
 public:
  SettingStream() = default;
  SettingStream(std::vector<std::uint64_t> words, std::size_t size, double sample_rate, bool stochastic,
                double start = 0.0);

  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  double sample_rate() const { return sample_rate_; }
  double period() const { return 1.0 / sample_rate_; }
  double start() const { return start_; }
  bool stochastic() const { return stochastic_; }
  double timestamp(std::size_t i) const { return start_ + static_cast<double>(i) / sample_rate_; }
  std::uint8_t bit(std::size_t i) const { return static_cast<std::uint8_t>((words_[i >> 6] >> (i & 63)) & 1U); }
  std::vector<std::uint8_t> bits() const;
  std::span<const std::uint64_t> words() const { return words_; }
  std::optional<std::string> warning;

 private:
  std::vector<std::uint64_t> words_;
  std::size_t size_ = 0;
  double sample_rate_ = 1.0;
  bool stochastic_ = false;
  double start_ = 0.0;
};

/// Throws Error(kInput) when a predetermined list is shorter than required.
SettingStream sample_settings(const SettingSource& source, double duration, std::uint64_t seed);

/// Sample Pearson correlation of bits with themselves shifted by `lag`;
/// nullopt when either window has zero variance. Throws Error(kInput) if
/// lag >= size.
std::optional<double> autocorrelation(std::span<const std::uint8_t> bits, std::size_t lag);

/// 1 / (2 R): decay time of the flip-flop autocovariance.
double autocorrelation_time(double toggle_rate);

/// Fit an exponential to the autocorrelation of a trajectory sampled every
/// `dt` at lags 1..max_lag; returns the decay constant in seconds.
double fit_autocorrelation_time(const ToggleTrajectory& traj, double dt, std::size_t max_lag);

/// One byte (0 or 1) per bit, for external randomness batteries.
void write_bit_file(const SettingStream& stream, const std::filesystem::path& path);

}  // namespace bellsim::randomness

#include "bellsim/rng.hpp"

namespace bellsim::randomness {

template <class F>
std::uint8_t for_each_toggle(double toggle_rate, double duration, std::uint64_t seed, F&& on_change) {
  Rng rng(seed);
  const auto initial = static_cast<std::uint8_t>(rng() >> 63);
  if (!(toggle_rate > 0.0) || !(duration > 0.0)) return initial;
  double t = exponential(rng, toggle_rate);
  while (t < duration) {
    on_change(t);
    t += exponential(rng, toggle_rate);
  }
  return initial;
}

}  // namespace bellsim::randomness
