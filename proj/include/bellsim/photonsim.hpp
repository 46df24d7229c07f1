#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bellsim/quantum.hpp"
#include "bellsim/randomness.hpp"
#include "bellsim/rng.hpp"
#include "bellsim/spacetime.hpp"
#include "bellsim/timetag.hpp"

namespace bellsim::photonsim {

struct ChannelSpec {
  double delay = 0.0;           // s
  double attenuation_db = 0.0;  // dB
  double survival() const;
};

struct GatingSpec {
  double rise_time = 15e-9;       // s
  double discard_window = 35e-9;  // s after each interval boundary
  double toggle_rate = 1e6;       // setting intervals per second
  double duty_cycle() const { return 1.0 - discard_window * toggle_rate; }
};

enum class HiddenVariableMode { kQuantum, kLocalDeterministic, kSettingAwareSource, kSignalingAtSpeed };

std::string to_string(HiddenVariableMode mode);
HiddenVariableMode parse_mode(const std::string& text);

/// Finite local hidden-variable model: lambda takes values 0..n-1 with
/// probability weights[lambda]; p_alice[lambda][a] = p(A = +1 | a, lambda).
struct LhvStrategy {
  std::vector<double> weights;
  std::vector<std::array<double, 2>> p_alice;
  std::vector<std::array<double, 2>> p_bob;

  /// A single deterministic strategy; outcomes are +1 or -1 per setting bit.
  static LhvStrategy deterministic(std::array<int, 2> alice, std::array<int, 2> bob);
  /// The 16 deterministic strategies as outcome quadruples (A0, A1, B0, B1).
  static std::array<std::array<int, 4>, 16> enumerate_deterministic();
  /// Random weights and response probabilities over `n` values of lambda.
  static LhvStrategy random(std::size_t n, Rng& rng);

  std::size_t size() const { return weights.size(); }
  /// E(a, b) in closed form.
  double correlation(int a_bit, int b_bit) const;
  /// E00 + E01 + E10 - E11.
  double chsh() const;
  /// Throws Error(kConfig) unless weights and probabilities are valid.
  void validate() const;
};

/// S for one deterministic outcome quadruple (A0, A1, B0, B1).
int deterministic_chsh(const std::array<int, 4>& outcomes);

struct ScenarioConfig {
  std::string name = "custom";
  spacetime::Geometry geometry;

  double pair_rate = 2.5e6;  // Hz, locally detected pairs
  double alice_attenuation_db = 20.0;
  double bob_attenuation_db = 35.0;
  double coincidence_window = 1.5e-9;  // s, total width
  double dark_rate_alice = 500.0;      // Hz per detector
  double dark_rate_bob = 500.0;        // Hz per detector
  /// When set, dark_rate_bob is recomputed so that the expected effective
  /// visibility (optical times signal-to-noise) equals this value.
  std::optional<double> target_visibility;
  double jitter = 100e-12;  // s, rms per detection
  double bob_clock_drift = 0.0;  // s of clock offset accumulated per s

  std::array<double, 2> source_visibility{0.99, 0.98};
  double analyzer_visibility = 0.99;
  double fiber_visibility = 0.97;
  /// Fiber visibility reached at the end of a run; negative disables the ramp.
  double fiber_visibility_end = -1.0;

  GatingSpec gating;
  randomness::SettingSource alice_source;
  randomness::SettingSource bob_source;
  std::array<double, 2> alice_angles{22.5, 67.5};  // degrees per setting bit
  std::array<double, 2> bob_angles{0.0, 45.0};
  double bob_frame_plate = 67.5;  // fixed half-wave plate in Bob's arm, degrees

  HiddenVariableMode mode = HiddenVariableMode::kQuantum;
  LhvStrategy strategy;         // used by kLocalDeterministic
  double signal_speed = 0.0;    // m/s, used by kSignalingAtSpeed

  double run_duration = 600.0;  // s

  ChannelSpec alice_channel() const { return {geometry.alice_fiber_delay, alice_attenuation_db}; }
  ChannelSpec bob_channel() const { return {geometry.bob_flight_delay, bob_attenuation_db}; }
  double optical_visibility(double fiber) const;
  double optical_visibility() const { return optical_visibility(fiber_visibility); }
  /// Throws Error(kConfig) on any violated invariant.
  void validate() const;
};

/// Expected rates (Hz, before gating) for a configuration.
struct RateBudget {
  double true_coincidences = 0.0;
  double singles_alice = 0.0;
  double singles_bob = 0.0;
  double accidentals = 0.0;
  double snr_visibility = 1.0;  // true / (true + accidentals)
  double effective_visibility = 1.0;
};

RateBudget rate_budget(const ScenarioConfig& cfg);

/// Bob's per-detector dark rate that brings the effective visibility to
/// `target`. Throws Error(kConfig) when the target cannot be reached.
double calibrate_dark_rate_bob(const ScenarioConfig& cfg, double target);

/// Homogeneous Poisson process on [0, duration), seconds, ascending.
std::vector<double> emit_pairs(double rate, double duration, std::uint64_t seed);

/// Independent survival with 10^(-dB/10), shifted by the channel delay.
std::vector<double> propagate(std::span<const double> times, const ChannelSpec& channel, std::uint64_t seed);

struct ActiveSetting {
  std::uint8_t setting_bit = 0;
  bool valid = true;
};

/// Bit of the setting interval containing local time t (s). Throws
/// Error(kInput) when t lies outside the stream.
ActiveSetting active_setting(const randomness::SettingStream& stream, const GatingSpec& gating, double t);

/// Per-pair outcome sampler for one configuration.
class PairModel {
 public:
  /// `signal_arrives` tells the signaling exploit whether Alice's setting
  /// can reach Bob's measurement at the configured speed.
  PairModel(const ScenarioConfig& cfg, bool signal_arrives);

  /// Outcomes (+1/-1) for a detected pair; `progress` in [0,1] drives the
  /// optional visibility ramp.
  std::pair<int, int> measure(int a_bit, int b_bit, double progress, Rng& rng) const;
  /// Outcome of an unpartnered photon.
  int single_alice(int a_bit, Rng& rng) const;
  int single_bob(int b_bit, Rng& rng) const;

  HiddenVariableMode mode() const { return mode_; }

 private:
  std::size_t draw_lambda(Rng& rng) const;

  HiddenVariableMode mode_;
  bool signal_arrives_;
  LhvStrategy strategy_;
  std::vector<double> cumulative_;
  // [a][b] -> cumulative (++, +-, -+) for the pure effective state and for noise.
  std::array<std::array<std::array<double, 4>, 2>, 2> pure_{};
  double v_start_ = 1.0;
  double v_end_ = 1.0;
};

/// measure_pair for one pair with a fresh generator.
std::pair<int, int> measure_pair(const ScenarioConfig& cfg, int a_bit, int b_bit, std::uint64_t seed);

/// Effective state seen by the analyzers: Werner state at the optical
/// visibility, with Bob's fixed plate applied.
quantum::DensityMatrix effective_state(const ScenarioConfig& cfg, double fiber_visibility);

struct RunStats {
  std::uint64_t detectable_pairs = 0;  // at least one photon survived
  std::uint64_t joint_pairs = 0;
  std::uint64_t alice_only = 0;
  std::uint64_t bob_only = 0;
  std::uint64_t dark_alice = 0;
  std::uint64_t dark_bob = 0;
  std::uint64_t gated_alice = 0;  // detections discarded by gating
  std::uint64_t gated_bob = 0;
  std::uint64_t raw_alice = 0;
  std::uint64_t raw_bob = 0;
  double dark_rate_bob = 0.0;  // as used (after calibration)

  double discarded_fraction() const;
};

struct RunResult {
  TagStream alice;
  TagStream bob;
  RunStats stats;
  spacetime::LoopholeVerdict verdict;
  std::vector<std::string> warnings;
};

/// Verdict for the configured geometry and setting sources.
spacetime::LoopholeVerdict scenario_verdict(const ScenarioConfig& cfg);

/// Throws Error(kCausality) when the mode exploits a loophole the verdict
/// reports as closed.
void check_exploit_gate(const ScenarioConfig& cfg, const spacetime::LoopholeVerdict& verdict);

/// Full simulation of one run. Times are picoseconds of each side's local
/// clock since the run start.
RunResult run_experiment(const ScenarioConfig& cfg, std::uint64_t seed);

/// Resolve target_visibility into dark_rate_bob (no-op when unset).
ScenarioConfig calibrated(const ScenarioConfig& cfg);

}  // namespace bellsim::photonsim
