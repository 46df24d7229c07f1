#include "bellsim/photonsim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bellsim/error.hpp"
#include "bellsim/kernels.hpp"

namespace bellsim::photonsim {

namespace {

constexpr double kPs = 1e12;

std::uint64_t to_ps(double t) {
  if (!(t > 0.0)) return 0;
  return std::min(static_cast<std::uint64_t>(std::llround(t * kPs)), TimeTag::kMaxTime);
}

Channel channel_of(int outcome) { return outcome > 0 ? Channel::kTransmitted : Channel::kReflected; }

void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorKind::kConfig, "scenario: " + what);
}

int sample_sign(Rng& rng, double p_plus) { return uniform01(rng) < p_plus ? 1 : -1; }

}  // namespace

double ChannelSpec::survival() const { return std::pow(10.0, -attenuation_db / 10.0); }

std::string to_string(HiddenVariableMode mode) {
  switch (mode) {
    case HiddenVariableMode::kQuantum: return "quantum";
    case HiddenVariableMode::kLocalDeterministic: return "local";
    case HiddenVariableMode::kSettingAwareSource: return "setting-aware-source";
    case HiddenVariableMode::kSignalingAtSpeed: return "signaling";
  }
  return "?";
}

HiddenVariableMode parse_mode(const std::string& text) {
  for (auto m : {HiddenVariableMode::kQuantum, HiddenVariableMode::kLocalDeterministic,
                 HiddenVariableMode::kSettingAwareSource, HiddenVariableMode::kSignalingAtSpeed}) {
    if (text == to_string(m)) return m;
  }
  fail(ErrorKind::kConfig, "unknown hidden variable mode '" + text + "'");
}

LhvStrategy LhvStrategy::deterministic(std::array<int, 2> alice, std::array<int, 2> bob) {
  auto p = [](int o) { return o > 0 ? 1.0 : 0.0; };
  return LhvStrategy{{1.0}, {{p(alice[0]), p(alice[1])}}, {{p(bob[0]), p(bob[1])}}};
}

std::array<std::array<int, 4>, 16> LhvStrategy::enumerate_deterministic() {
  std::array<std::array<int, 4>, 16> out{};
  for (int k = 0; k < 16; ++k) {
    for (int j = 0; j < 4; ++j) out[k][j] = ((k >> j) & 1) ? -1 : 1;
  }
  return out;
}

LhvStrategy LhvStrategy::random(std::size_t n, Rng& rng) {
  LhvStrategy s;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s.weights.push_back(uniform01(rng) + 1e-12);
    total += s.weights.back();
    s.p_alice.push_back({uniform01(rng), uniform01(rng)});
    s.p_bob.push_back({uniform01(rng), uniform01(rng)});
  }
  for (auto& w : s.weights) w /= total;
  return s;
}

double LhvStrategy::correlation(int a_bit, int b_bit) const {
  double e = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    e += weights[i] * (2.0 * p_alice[i][a_bit] - 1.0) * (2.0 * p_bob[i][b_bit] - 1.0);
  }
  return e;
}

double LhvStrategy::chsh() const {
  return correlation(0, 0) + correlation(0, 1) + correlation(1, 0) - correlation(1, 1);
}

void LhvStrategy::validate() const {
  require(!weights.empty(), "hidden variable strategy has no values");
  require(p_alice.size() == weights.size() && p_bob.size() == weights.size(),
          "hidden variable strategy tables have mismatched sizes");
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    require(weights[i] >= 0.0, "negative hidden variable weight");
    total += weights[i];
    for (int s = 0; s < 2; ++s) {
      require(p_alice[i][s] >= 0.0 && p_alice[i][s] <= 1.0 && p_bob[i][s] >= 0.0 && p_bob[i][s] <= 1.0,
              "response probabilities must lie in [0, 1]");
    }
  }
  require(std::abs(total - 1.0) < 1e-9, "hidden variable weights must sum to 1");
}

int deterministic_chsh(const std::array<int, 4>& o) {
  // o = (A0, A1, B0, B1)
  return o[0] * o[2] + o[0] * o[3] + o[1] * o[2] - o[1] * o[3];
}

double ScenarioConfig::optical_visibility(double fiber) const {
  return 0.5 * (source_visibility[0] + source_visibility[1]) * analyzer_visibility * fiber;
}

void ScenarioConfig::validate() const {
  require(alice_attenuation_db >= 0.0 && bob_attenuation_db >= 0.0, "attenuations must be >= 0");
  require(coincidence_window > 0.0, "coincidence window must be > 0");
  require(pair_rate >= 0.0 && dark_rate_alice >= 0.0 && dark_rate_bob >= 0.0, "rates must be >= 0");
  require(std::isfinite(pair_rate) && std::isfinite(dark_rate_alice) && std::isfinite(dark_rate_bob),
          "rates must be finite");
  require(gating.toggle_rate > 0.0, "setting toggle rate must be > 0");
  require(gating.rise_time >= 0.0 && gating.discard_window >= gating.rise_time, "discard window must be >= rise time");
  require(gating.discard_window * gating.toggle_rate < 1.0, "discard window must be shorter than a setting interval");
  require(std::abs(geometry.setting_period * gating.toggle_rate - 1.0) < 1e-9,
          "geometry setting period must equal 1 / toggle rate");
  for (const auto* src : {&alice_source, &bob_source}) {
    require(std::abs(src->sample_rate / gating.toggle_rate - 1.0) < 1e-12,
            "setting sample rate must equal the analyzer toggle rate");
  }
  for (double v : {source_visibility[0], source_visibility[1], analyzer_visibility, fiber_visibility}) {
    require(v >= 0.0 && v <= 1.0, "visibilities must lie in [0, 1]");
  }
  require(fiber_visibility_end <= 1.0, "fiber visibility ramp end must be <= 1");
  require(jitter >= 0.0, "jitter must be >= 0");
  require(std::abs(bob_clock_drift) < 1e-3, "clock drift rate must be below 1e-3");
  require(run_duration >= 0.0 && std::isfinite(run_duration), "run duration must be >= 0");
  if (target_visibility) require(*target_visibility > 0.0 && *target_visibility <= 1.0, "target visibility in (0, 1]");
  if (mode == HiddenVariableMode::kLocalDeterministic && !strategy.weights.empty()) strategy.validate();
  require(signal_speed >= 0.0, "signal speed must be >= 0");
}

RateBudget rate_budget(const ScenarioConfig& cfg) {
  RateBudget b;
  const double ea = cfg.alice_channel().survival();
  const double eb = cfg.bob_channel().survival();
  b.true_coincidences = cfg.pair_rate * ea * eb;
  b.singles_alice = cfg.pair_rate * ea + 2.0 * cfg.dark_rate_alice;
  b.singles_bob = cfg.pair_rate * eb + 2.0 * cfg.dark_rate_bob;
  b.accidentals = b.singles_alice * b.singles_bob * cfg.coincidence_window;
  const double total = b.true_coincidences + b.accidentals;
  b.snr_visibility = total > 0.0 ? b.true_coincidences / total : 0.0;
  b.effective_visibility = cfg.optical_visibility() * b.snr_visibility;
  return b;
}

double calibrate_dark_rate_bob(const ScenarioConfig& cfg, double target) {
  const double optical = cfg.optical_visibility();
  if (!(target > 0.0) || target > optical) {
    std::ostringstream os;
    os << "target visibility " << target << " is not reachable with optical visibility " << optical;
    fail(ErrorKind::kConfig, os.str());
  }
  const double ea = cfg.alice_channel().survival();
  const double eb = cfg.bob_channel().survival();
  const double true_rate = cfg.pair_rate * ea * eb;
  const double acc = true_rate * (optical / target - 1.0);
  const double singles_a = cfg.pair_rate * ea + 2.0 * cfg.dark_rate_alice;
  if (!(singles_a > 0.0) || !(true_rate > 0.0)) fail(ErrorKind::kConfig, "calibration needs non-zero rates");
  const double singles_b = acc / (singles_a * cfg.coincidence_window);
  const double dark = 0.5 * (singles_b - cfg.pair_rate * eb);
  if (dark < 0.0) {
    std::ostringstream os;
    os << "target visibility " << target << " needs fewer accidentals than the signal photons alone produce";
    fail(ErrorKind::kConfig, os.str());
  }
  return dark;
}

ScenarioConfig calibrated(const ScenarioConfig& cfg) {
  ScenarioConfig out = cfg;
  if (cfg.target_visibility) out.dark_rate_bob = calibrate_dark_rate_bob(cfg, *cfg.target_visibility);
  return out;
}

std::vector<double> emit_pairs(double rate, double duration, std::uint64_t seed) {
  std::vector<double> times;
  if (!(rate > 0.0) || !(duration > 0.0)) return times;
  Rng rng(seed);
  times.reserve(static_cast<std::size_t>(rate * duration * 1.001 + 64));
  for (double t = exponential(rng, rate); t < duration; t += exponential(rng, rate)) times.push_back(t);
  return times;
}

std::vector<double> propagate(std::span<const double> times, const ChannelSpec& channel, std::uint64_t seed) {
  if (channel.attenuation_db < 0.0) fail(ErrorKind::kConfig, "channel attenuation must be >= 0");
  const double p = channel.survival();
  Rng rng(seed);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(static_cast<double>(times.size()) * p * 1.1) + 16);
  for (double t : times) {
    if (p >= 1.0 || uniform01(rng) < p) out.push_back(t + channel.delay);
  }
  return out;
}

ActiveSetting active_setting(const randomness::SettingStream& stream, const GatingSpec& gating, double t) {
  const auto period = static_cast<std::uint64_t>(std::llround(kPs / gating.toggle_rate));
  const auto discard = static_cast<std::uint64_t>(std::llround(gating.discard_window * kPs));
  const double rel = t - stream.start();
  if (!(rel >= 0.0)) fail(ErrorKind::kInput, "active_setting: time precedes the setting stream");
  const std::uint64_t tp = to_ps(rel);
  const std::uint64_t k = tp / period;
  if (k >= stream.size()) fail(ErrorKind::kInput, "active_setting: time beyond the setting stream");
  return {stream.bit(k), tp % period >= discard};
}

quantum::DensityMatrix effective_state(const ScenarioConfig& cfg, double fiber_visibility) {
  const auto w = quantum::werner(cfg.optical_visibility(fiber_visibility));
  const auto m = quantum::local_rotation(linalg::Mat2::identity(), quantum::half_wave_plate(cfg.bob_frame_plate),
                                         w.matrix());
  return quantum::DensityMatrix::from_matrix(m);
}

PairModel::PairModel(const ScenarioConfig& cfg, bool signal_arrives)
    : mode_(cfg.mode), signal_arrives_(signal_arrives), strategy_(cfg.strategy) {
  if (mode_ == HiddenVariableMode::kLocalDeterministic) {
    if (strategy_.weights.empty()) strategy_ = LhvStrategy::deterministic({1, 1}, {1, 1});
    strategy_.validate();
    double acc = 0.0;
    for (double w : strategy_.weights) cumulative_.push_back(acc += w);
  }
  // Pure part: the effective state at unit optical visibility.
  ScenarioConfig unit = cfg;
  unit.source_visibility = {1.0, 1.0};
  unit.analyzer_visibility = 1.0;
  const auto pure = effective_state(unit, 1.0);
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const auto p = quantum::outcome_probabilities(pure, quantum::PolarizerSetting(cfg.alice_angles[a]),
                                                    quantum::PolarizerSetting(cfg.bob_angles[b]));
      pure_[a][b] = p;
    }
  }
  v_start_ = cfg.optical_visibility(cfg.fiber_visibility);
  v_end_ = cfg.fiber_visibility_end >= 0.0 ? cfg.optical_visibility(cfg.fiber_visibility_end) : v_start_;
}

std::size_t PairModel::draw_lambda(Rng& rng) const {
  const double u = uniform01(rng) * cumulative_.back();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), cumulative_.size() - 1);
}

std::pair<int, int> PairModel::measure(int a_bit, int b_bit, double progress, Rng& rng) const {
  if ((a_bit != 0 && a_bit != 1) || (b_bit != 0 && b_bit != 1)) fail(ErrorKind::kInput, "setting bits must be 0 or 1");
  switch (mode_) {
    case HiddenVariableMode::kQuantum: {
      const double v = v_start_ + (v_end_ - v_start_) * std::clamp(progress, 0.0, 1.0);
      const auto& p = pure_[a_bit][b_bit];
      const double u = uniform01(rng);
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) {
        acc += v * p[k] + 0.25 * (1.0 - v);
        if (u < acc) return {k < 2 ? 1 : -1, (k % 2 == 0) ? 1 : -1};
      }
      return {-1, -1};
    }
    case HiddenVariableMode::kLocalDeterministic: {
      const auto l = draw_lambda(rng);
      const int a = sample_sign(rng, strategy_.p_alice[l][a_bit]);
      return {a, sample_sign(rng, strategy_.p_bob[l][b_bit])};
    }
    case HiddenVariableMode::kSettingAwareSource:
      // The source knows both settings and prepares each term at its extreme.
      return {1, (a_bit == 1 && b_bit == 1) ? -1 : 1};
    case HiddenVariableMode::kSignalingAtSpeed:
      if (signal_arrives_) return {1, (a_bit == 1 && b_bit == 1) ? -1 : 1};
      return {1, 1};
  }
  fail(ErrorKind::kInput, "invalid hidden variable mode");
}

int PairModel::single_alice(int a_bit, Rng& rng) const {
  if (mode_ == HiddenVariableMode::kLocalDeterministic) return sample_sign(rng, strategy_.p_alice[draw_lambda(rng)][a_bit]);
  return sample_sign(rng, 0.5);
}

int PairModel::single_bob(int b_bit, Rng& rng) const {
  if (mode_ == HiddenVariableMode::kLocalDeterministic) return sample_sign(rng, strategy_.p_bob[draw_lambda(rng)][b_bit]);
  return sample_sign(rng, 0.5);
}

std::pair<int, int> measure_pair(const ScenarioConfig& cfg, int a_bit, int b_bit, std::uint64_t seed) {
  const PairModel model(cfg, true);
  Rng rng(seed);
  return model.measure(a_bit, b_bit, 0.0, rng);
}

double RunStats::discarded_fraction() const {
  const auto raw = raw_alice + raw_bob;
  return raw == 0 ? 0.0 : static_cast<double>(gated_alice + gated_bob) / static_cast<double>(raw);
}

spacetime::LoopholeVerdict scenario_verdict(const ScenarioConfig& cfg) {
  spacetime::CausalityOptions opt;
  opt.slack = cfg.geometry.slack;
  const bool stochastic = cfg.alice_source.stochastic() && cfg.bob_source.stochastic();
  return spacetime::verdicts(spacetime::build_scenario_events(cfg.geometry), stochastic, opt);
}

void check_exploit_gate(const ScenarioConfig& cfg, const spacetime::LoopholeVerdict& verdict) {
  if (cfg.mode == HiddenVariableMode::kSettingAwareSource && verdict.freedom_closed) {
    fail(ErrorKind::kCausality,
         "causality violation: a setting-aware source needs the choice events inside the emission's light cone, "
         "but scenario '" + cfg.name + "' separates them (freedom-of-choice closed)");
  }
  if (cfg.mode == HiddenVariableMode::kSignalingAtSpeed && verdict.locality_closed) {
    fail(ErrorKind::kCausality,
         "causality violation: signaling between the stations needs a time-like link, but scenario '" + cfg.name +
             "' space-like separates them (locality closed)");
  }
}

namespace {

bool signal_reaches_bob(const ScenarioConfig& cfg) {
  const auto events = spacetime::build_scenario_events(cfg.geometry);
  const auto& ca = events[3];
  const auto& mb = events[2];
  if (cfg.signal_speed <= 0.0) return true;  // unbounded speed
  return ca.t + std::abs(mb.x - ca.x) / cfg.signal_speed <= mb.t;
}

struct SideBuffers {
  std::vector<std::uint64_t> photons;  // unpartnered signal photons, ps
  std::vector<std::uint64_t> darks;    // ps
  TagStream tags;
};

// Gate a batch of unpartnered detections with the kernel and append tags.
template <class Outcome>
std::uint64_t gate_into(std::span<const std::uint64_t> times, const randomness::SettingStream& settings,
                        std::uint64_t period, std::uint64_t discard, TagStream& out, Outcome&& outcome) {
  constexpr std::size_t kChunk = 1 << 15;
  std::vector<std::uint64_t> interval(kChunk);
  std::vector<std::uint8_t> valid(kChunk);
  std::uint64_t gated = 0;
  for (std::size_t base = 0; base < times.size(); base += kChunk) {
    const auto n = std::min(kChunk, times.size() - base);
    const auto chunk = times.subspan(base, n);
    kernels::gate(chunk, period, discard, std::span(interval).first(n), std::span(valid).first(n));
    for (std::size_t i = 0; i < n; ++i) {
      if (!valid[i]) {
        ++gated;
        continue;
      }
      if (interval[i] >= settings.size()) fail(ErrorKind::kNumerical, "detection beyond the setting stream");
      const auto bit = settings.bit(interval[i]);
      out.emplace_back(chunk[i], channel_of(outcome(bit)), bit);
    }
  }
  return gated;
}

// Insertion sort is linear on the almost-ordered output of the generator
// (only jitter reorders neighbours); falls back to std::sort otherwise.
void sort_tags(std::span<TimeTag> tags) {
  std::size_t moves = 0;
  const std::size_t budget = 8 * tags.size() + 1024;
  for (std::size_t i = 1; i < tags.size(); ++i) {
    const TimeTag v = tags[i];
    std::size_t j = i;
    while (j > 0 && v < tags[j - 1]) {
      tags[j] = tags[j - 1];
      --j;
      if (++moves > budget) {
        tags[j] = v;
        std::sort(tags.begin(), tags.end());
        return;
      }
    }
    tags[j] = v;
  }
}

}  // namespace

RunResult run_experiment(const ScenarioConfig& input, std::uint64_t seed) {
  input.validate();
  const ScenarioConfig cfg = calibrated(input);
  RunResult result;
  result.verdict = scenario_verdict(cfg);
  check_exploit_gate(cfg, result.verdict);
  result.stats.dark_rate_bob = cfg.dark_rate_bob;
  if (cfg.run_duration <= 0.0) return result;

  const double duration = cfg.run_duration;
  const auto ach = cfg.alice_channel();
  const auto bch = cfg.bob_channel();
  const double horizon = duration + std::max(ach.delay, bch.delay) * (1.0 + std::abs(cfg.bob_clock_drift)) + 1e-3;
  const auto alice_settings = randomness::sample_settings(cfg.alice_source, horizon, derive_seed(seed, "alice-settings"));
  const auto bob_settings = randomness::sample_settings(cfg.bob_source, horizon, derive_seed(seed, "bob-settings"));
  for (const auto* s : {&alice_settings, &bob_settings}) {
    if (s->warning) result.warnings.push_back(*s->warning);
  }

  const auto period = static_cast<std::uint64_t>(std::llround(kPs / cfg.gating.toggle_rate));
  const auto discard = static_cast<std::uint64_t>(std::llround(cfg.gating.discard_window * kPs));
  const PairModel model(cfg, cfg.mode == HiddenVariableMode::kSignalingAtSpeed && signal_reaches_bob(cfg));

  const double ea = ach.survival();
  const double eb = bch.survival();
  const double p_any = 1.0 - (1.0 - ea) * (1.0 - eb);
  const double p_joint = p_any > 0.0 ? ea * eb / p_any : 0.0;
  const double p_alice_only = p_any > 0.0 ? ea * (1.0 - eb) / p_any : 0.0;

  Rng pair_rng(derive_seed(seed, "pairs"));
  Rng jitter_rng(derive_seed(seed, "jitter"));
  Rng outcome_rng(derive_seed(seed, "outcomes"));
  const double drift_scale = 1.0 + cfg.bob_clock_drift;
  auto alice_time = [&](double t) { return to_ps(t + ach.delay + cfg.jitter * standard_normal(jitter_rng)); };
  auto bob_time = [&](double t) {
    return to_ps((t + bch.delay) * drift_scale + cfg.jitter * standard_normal(jitter_rng));
  };

  SideBuffers alice, bob;
  const double rate = cfg.pair_rate * p_any;
  const double expected = rate * duration;
  alice.photons.reserve(static_cast<std::size_t>(expected * (ea / std::max(p_any, 1e-300)) * 1.01) + 64);
  bob.photons.reserve(static_cast<std::size_t>(expected * (eb / std::max(p_any, 1e-300)) * 1.01) + 64);

  if (rate > 0.0) {
    for (double t = exponential(pair_rng, rate); t < duration; t += exponential(pair_rng, rate)) {
      ++result.stats.detectable_pairs;
      const double u = uniform01(pair_rng);
      if (u < p_joint) {
        ++result.stats.joint_pairs;
        const auto ta = alice_time(t);
        const auto tb = bob_time(t);
        const auto ka = ta / period, kb = tb / period;
        if (ka >= alice_settings.size() || kb >= bob_settings.size()) {
          fail(ErrorKind::kNumerical, "detection beyond the setting stream");
        }
        const bool va = ta % period >= discard;
        const bool vb = tb % period >= discard;
        const int a_bit = alice_settings.bit(ka);
        const int b_bit = bob_settings.bit(kb);
        const auto [oa, ob] = model.measure(a_bit, b_bit, t / duration, outcome_rng);
        ++result.stats.raw_alice;
        ++result.stats.raw_bob;
        if (va) alice.tags.emplace_back(ta, channel_of(oa), static_cast<std::uint8_t>(a_bit));
        else ++result.stats.gated_alice;
        if (vb) bob.tags.emplace_back(tb, channel_of(ob), static_cast<std::uint8_t>(b_bit));
        else ++result.stats.gated_bob;
      } else if (u < p_joint + p_alice_only) {
        ++result.stats.alice_only;
        alice.photons.push_back(alice_time(t));
      } else {
        ++result.stats.bob_only;
        bob.photons.push_back(bob_time(t));
      }
    }
  }

  auto add_darks = [&](double rate_per_detector, const ChannelSpec& ch, std::string_view stream,
                       std::vector<std::uint64_t>& out) {
    // Each side records during [delay, delay + duration); two detectors.
    const auto times = emit_pairs(2.0 * rate_per_detector, duration, derive_seed(seed, stream));
    out.reserve(times.size());
    for (double t : times) out.push_back(to_ps(t + ch.delay));
    return static_cast<std::uint64_t>(times.size());
  };
  result.stats.dark_alice = add_darks(cfg.dark_rate_alice, ach, "alice-dark", alice.darks);
  result.stats.dark_bob = add_darks(cfg.dark_rate_bob, bch, "bob-dark", bob.darks);

  auto dark_outcome = [&](std::uint8_t) { return sample_sign(outcome_rng, 0.5); };
  auto finish = [&](SideBuffers& side, const randomness::SettingStream& settings, bool is_alice,
                    std::uint64_t& gated, std::uint64_t& raw) {
    // Three runs, each almost ordered: paired photons, single photons, darks.
    side.tags.reserve(side.tags.size() + side.photons.size() + side.darks.size());
    raw += side.photons.size() + side.darks.size();
    const auto paired_end = static_cast<std::ptrdiff_t>(side.tags.size());
    gated += gate_into(side.photons, settings, period, discard, side.tags, [&](std::uint8_t bit) {
      return is_alice ? model.single_alice(bit, outcome_rng) : model.single_bob(bit, outcome_rng);
    });
    const auto singles_end = static_cast<std::ptrdiff_t>(side.tags.size());
    gated += gate_into(side.darks, settings, period, discard, side.tags, dark_outcome);
    std::vector<std::uint64_t>().swap(side.photons);
    std::vector<std::uint64_t>().swap(side.darks);
    const auto begin = side.tags.begin();
    sort_tags(std::span(begin, begin + paired_end));
    sort_tags(std::span(begin + paired_end, begin + singles_end));
    sort_tags(std::span(begin + singles_end, side.tags.end()));
    std::inplace_merge(begin, begin + paired_end, begin + singles_end);
    std::inplace_merge(begin, begin + singles_end, side.tags.end());
  };
  finish(alice, alice_settings, true, result.stats.gated_alice, result.stats.raw_alice);
  finish(bob, bob_settings, false, result.stats.gated_bob, result.stats.raw_bob);

  result.alice = std::move(alice.tags);
  result.bob = std::move(bob.tags);
  return result;
}

}  // namespace bellsim::photonsim
