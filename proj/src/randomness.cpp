#include "bellsim/randomness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "bellsim/error.hpp"

namespace bellsim::randomness {

std::optional<std::string> SettingSource::validate() const {
  if (!(sample_rate > 0.0)) fail(ErrorKind::kConfig, "setting source: sample rate must be positive");
  if (const auto* q = std::get_if<QuantumToggle>(&mode)) {
    if (!(q->toggle_rate > 0.0)) fail(ErrorKind::kConfig, "setting source: toggle rate must be positive");
    if (q->toggle_rate < 10.0 * sample_rate) {
      std::ostringstream os;
      os << "toggle rate " << q->toggle_rate << " Hz is less than 10x the sample rate " << sample_rate
         << " Hz; successive settings will be correlated";
      return os.str();
    }
  } else if (const auto* p = std::get_if<Periodic>(&mode)) {
    if (!(p->frequency > 0.0)) fail(ErrorKind::kConfig, "setting source: periodic frequency must be positive");
  }
  return std::nullopt;
}

std::uint8_t ToggleTrajectory::state_at(double t) const {
  const auto changes = std::upper_bound(change_times.begin(), change_times.end(), t) - change_times.begin();
  return static_cast<std::uint8_t>(initial_state ^ (changes & 1));
}

double ToggleTrajectory::time_in_state_one() const {
  double total = 0.0;
  double last = 0.0;
  std::uint8_t state = initial_state;
  for (double t : change_times) {
    if (state) total += t - last;
    last = t;
    state ^= 1U;
  }
  if (state) total += duration - last;
  return total;
}

ToggleTrajectory toggle_process(double toggle_rate, double duration, std::uint64_t seed) {
  ToggleTrajectory traj;
  traj.duration = std::max(duration, 0.0);
  if (toggle_rate > 0.0 && duration > 0.0) traj.change_times.reserve(static_cast<std::size_t>(toggle_rate * duration * 1.01) + 16);
  traj.initial_state = for_each_toggle(toggle_rate, duration, seed, [&](double t) { traj.change_times.push_back(t); });
  return traj;
}

SettingStream::SettingStream(std::vector<std::uint64_t> words, std::size_t size, double sample_rate, bool stochastic,
                             double start)
    : words_(std::move(words)), size_(size), sample_rate_(sample_rate), stochastic_(stochastic), start_(start) {}

std::vector<std::uint8_t> SettingStream::bits() const {
  std::vector<std::uint8_t> out(size_);
  for (std::size_t i = 0; i < size_; ++i) out[i] = bit(i);
  return out;
}

SettingStream sample_settings(const SettingSource& source, double duration, std::uint64_t seed) {
  auto warning = source.validate();
  const std::size_t n =
      duration > 0.0 ? static_cast<std::size_t>(std::ceil(duration * source.sample_rate - 1e-9)) : std::size_t{0};
  std::vector<std::uint64_t> words((n + 63) / 64, 0);
  auto set = [&](std::size_t i, unsigned b) { words[i >> 6] |= static_cast<std::uint64_t>(b & 1U) << (i & 63); };

  if (const auto* q = std::get_if<QuantumToggle>(&source.mode)) {
    // Exact sampled chain: between samples the memory flips an odd number of
    // times with probability (1 - exp(-2 R dt)) / 2.
    Rng rng(seed);
    const double p_flip = 0.5 * (1.0 - std::exp(-2.0 * q->toggle_rate / source.sample_rate));
    if (p_flip == 0.5) {
      // indistinguishable from independent fair bits in double precision
      for (auto& w : words) w = rng();
    } else {
      unsigned state = static_cast<unsigned>(rng() >> 63);
      for (std::size_t i = 0; i < n; ++i) {
        if (i > 0 && bernoulli(rng, p_flip)) state ^= 1U;
        set(i, state);
      }
    }
    if (n % 64 != 0 && !words.empty()) words.back() &= (std::uint64_t{1} << (n % 64)) - 1;
  } else if (const auto* p = std::get_if<Periodic>(&source.mode)) {
    for (std::size_t i = 0; i < n; ++i) {
      const double level = static_cast<double>(i) * p->frequency / source.sample_rate + p->phase;
      set(i, static_cast<unsigned>(static_cast<long long>(std::floor(level + 1e-9)) & 1LL));
    }
  } else {
    const auto& list = std::get<Predetermined>(source.mode).bits;
    if (list.size() < n) {
      std::ostringstream os;
      os << "predetermined setting list exhausted: " << list.size() << " bits for " << n << " samples";
      fail(ErrorKind::kInput, os.str());
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (list[i] > 1) fail(ErrorKind::kInput, "predetermined setting list must contain only 0 and 1");
      set(i, list[i]);
    }
  }
  SettingStream stream(std::move(words), n, source.sample_rate, source.stochastic());
  stream.warning = std::move(warning);
  return stream;
}

std::optional<double> autocorrelation(std::span<const std::uint8_t> bits, std::size_t lag) {
  if (lag >= bits.size()) {
    std::ostringstream os;
    os << "autocorrelation: lag " << lag << " >= length " << bits.size();
    fail(ErrorKind::kInput, os.str());
  }
  const std::size_t m = bits.size() - lag;
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double x = bits[i];
    const double y = bits[i + lag];
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
  }
  const double md = static_cast<double>(m);
  const double vx = sxx - sx * sx / md;
  const double vy = syy - sy * sy / md;
  if (vx <= 0.0 || vy <= 0.0) return std::nullopt;
  return (sxy - sx * sy / md) / std::sqrt(vx * vy);
}

double autocorrelation_time(double toggle_rate) {
  if (!(toggle_rate > 0.0)) fail(ErrorKind::kInput, "autocorrelation_time: rate must be positive");
  return 1.0 / (2.0 * toggle_rate);
}

double fit_autocorrelation_time(const ToggleTrajectory& traj, double dt, std::size_t max_lag) {
  const auto n = static_cast<std::size_t>(traj.duration / dt);
  std::vector<std::uint8_t> samples(n);
  std::size_t k = 0;
  std::uint8_t state = traj.initial_state;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * dt;
    while (k < traj.change_times.size() && traj.change_times[k] <= t) {
      state ^= 1U;
      ++k;
    }
    samples[i] = state;
  }
  // least squares through the origin of log r(lag) = -lag dt / tau
  double num = 0.0, den = 0.0;
  for (std::size_t lag = 1; lag <= max_lag; ++lag) {
    const auto r = autocorrelation(samples, lag);
    if (!r || *r < 0.05) break;
    const double x = static_cast<double>(lag) * dt;
    num += x * std::log(*r);
    den += x * x;
  }
  if (den == 0.0) fail(ErrorKind::kNumerical, "fit_autocorrelation_time: no usable lags");
  return -den / num;
}

void write_bit_file(const SettingStream& stream, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kInput, "cannot open " + path.string());
  const auto bits = stream.bits();
  out.write(reinterpret_cast<const char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
}

}  // namespace bellsim::randomness
