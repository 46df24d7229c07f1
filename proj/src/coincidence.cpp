#include "bellsim/coincidence.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "bellsim/error.hpp"
#include "bellsim/kernels.hpp"

namespace bellsim::coincidence {

namespace {

constexpr double kPs = 1e12;

void require_sorted(std::span<const TimeTag> tags, const char* which) {
  if (!is_time_sorted(tags)) fail(ErrorKind::kInput, std::string(which) + " stream is not time-sorted");
}

std::int64_t signed_time(const TimeTag& t) { return static_cast<std::int64_t>(t.time_ps()); }

// Calls fn(bob_index, alice_index, diff) for every pair with
// lo <= t_b - t_a < hi, over Bob tags in [bob_begin, bob_end).
std::size_t index_before(std::span<const TimeTag> tags, std::int64_t t) {
  return static_cast<std::size_t>(
      std::lower_bound(tags.begin(), tags.end(), t, [](const TimeTag& x, std::int64_t v) { return signed_time(x) < v; }) -
      tags.begin());
}

template <class F>
void for_each_diff(std::span<const TimeTag> alice, std::span<const TimeTag> bob, std::size_t bob_begin,
                   std::size_t bob_end, std::int64_t lo, std::int64_t hi, F&& fn) {
  if (bob_begin >= bob_end) return;
  std::size_t first = index_before(alice, signed_time(bob[bob_begin]) - hi + 1);
  for (std::size_t j = bob_begin; j < bob_end; ++j) {
    const std::int64_t tb = signed_time(bob[j]);
    // alice times in (tb - hi, tb - lo]
    while (first < alice.size() && signed_time(alice[first]) <= tb - hi) ++first;
    for (std::size_t k = first; k < alice.size(); ++k) {
      const std::int64_t d = tb - signed_time(alice[k]);
      if (d < lo) break;
      fn(j, k, d);
    }
  }
}

struct Peak {
  std::size_t bin = 0;
  std::uint64_t count = 0;
  double background = 0.0;
  double significance = 0.0;
  bool significant = false;
};

Peak analyze_histogram(const std::vector<std::uint64_t>& hist, double min_sigma, double false_alarm) {
  Peak p;
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < hist.size(); ++i) {
    total += hist[i];
    if (hist[i] > p.count) {
      p.count = hist[i];
      p.bin = i;
    }
  }
  if (hist.size() > 1) p.background = static_cast<double>(total - p.count) / static_cast<double>(hist.size() - 1);
  p.significance = (static_cast<double>(p.count) - p.background) / std::sqrt(std::max(p.background, 1.0));
  const double chance = static_cast<double>(hist.size()) * poisson_upper_tail(p.count, p.background);
  p.significant = p.count >= 2 && p.significance >= min_sigma && chance < false_alarm;
  return p;
}

double median(std::vector<std::int64_t>& v) {
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = static_cast<double>(v[mid]);
  if (v.size() % 2 == 1) return hi;
  const double lo = static_cast<double>(*std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  return 0.5 * (lo + hi);
}

}  // namespace

double poisson_upper_tail(std::uint64_t k, double mean) {
  if (k == 0) return 1.0;
  if (mean <= 0.0) return 0.0;
  const double kd = static_cast<double>(k);
  if (kd <= mean) return 1.0;  // not in the tail; conservative
  double log_term = kd * std::log(mean) - mean - std::lgamma(kd + 1.0);
  double sum = 0.0;
  for (double j = kd; j < kd + 100000.0; j += 1.0) {
    const double term = std::exp(log_term);
    sum += term;
    if (term < 1e-17 * sum || (sum == 0.0 && log_term < -745.0)) break;
    log_term += std::log(mean) - std::log(j + 1.0);
  }
  return std::min(sum, 1.0);
}

OffsetResult find_offset(std::span<const TimeTag> alice, std::span<const TimeTag> bob, const OffsetSearch& s) {
  if (alice.empty() || bob.empty()) fail(ErrorKind::kInput, "find_offset: both streams must be non-empty");
  require_sorted(alice, "alice");
  require_sorted(bob, "bob");
  if (s.bin_width <= 0 || s.range_hi <= s.range_lo) fail(ErrorKind::kInput, "find_offset: invalid search range");
  const std::int64_t span = s.range_hi - s.range_lo;
  const auto nbins = static_cast<std::int32_t>(std::min<std::int64_t>((span + s.bin_width - 1) / s.bin_width, 1 << 26));

  const std::int64_t start = std::min(signed_time(alice.front()), signed_time(bob.front()));
  const auto probe_end = start + static_cast<std::int64_t>(s.probe_duration * kPs);
  const std::size_t bob_end = index_before(bob, probe_end);

  std::vector<std::uint64_t> hist(static_cast<std::size_t>(nbins), 0);
  constexpr std::size_t kBatch = 1 << 16;
  std::vector<std::int64_t> diffs;
  diffs.reserve(kBatch);
  std::vector<std::int32_t> idx(kBatch);
  std::uint64_t examined = 0;
  auto flush = [&] {
    kernels::bin_indices(diffs, s.range_lo, s.bin_width, nbins, std::span(idx).first(diffs.size()));
    for (std::size_t i = 0; i < diffs.size(); ++i) {
      if (idx[i] >= 0) ++hist[static_cast<std::size_t>(idx[i])];
    }
    examined += diffs.size();
    diffs.clear();
  };
  const std::int64_t hi = s.range_lo + static_cast<std::int64_t>(nbins) * s.bin_width;
  for_each_diff(alice, bob, 0, bob_end, s.range_lo, hi, [&](std::size_t, std::size_t, std::int64_t d) {
    diffs.push_back(d);
    if (diffs.size() == kBatch) flush();
  });
  flush();

  const Peak peak = analyze_histogram(hist, s.min_sigma, s.false_alarm);
  if (!peak.significant) {
    std::ostringstream os;
    os << "no significant coincidence peak: best bin " << peak.count << " counts over a background of "
       << peak.background << " (" << std::setprecision(3) << peak.significance << " sigma)";
    fail(ErrorKind::kNoSignal, os.str());
  }

  // Narrow the estimate with medians of the differences around the peak.
  double center = static_cast<double>(s.range_lo) + (static_cast<double>(peak.bin) + 0.5) * static_cast<double>(s.bin_width);
  std::vector<std::int64_t> near;
  for (double half : {2.0 * static_cast<double>(s.bin_width), 500.0, 300.0}) {
    const auto lo = static_cast<std::int64_t>(std::floor(center - half));
    const auto hi_n = static_cast<std::int64_t>(std::ceil(center + half)) + 1;
    near.clear();
    for_each_diff(alice, bob, 0, bob_end, lo, hi_n, [&](std::size_t, std::size_t, std::int64_t d) { near.push_back(d); });
    if (near.empty()) break;
    center = median(near);
  }

  OffsetResult r;
  r.offset = static_cast<std::int64_t>(std::llround(center));
  r.peak_count = peak.count;
  r.background = peak.background;
  r.significance = peak.significance;
  r.differences = examined;
  return r;
}

DriftResult compensate_drift(std::span<const TimeTag> tags, std::span<const TimeTag> reference,
                             std::int64_t nominal_offset, const DriftOptions& opt) {
  require_sorted(tags, "drifting");
  require_sorted(reference, "reference");
  if (!(opt.block > 0.0) || !(opt.max_drift > 0.0)) fail(ErrorKind::kInput, "compensate_drift: invalid options");
  DriftResult result;
  if (tags.empty() || reference.empty()) {
    result.tags.assign(tags.begin(), tags.end());
    return result;
  }

  const auto max_ps = static_cast<std::int64_t>(std::llround(opt.max_drift * kPs));
  const std::int64_t search = 3 * max_ps + 2000;
  const std::int64_t bin = 100;
  const auto block_ps = static_cast<std::int64_t>(std::llround(opt.block * kPs));
  const std::int64_t first = signed_time(tags.front());
  const std::int64_t last = signed_time(tags.back());
  const auto nblocks = static_cast<std::size_t>((last - first) / block_ps + 1);
  const std::int64_t deadband = 25;  // ps; shifts below this are left alone

  std::vector<std::uint64_t> hist(static_cast<std::size_t>(2 * search / bin));
  std::vector<std::int64_t> near;
  for (std::size_t k = 0; k < nblocks; ++k) {
    const std::int64_t b0 = first + static_cast<std::int64_t>(k) * block_ps;
    const std::int64_t b1 = std::min(b0 + block_ps, last + 1);
    const std::size_t j0 = index_before(tags, b0);
    const std::size_t j1 = index_before(tags, b1);
    DriftBlock blk;
    blk.center = 0.5 * static_cast<double>(b0 + b1) / kPs;

    std::fill(hist.begin(), hist.end(), 0);
    const std::int64_t lo = nominal_offset - search;
    for_each_diff(reference, tags, j0, j1, lo, nominal_offset + search, [&](std::size_t, std::size_t, std::int64_t d) {
      ++hist[static_cast<std::size_t>((d - lo) / bin)];
    });
    const Peak peak = analyze_histogram(hist, 5.0, 1e-3);
    if (peak.significant) {
      double center = static_cast<double>(lo) + (static_cast<double>(peak.bin) + 0.5) * static_cast<double>(bin);
      for (int pass = 0; pass < 2; ++pass) {
        near.clear();
        const auto nlo = static_cast<std::int64_t>(std::floor(center)) - opt.fine_half_width;
        const auto nhi = static_cast<std::int64_t>(std::ceil(center)) + opt.fine_half_width + 1;
        for_each_diff(reference, tags, j0, j1, nlo, nhi, [&](std::size_t, std::size_t, std::int64_t d) { near.push_back(d); });
        if (near.empty()) break;
        center = median(near);
      }
      if (!near.empty()) {
        double mean = 0.0, var = 0.0;
        for (auto d : near) mean += static_cast<double>(d);
        mean /= static_cast<double>(near.size());
        for (auto d : near) var += (static_cast<double>(d) - mean) * (static_cast<double>(d) - mean);
        const double sd = std::sqrt(var / static_cast<double>(near.size()));
        const double se = 1.2533 * sd / std::sqrt(static_cast<double>(near.size()));
        blk.found = true;
        blk.support = kernels::count_within(near, std::llround(center), opt.fine_half_width);
        blk.measured = static_cast<std::int64_t>(std::llround(center)) - nominal_offset;
        const double mag = std::abs(static_cast<double>(blk.measured));
        blk.applied = (mag > 3.0 * se && mag > static_cast<double>(deadband)) ? blk.measured : 0;
        if (std::abs(blk.applied) > max_ps) {
          blk.applied = blk.applied > 0 ? max_ps : -max_ps;
          blk.clamped = true;
          result.clamped = true;
        }
      }
    }
    result.blocks.push_back(blk);
  }

  std::vector<std::pair<double, double>> knots;  // (time ps, correction ps)
  for (const auto& b : result.blocks) {
    if (b.found) knots.emplace_back(b.center * kPs, static_cast<double>(b.applied));
  }
  if (result.clamped) {
    std::ostringstream os;
    os << "clock drift exceeds " << opt.max_drift * 1e9 << " ns; corrections clamped";
    result.warnings.push_back(os.str());
  }
  if (knots.empty()) {
    result.warnings.push_back("no block had a significant coincidence peak; drift left uncorrected");
    result.tags.assign(tags.begin(), tags.end());
    return result;
  }
  const bool all_zero = std::all_of(knots.begin(), knots.end(), [](const auto& kn) { return kn.second == 0.0; });
  if (all_zero) {
    result.tags.assign(tags.begin(), tags.end());
    return result;
  }

  auto correction = [&](double t) {
    if (t <= knots.front().first) return knots.front().second;
    if (t >= knots.back().first) return knots.back().second;
    const auto it = std::upper_bound(knots.begin(), knots.end(), t, [](double v, const auto& kn) { return v < kn.first; });
    const auto& [t1, c1] = *it;
    const auto& [t0, c0] = *(it - 1);
    return c0 + (c1 - c0) * (t - t0) / (t1 - t0);
  };
  result.tags.reserve(tags.size());
  for (const auto& tag : tags) {
    const double corrected = static_cast<double>(tag.time_ps()) - correction(static_cast<double>(tag.time_ps()));
    result.tags.push_back(tag.with_time(corrected > 0.0 ? static_cast<std::uint64_t>(std::llround(corrected)) : 0));
  }
  std::sort(result.tags.begin(), result.tags.end());
  return result;
}

std::int64_t MatchOptions::half_width_ps() const {
  const double half = convention == WindowConvention::kTotalWidth ? 0.5 * window : window;
  return static_cast<std::int64_t>(std::llround(half * kPs));
}

std::uint64_t CoincidenceSet::count(int a_bit, int b_bit) const {
  const auto& t = tallies[a_bit][b_bit];
  return t[0][0] + t[0][1] + t[1][0] + t[1][1];
}

CoincidenceSet match(std::span<const TimeTag> alice, std::span<const TimeTag> bob, std::int64_t offset,
                     const MatchOptions& opt) {
  require_sorted(alice, "alice");
  require_sorted(bob, "bob");
  if (!(opt.window > 0.0)) fail(ErrorKind::kInput, "match: window must be positive");
  const std::int64_t h = opt.half_width_ps();
  CoincidenceSet cs;

  // Candidate pairs inside the window, accepted nearest first. Ordering by
  // (distance, t_a + t_b) does not depend on which stream is called Alice,
  // so exchanging the streams (and negating the offset) gives the same pairs.
  struct Candidate {
    std::int64_t dist;
    std::int64_t sum;
    std::uint32_t a, b;
  };
  std::vector<Candidate> cand;
  std::size_t first = 0;
  for (std::size_t j = 0; j < bob.size(); ++j) {
    const std::int64_t target = signed_time(bob[j]) - offset;
    while (first < alice.size() && signed_time(alice[first]) < target - h) ++first;
    for (std::size_t k = first; k < alice.size(); ++k) {
      const std::int64_t ta = signed_time(alice[k]);
      if (ta > target + h) break;
      cand.push_back({ta > target ? ta - target : target - ta, ta + target, static_cast<std::uint32_t>(k),
                      static_cast<std::uint32_t>(j)});
    }
  }
  std::sort(cand.begin(), cand.end(), [](const Candidate& l, const Candidate& r) {
    if (l.dist != r.dist) return l.dist < r.dist;
    if (l.sum != r.sum) return l.sum < r.sum;
    return l.a < r.a;
  });
  std::vector<bool> used_a(alice.size(), false), used_b(bob.size(), false);
  for (const auto& c : cand) {
    if (used_a[c.a] || used_b[c.b]) continue;
    used_a[c.a] = used_b[c.b] = true;
    cs.pairs.emplace_back(c.a, c.b);
  }
  std::sort(cs.pairs.begin(), cs.pairs.end(), [](const auto& l, const auto& r) { return l.second < r.second; });
  for (const auto& [ia, ib] : cs.pairs) {
    const auto& a = alice[ia];
    const auto& b = bob[ib];
    ++cs.tallies[a.setting_bit()][b.setting_bit()][static_cast<int>(a.channel())][static_cast<int>(b.channel())];
  }
  cs.total = cs.pairs.size();

  if (!alice.empty() && !bob.empty()) {
    const double a0 = static_cast<double>(alice.front().time_ps()), a1 = static_cast<double>(alice.back().time_ps());
    const double b0 = static_cast<double>(bob.front().time_ps()) - static_cast<double>(offset);
    const double b1 = static_cast<double>(bob.back().time_ps()) - static_cast<double>(offset);
    const double overlap = (std::min(a1, b1) - std::max(a0, b0)) / kPs;
    if (overlap > 0.0 && a1 > a0 && b1 > b0) {
      const double ra = static_cast<double>(alice.size()) / ((a1 - a0) / kPs);
      const double rb = static_cast<double>(bob.size()) / ((b1 - b0) / kPs);
      cs.accidentals = accidental_rate(ra, rb, static_cast<double>(2 * h + 1) / kPs) * overlap;
    }
  }
  return cs;
}

double accidental_rate(double singles_a, double singles_b, double window) {
  if (singles_a < 0.0 || singles_b < 0.0 || window < 0.0) fail(ErrorKind::kInput, "accidental_rate: negative input");
  return singles_a * singles_b * window;
}

namespace {

BellEstimate estimate_impl(const CoincidenceSet& cs, bool subtract) {
  BellEstimate est;
  est.background_subtracted = subtract;
  double var = 0.0;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const auto& t = cs.tallies[a][b];
      const std::uint64_t n = cs.count(a, b);
      if (n == 0) {
        std::ostringstream os;
        os << "no coincidences for setting combination (a=" << a << ",b=" << b << ")";
        fail(ErrorKind::kInsufficientData, os.str());
      }
      const double nd = static_cast<double>(n);
      const double diff = static_cast<double>(t[0][0]) + static_cast<double>(t[1][1]) - static_cast<double>(t[0][1]) -
                          static_cast<double>(t[1][0]);
      double e = diff / nd;
      double sigma = std::sqrt(std::max(0.0, 1.0 - e * e) / nd);
      if (subtract && cs.total > 0) {
        const double acc = cs.accidentals * nd / static_cast<double>(cs.total);
        const double signal = nd - acc;
        if (signal <= 0.0) fail(ErrorKind::kInsufficientData, "background subtraction leaves no signal");
        e = diff / signal;
        sigma *= nd / signal;
      }
      est.e[a][b] = {e, sigma, n};
      var += sigma * sigma;
    }
  }
  est.s = est.e[0][0].value + est.e[0][1].value + est.e[1][0].value - est.e[1][1].value;
  est.sigma_s = std::sqrt(var);
  if (est.sigma_s > 0.0) {
    est.sigma_above_2 = (est.s - 2.0) / est.sigma_s;
  } else {
    est.sigma_above_2 = est.s > 2.0 ? std::numeric_limits<double>::infinity()
                                    : (est.s < 2.0 ? -std::numeric_limits<double>::infinity() : 0.0);
  }
  return est;
}

}  // namespace

BellEstimate estimate(const CoincidenceSet& cs) { return estimate_impl(cs, false); }
BellEstimate estimate_background_subtracted(const CoincidenceSet& cs) { return estimate_impl(cs, true); }

CoincidenceSet merge(const std::vector<CoincidenceSet>& parts) {
  CoincidenceSet out;
  for (const auto& p : parts) {
    for (int i = 0; i < 16; ++i) out.tallies[i >> 3][(i >> 2) & 1][(i >> 1) & 1][i & 1] +=
        p.tallies[i >> 3][(i >> 2) & 1][(i >> 1) & 1][i & 1];
    out.total += p.total;
    out.accidentals += p.accidentals;
  }
  // pair indices refer to different runs and are not carried over
  return out;
}

SettingLabels default_labels() {
  // (Bob angle, Alice angle), the order used in published correlation tables
  const char* alice[2] = {"22.5", "67.5"};
  const char* bob[2] = {"0", "45"};
  SettingLabels l;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) l[a][b] = std::string("(") + bob[b] + "," + alice[a] + ")";
  }
  return l;
}

namespace {
constexpr std::array<std::pair<int, int>, 4> kRowOrder{{{0, 0}, {1, 0}, {0, 1}, {1, 1}}};
}

std::string format_report(const CoincidenceSet& cs, const BellEstimate& est, const SettingLabels& labels) {
  std::ostringstream os;
  os << std::fixed;
  os << (est.background_subtracted ? "correlations (accidentals subtracted)\n" : "correlations (no background subtraction)\n");
  os << "  settings(b,a)      N++     N+-     N-+     N--       N        E     sigma\n";
  for (auto [a, b] : kRowOrder) {
    const auto& t = cs.tallies[a][b];
    os << "  " << std::left << std::setw(14) << labels[a][b] << std::right << std::setw(8) << t[0][0] << std::setw(8)
       << t[0][1] << std::setw(8) << t[1][0] << std::setw(8) << t[1][1] << std::setw(8) << est.e[a][b].n
       << std::setprecision(4) << std::setw(9) << est.e[a][b].value << std::setw(10) << est.e[a][b].sigma << "\n";
  }
  os << std::setprecision(4) << "S = " << est.s << " +- " << est.sigma_s << "  (" << std::setprecision(1)
     << est.sigma_above_2 << " sigma above 2)\n";
  os << "coincidences: " << cs.total << ", expected accidentals: " << std::setprecision(1) << cs.accidentals << "\n";
  return os.str();
}

std::string format_csv(const CoincidenceSet& cs, const BellEstimate& est, const SettingLabels& labels) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "settings,a_bit,b_bit,n_pp,n_pm,n_mp,n_mm,n,E,sigma_E\n";
  for (auto [a, b] : kRowOrder) {
    const auto& t = cs.tallies[a][b];
    os << '"' << labels[a][b] << '"' << ',' << a << ',' << b << ',' << t[0][0] << ',' << t[0][1] << ',' << t[1][0]
       << ',' << t[1][1] << ',' << est.e[a][b].n << ',' << est.e[a][b].value << ',' << est.e[a][b].sigma << "\n";
  }
  os << "S,,,,,,," << cs.total << ',' << est.s << ',' << est.sigma_s << "\n";
  os << "sigma_above_2,,,,,,,," << est.sigma_above_2 << ",\n";
  os << "accidentals_expected,,,,,,,," << cs.accidentals << ",\n";
  return os.str();
}

std::vector<std::uint64_t> delta_histogram(std::span<const TimeTag> alice, std::span<const TimeTag> bob,
                                           std::int64_t offset, std::int64_t range, std::int64_t bin_width) {
  require_sorted(alice, "alice");
  require_sorted(bob, "bob");
  if (range <= 0 || bin_width <= 0) fail(ErrorKind::kInput, "delta_histogram: range and bin width must be positive");
  const auto nbins = static_cast<std::size_t>((2 * range + bin_width - 1) / bin_width);
  std::vector<std::uint64_t> hist(nbins, 0);
  const std::int64_t lo = offset - range;
  for_each_diff(alice, bob, 0, bob.size(), lo, lo + static_cast<std::int64_t>(nbins) * bin_width,
                [&](std::size_t, std::size_t, std::int64_t d) { ++hist[static_cast<std::size_t>((d - lo) / bin_width)]; });
  return hist;
}

}  // namespace bellsim::coincidence
