#include <algorithm>
#include <cmath>
#include <random>

#include "bellsim/coincidence.hpp"
#include "bellsim/config.hpp"
#include "bellsim/error.hpp"
#include "bellsim/photonsim.hpp"
#include "bellsim/pipeline.hpp"
#include "doctest.h"

using namespace bellsim;
using namespace bellsim::coincidence;
using doctest::Approx;

namespace {
TagStream poisson_stream(double rate, double duration, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> gap(rate);
  std::bernoulli_distribution coin(0.5);
  TagStream out;
  for (double t = gap(rng); t < duration; t += gap(rng))
    out.emplace_back(static_cast<std::uint64_t>(t * 1e12), coin(rng) ? Channel::kReflected : Channel::kTransmitted,
                     coin(rng) ? 1 : 0);
  return out;
}

TagStream tags(std::initializer_list<std::uint64_t> times) {
  TagStream out;
  for (auto t : times) out.emplace_back(t, Channel::kTransmitted, 0);
  return out;
}

// Quantum-mode stream pair with a given total visibility, no darks.
photonsim::RunResult werner_run(double v, double duration, std::uint64_t seed) {
  photonsim::ScenarioConfig c;
  c.run_duration = duration;
  c.pair_rate = 1e5;
  c.alice_attenuation_db = c.bob_attenuation_db = 0;
  c.dark_rate_alice = c.dark_rate_bob = 0;
  c.source_visibility = {v, v};
  c.analyzer_visibility = c.fiber_visibility = 1;
  return photonsim::run_experiment(c, seed);
}

CoincidenceSet tallies_from(const double (&e)[2][2], std::uint64_t n) {
  CoincidenceSet cs;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const auto same = static_cast<std::uint64_t>(std::llround(n * (1 + e[a][b]) / 2));
      cs.tallies[a][b][0][0] = same / 2;
      cs.tallies[a][b][1][1] = same - same / 2;
      cs.tallies[a][b][0][1] = (n - same) / 2;
      cs.tallies[a][b][1][0] = n - same - (n - same) / 2;
      cs.total += n;
    }
  return cs;
}

// Smallest half-width around zero holding 90% of the values.
double spread90(std::vector<double> v) {
  for (auto& x : v) x = std::abs(x);
  std::sort(v.begin(), v.end());
  return v[static_cast<std::size_t>(0.9 * (v.size() - 1))];
}

std::vector<double> residuals(const TagStream& a, const TagStream& b, std::int64_t offset) {
  std::vector<double> out;
  MatchOptions wide{6e-9, WindowConvention::kTotalWidth};
  auto cs = match(a, b, offset, wide);
  for (auto [i, j] : cs.pairs)
    out.push_back(static_cast<double>(static_cast<std::int64_t>(b[j].time_ps()) - static_cast<std::int64_t>(a[i].time_ps()) - offset));
  return out;
}
}  // namespace

TEST_SUITE("coincidence") {
  TEST_CASE("offset of the default scenario") {
    auto cfg = config::preset("d");
    cfg.scenario.run_duration = 30.0;
    auto r = photonsim::run_experiment(cfg.scenario, 2);
    auto off = find_offset(r.alice, r.bob);
    // 479 us - 29.6 us
    CHECK(std::abs(off.offset - 449'400'000) < 750);
    CHECK(off.significance >= 5.0);
  }

  TEST_CASE("offset of identical streams") {
    auto s = poisson_stream(2e5, 1.0, 1);
    OffsetSearch search;
    search.range_lo = -1'000'000;
    search.range_hi = 1'000'000;
    CHECK(find_offset(s, s, search).offset == 0);
  }

  TEST_CASE("no peak in independent noise") {
    auto a = poisson_stream(2e4, 5.0, 1), b = poisson_stream(2e4, 5.0, 2);
    try {
      find_offset(a, b);
      FAIL("expected no-signal");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kNoSignal);
    }
    TagStream later;
    for (auto t : b) later.push_back(t.with_time(t.time_ps() + 3'000'000'000'000ULL));
    CHECK_THROWS_AS(find_offset(a, later), Error);
    CHECK_THROWS_AS(find_offset({}, b), Error);
  }

  TEST_CASE("poisson tail") {
    CHECK(poisson_upper_tail(0, 3.0) == 1.0);
    // P(X >= 2) for mean 1 = 1 - 2/e
    CHECK(poisson_upper_tail(2, 1.0) == Approx(1 - 2 / std::exp(1.0)));
    CHECK(poisson_upper_tail(30, 1.0) < 1e-30);
  }

  TEST_CASE("matching singletons") {
    CHECK(match(tags({1'000'000}), tags({1'000'500}), 0).total == 1);
    CHECK(match(tags({1'000'000}), tags({1'002'000}), 0).total == 0);
    CHECK(match(tags({1'000'000}), tags({1'002'000}), 0, {1.5e-9, WindowConvention::kHalfWidth}).total == 0);
    CHECK(match(tags({1'000'000}), tags({1'001'400}), 0, {1.5e-9, WindowConvention::kHalfWidth}).total == 1);
    CHECK(match(tags({1'000'000}), tags({1'500'400}), 500'000).total == 1);
    CHECK(MatchOptions{}.half_width_ps() == 750);
  }

  TEST_CASE("ties go to the earlier alice tag") {
    auto cs = match(tags({1000, 2000}), tags({1500}), 0);
    REQUIRE(cs.total == 1);
    CHECK(cs.pairs[0].first == 0);
  }

  TEST_CASE("each tag is used once") {
    auto cs = match(tags({1000, 1100}), tags({1050, 1060, 1070}), 0);
    CHECK(cs.total == 2);
    std::vector<std::uint32_t> a, b;
    for (auto [i, j] : cs.pairs) {
      a.push_back(i);
      b.push_back(j);
    }
    std::sort(a.begin(), a.end());
    CHECK(std::adjacent_find(a.begin(), a.end()) == a.end());
  }

  TEST_CASE("unsorted input is rejected") {
    CHECK_THROWS_AS(match(tags({5, 1}), tags({1}), 0), Error);
  }

  TEST_CASE("exchange symmetry and window monotonicity") {
    // a case where bob-driven nearest matching would find one pair and the
    // alice-driven one two
    auto a = tags({9'300, 10'500}), b = tags({10'000, 11'000});
    CHECK(match(a, b, 0).total == match(b, a, 0).total);

    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
      auto x = poisson_stream(2e8, 2e-4, rng()), y = poisson_stream(2e8, 2e-4, rng());
      const std::int64_t off = static_cast<std::int64_t>(rng() % 2000) - 1000;
      CHECK(match(x, y, off).total == match(y, x, -off).total);
      std::uint64_t prev = 0;
      for (double w : {0.2e-9, 0.5e-9, 1e-9, 1.5e-9, 3e-9, 10e-9}) {
        const auto n = match(x, y, off, {w, WindowConvention::kTotalWidth}).total;
        CHECK(n >= prev);
        prev = n;
      }
    }
  }

  TEST_CASE("accidental rate") {
    CHECK(accidental_rate(1e5, 1e5, 1.5e-9) == Approx(15.0));
    CHECK(accidental_rate(0, 1e5, 1.5e-9) == 0.0);
    auto a = poisson_stream(5e5, 10.0, 7), b = poisson_stream(5e5, 10.0, 8);
    auto cs = match(a, b, 0);
    const double formula = accidental_rate(5e5, 5e5, 1.5e-9) * 10.0;
    CHECK(std::abs(cs.total / formula - 1.0) < 0.1);
    CHECK(std::abs(cs.accidentals / formula - 1.0) < 0.1);
  }

  TEST_CASE("uncorrelated streams give S near zero") {
    auto a = poisson_stream(1e5, 10.0, 11), b = poisson_stream(1e5, 10.0, 12);
    auto cs = match(a, b, 0, {100e-9, WindowConvention::kTotalWidth});
    auto est = estimate(cs);
    CHECK(cs.total > 5000);
    CHECK(std::abs(est.s) < 4 * est.sigma_s);
  }

  TEST_CASE("estimator on fixed tallies") {
    const double e[2][2] = {{0.62, 0.55}, {0.63, -0.57}};
    auto cs = tallies_from(e, 10000);
    auto est = estimate(cs);
    CHECK(est.e[0][0].value == Approx(0.62));
    CHECK(est.e[1][1].value == Approx(-0.57));
    CHECK(est.s == Approx(2.37));
    double var = 0;
    for (auto& row : est.e)
      for (auto& c : row) var += c.sigma * c.sigma;
    CHECK(est.sigma_s == Approx(std::sqrt(var)));
    CHECK(est.sigma_above_2 == Approx((est.s - 2) / est.sigma_s));

    const double flat[2][2] = {{0.6, 0.6}, {0.6, -0.6}};
    auto published = estimate(tallies_from(flat, 4980));
    CHECK(published.e[0][0].sigma == Approx(std::sqrt(0.64 / 4980)));
    CHECK(published.e[0][0].sigma == Approx(0.011).epsilon(0.05));
    CHECK(published.sigma_s == Approx(0.023).epsilon(0.05));

    CoincidenceSet all_pp;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) all_pp.tallies[a][b][0][0] = 10;
    all_pp.total = 40;
    auto one = estimate(all_pp);
    CHECK(one.e[0][1].value == 1.0);
    CHECK(one.e[0][1].sigma == 0.0);

    CoincidenceSet missing = all_pp;
    missing.tallies[1][0][0][0] = 0;
    try {
      estimate(missing);
      FAIL("expected insufficient data");
    } catch (const Error& err) {
      CHECK(err.kind() == ErrorKind::kInsufficientData);
      CHECK(std::string(err.what()).find("a=1,b=0") != std::string::npos);
    }
  }

  TEST_CASE("background subtraction is a separate output") {
    const double e[2][2] = {{0.5, 0.5}, {0.5, -0.5}};
    auto cs = tallies_from(e, 1000);
    cs.accidentals = 400;
    auto raw = estimate(cs), sub = estimate_background_subtracted(cs);
    CHECK_FALSE(raw.background_subtracted);
    CHECK(sub.background_subtracted);
    CHECK(sub.e[0][0].value == Approx(0.5 / 0.9));
    CHECK(raw.s == Approx(2.0));
  }

  TEST_CASE("merge adds tallies") {
    const double e[2][2] = {{0.5, 0.5}, {0.5, -0.5}};
    auto m = merge({tallies_from(e, 100), tallies_from(e, 300)});
    CHECK(m.total == 1600);
    CHECK(m.count(1, 1) == 400);
  }

  TEST_CASE("estimator consistency on werner data") {
    for (double v : {0.5, 0.838, 1.0}) {
      auto r = werner_run(v, 0.15, 31);
      auto an = pipeline::analyze_streams(r.alice, r.bob, {});
      auto est = estimate(an.coincidences);
      CHECK(an.coincidences.total >= 5000);
      CHECK(std::abs(est.s - 2 * std::sqrt(2.0) * v) < 4 * est.sigma_s);
    }
  }

  TEST_CASE("drift compensation") {
    auto base = config::preset("d");
    base.scenario.run_duration = 600.0;

    SUBCASE("no drift leaves the stream alone") {
      auto r = photonsim::run_experiment(base.scenario, 3);
      auto off = find_offset(r.alice, r.bob);
      auto d = compensate_drift(r.bob, r.alice, off.offset);
      CHECK_FALSE(d.clamped);
      CHECK(d.tags == r.bob);
    }
    SUBCASE("8 ns over the run is recovered") {
      // without dark counts, so the residual spread is not dominated by accidentals
      auto s = base.scenario;
      s.target_visibility.reset();
      s.dark_rate_alice = s.dark_rate_bob = 0;
      s.bob_clock_drift = 8e-9 / 600.0;
      auto r = photonsim::run_experiment(s, 4);
      auto off = find_offset(r.alice, r.bob);
      auto before = spread90(residuals(r.alice, r.bob, off.offset));
      auto d = compensate_drift(r.bob, r.alice, off.offset);
      CHECK_FALSE(d.clamped);
      auto after = spread90(residuals(r.alice, d.tags, off.offset));
      CHECK(before > 2000);
      CHECK(after < 750);  // half the 1.5 ns window
    }
    SUBCASE("8 ns drift with the calibrated background keeps the coincidences") {
      auto s = base.scenario;
      auto ref = photonsim::run_experiment(s, 6);
      s.bob_clock_drift = 8e-9 / 600.0;
      auto r = photonsim::run_experiment(s, 6);
      const auto n_ref = pipeline::analyze_streams(ref.alice, ref.bob, base.analysis).coincidences.total;
      auto opt = base.analysis;
      const auto n_drift = pipeline::analyze_streams(r.alice, r.bob, opt).coincidences.total;
      opt.drift_compensation = false;
      const auto n_raw = pipeline::analyze_streams(r.alice, r.bob, opt).coincidences.total;
      CHECK(n_drift > 0.95 * n_ref);
      CHECK(n_raw < 0.5 * n_ref);
    }
    SUBCASE("25 ns is clamped and flagged") {
      auto s = base.scenario;
      s.bob_clock_drift = 25e-9 / 600.0;
      auto r = photonsim::run_experiment(s, 5);
      auto off = find_offset(r.alice, r.bob);
      auto d = compensate_drift(r.bob, r.alice, off.offset);
      CHECK(d.clamped);
      CHECK_FALSE(d.warnings.empty());
      for (const auto& b : d.blocks) CHECK(std::abs(b.applied) <= 10'000);
    }
  }

  TEST_CASE("report layout") {
    const double e[2][2] = {{0.62, 0.55}, {0.63, -0.57}};
    auto cs = tallies_from(e, 1000);
    auto est = estimate(cs);
    auto text = format_report(cs, est, default_labels());
    CHECK(text.find("(0,22.5)") < text.find("(0,67.5)"));
    CHECK(text.find("(0,67.5)") < text.find("(45,22.5)"));
    auto csv = format_csv(cs, est, default_labels());
    CHECK(csv.rfind("settings,a_bit,b_bit", 0) == 0);
  }
}
