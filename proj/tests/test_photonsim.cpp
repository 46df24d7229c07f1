#include <algorithm>
#include <cmath>

#include "bellsim/config.hpp"
#include "bellsim/error.hpp"
#include "bellsim/photonsim.hpp"
#include "bellsim/pipeline.hpp"
#include "doctest.h"

using namespace bellsim;
using namespace bellsim::photonsim;
using doctest::Approx;

namespace {
ScenarioConfig quiet(double duration) {
  ScenarioConfig c;
  c.run_duration = duration;
  c.dark_rate_alice = 0.0;
  c.dark_rate_bob = 0.0;
  return c;
}

// S from sampled outcomes of a pair model, with its standard error.
std::pair<double, double> sampled_chsh(const PairModel& m, int n, std::uint64_t seed) {
  Rng rng(seed);
  double s = 0, var = 0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      double sum = 0;
      for (int i = 0; i < n; ++i) {
        auto [x, y] = m.measure(a, b, 0.0, rng);
        sum += x * y;
      }
      const double e = sum / n;
      s += (a == 1 && b == 1) ? -e : e;
      var += (1 - e * e) / n;
    }
  return {s, std::sqrt(var)};
}
}  // namespace

TEST_SUITE("photonsim") {
  TEST_CASE("pair emission is Poisson") {
    auto t = emit_pairs(2.5e6, 1.0, 3);
    CHECK(std::abs(static_cast<double>(t.size()) - 2.5e6) < 4 * std::sqrt(2.5e6));
    CHECK(emit_pairs(0.0, 1.0, 3).empty());
    CHECK(std::is_sorted(t.begin(), t.end()));
    // Kolmogorov-Smirnov on 1e5 inter-arrival times, alpha = 0.01
    std::vector<double> gaps;
    for (std::size_t i = 1; i <= 100000; ++i) gaps.push_back(t[i] - t[i - 1]);
    std::sort(gaps.begin(), gaps.end());
    const double n = static_cast<double>(gaps.size());
    double d = 0;
    for (std::size_t i = 0; i < gaps.size(); ++i) {
      const double f = 1 - std::exp(-2.5e6 * gaps[i]);
      d = std::max({d, std::abs(f - i / n), std::abs(f - (i + 1) / n)});
    }
    CHECK(d < 1.628 / std::sqrt(n));
  }

  TEST_CASE("channel survival and delay") {
    std::vector<double> t(1000000);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = i * 1e-6;
    auto s = propagate(t, {29.6e-6, 20.0}, 1);
    CHECK(std::abs(static_cast<double>(s.size()) - 1e4) < 400);
    auto all = propagate(t, {5e-6, 0.0}, 1);
    REQUIRE(all.size() == t.size());
    CHECK(all[10] == Approx(t[10] + 5e-6));
    CHECK(ChannelSpec{0, 35}.survival() == Approx(std::pow(10.0, -3.5)));
  }

  TEST_CASE("link budget") {
    ScenarioConfig c;
    c.dark_rate_alice = c.dark_rate_bob = 0;
    auto b = rate_budget(c);
    CHECK(b.true_coincidences == Approx(2.5e6 * std::pow(10.0, -5.5)));
    CHECK(b.true_coincidences == Approx(7.9).epsilon(0.01));
  }

  TEST_CASE("gating") {
    GatingSpec g;
    CHECK(g.duty_cycle() == Approx(0.965));
    randomness::SettingSource src{randomness::Predetermined{{0, 1, 1, 0}}, 1e6};
    auto s = randomness::sample_settings(src, 4e-6, 1);
    auto mid = active_setting(s, g, 1.5e-6);
    CHECK(mid.valid);
    CHECK(mid.setting_bit == 1);
    CHECK_FALSE(active_setting(s, g, 2.02e-6).valid);
    CHECK(active_setting(s, g, 2.04e-6).valid);
    GatingSpec open{0, 0, 1e6};
    CHECK(active_setting(s, open, 2.0e-6).valid);
    CHECK_THROWS_AS(active_setting(s, g, 5e-6), Error);
  }

  TEST_CASE("quantum pairs at unit visibility") {
    ScenarioConfig c;
    c.source_visibility = {1, 1};
    c.analyzer_visibility = c.fiber_visibility = 1;
    // Bob's fixed plate at 67.5 deg turns analyzer 112.5 into 22.5 on the state
    c.bob_angles = {112.5, 45};
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      auto [a, b] = measure_pair(c, 0, 0, seed);
      CHECK(a == -b);
    }
  }

  TEST_CASE("local strategies") {
    int best = -10;
    for (const auto& o : LhvStrategy::enumerate_deterministic()) {
      const int s = deterministic_chsh(o);
      best = std::max(best, std::abs(s));
      auto st = LhvStrategy::deterministic({o[0], o[1]}, {o[2], o[3]});
      CHECK(st.chsh() == Approx(s));
    }
    CHECK(best == 2);

    ScenarioConfig c;
    c.mode = HiddenVariableMode::kLocalDeterministic;
    c.strategy = LhvStrategy::deterministic({1, 1}, {1, -1});
    PairModel m(c, false);
    auto [s, se] = sampled_chsh(m, 20000, 4);
    CHECK(s == Approx(2.0));  // deterministic: no spread
    Rng rng(8);
    for (int i = 0; i < 20; ++i) {
      c.strategy = LhvStrategy::random(5, rng);
      CHECK(std::abs(c.strategy.chsh()) <= 2.0 + 1e-9);
      auto [sr, ser] = sampled_chsh(PairModel(c, false), 5000, 100 + i);
      CHECK(std::abs(sr) <= 2.0 + 4 * ser);
    }
    LhvStrategy bad{{0.5, 0.6}, {{0, 0}, {0, 0}}, {{0, 0}, {0, 0}}};
    CHECK_THROWS_AS(bad.validate(), Error);
  }

  TEST_CASE("exploit modes and the causality gate") {
    auto a = config::preset("a").scenario;
    a.mode = HiddenVariableMode::kSettingAwareSource;
    auto [s, se] = sampled_chsh(PairModel(a, false), 2000, 1);
    CHECK(s == Approx(4.0));
    CHECK_NOTHROW(check_exploit_gate(a, scenario_verdict(a)));

    auto d = config::preset("d").scenario;
    d.mode = HiddenVariableMode::kSettingAwareSource;
    d.run_duration = 1.0;
    try {
      run_experiment(d, 1);
      FAIL("expected a causality error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kCausality);
    }
    d.mode = HiddenVariableMode::kSignalingAtSpeed;
    CHECK_THROWS_AS(check_exploit_gate(d, scenario_verdict(d)), Error);
    d.mode = HiddenVariableMode::kLocalDeterministic;
    CHECK_NOTHROW(check_exploit_gate(d, scenario_verdict(d)));
  }

  TEST_CASE("signaling depends on arrival") {
    ScenarioConfig c;
    c.mode = HiddenVariableMode::kSignalingAtSpeed;
    CHECK(sampled_chsh(PairModel(c, true), 100, 1).first == Approx(4.0));
    CHECK(sampled_chsh(PairModel(c, false), 100, 1).first == Approx(2.0));
  }

  TEST_CASE("run basics") {
    auto c = quiet(0.0);
    auto empty = run_experiment(c, 1);
    CHECK(empty.alice.empty());
    CHECK(empty.bob.empty());

    auto r1 = run_experiment(quiet(2.0), 42);
    auto r2 = run_experiment(quiet(2.0), 42);
    CHECK(r1.alice == r2.alice);
    CHECK(r1.bob == r2.bob);
    CHECK(is_time_sorted(r1.alice));
    CHECK(is_time_sorted(r1.bob));
    auto r3 = run_experiment(quiet(2.0), 43);
    CHECK(r3.alice != r1.alice);
    // Alice sees 1% of 2.5 MHz for 2 s
    CHECK(std::abs(static_cast<double>(r1.stats.raw_alice) - 5e4) < 5 * std::sqrt(5e4));
  }

  TEST_CASE("duty cycle of the gating") {
    auto r = run_experiment(quiet(5.0), 9);
    CHECK(std::abs(r.stats.discarded_fraction() - 0.035) < 0.005);
    auto c = quiet(1.0);
    c.gating = {0, 0, 1e6};
    CHECK(run_experiment(c, 9).stats.discarded_fraction() == 0.0);
  }

  TEST_CASE("calibrated dark rate reaches the target visibility") {
    ScenarioConfig c;
    const double dark = calibrate_dark_rate_bob(c, 0.838);
    c.dark_rate_bob = dark;
    CHECK(rate_budget(c).effective_visibility == Approx(0.838));
    CHECK(dark > 0);
    CHECK_THROWS_AS(calibrate_dark_rate_bob(c, 0.97), Error);
  }

  TEST_CASE("coincidence rate follows the link budget") {
    auto c = quiet(600.0);
    c.gating = {0, 0, 1e6};
    auto r = run_experiment(c, 5);
    config::AnalysisConfig opt;
    auto an = pipeline::analyze_streams(r.alice, r.bob, opt);
    const double expect = rate_budget(c).true_coincidences * 600.0;
    CHECK(std::abs(an.coincidences.total / expect - 1.0) < 0.05);
    CHECK(an.offset.offset == Approx(449.4e6).epsilon(1e-5));
  }

  TEST_CASE("ideal limit reaches the Tsirelson bound") {
    ScenarioConfig c;
    c.run_duration = 1.0;
    c.pair_rate = 2e4;
    c.alice_attenuation_db = c.bob_attenuation_db = 0;
    c.dark_rate_alice = c.dark_rate_bob = 0;
    c.source_visibility = {1, 1};
    c.analyzer_visibility = c.fiber_visibility = 1;
    auto r = run_experiment(c, 77);
    auto an = pipeline::analyze_streams(r.alice, r.bob, {});
    auto est = coincidence::estimate(an.coincidences);
    CHECK(an.coincidences.total > 15000);
    CHECK(std::abs(est.s - 2 * std::sqrt(2.0)) < 4 * est.sigma_s);
  }
}
