// Runs the ten acceptance criteria and prints one PASS/FAIL line per
// criterion with its measured values and wall time. Exit status is the
// number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bellsim/config.hpp"
#include "bellsim/error.hpp"
#include "bellsim/photonsim.hpp"
#include "bellsim/pipeline.hpp"
#include "bellsim/quantum.hpp"
#include "bellsim/spacetime.hpp"
#include "bellsim/tomography.hpp"

using namespace bellsim;

namespace {

constexpr double c = spacetime::kSpeedOfLight;
const double kTsirelson = 2.0 * std::sqrt(2.0);

struct Outcome {
  bool pass = false;
  std::string detail;
};

bool within(double x, double target, double tol) { return std::abs(x - target) <= tol; }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome spacetime_reproduction() {
  auto a = spacetime::SpacetimeEvent::make(spacetime::EventLabel::kMeasurementA, 29.6e-6, 0.0);
  auto b = spacetime::SpacetimeEvent::make(spacetime::EventLabel::kMeasurementB, 479e-6, 143.6e3);
  const double v = spacetime::simultaneity_frame(a, b);
  const double g = spacetime::gamma(v);
  const double contracted = 143.6 / g;
  return {within(v / c, 0.938, 0.001) && within(g, 2.89, 0.01) && within(contracted, 49.7, 0.2),
          fmt("v = %.4fc, gamma = %.3f, separation %.2f km", v / c, g, contracted)};
}

Outcome verdict_matrix() {
  std::string s;
  bool ok = true;
  const bool expect[4][2] = {{false, false}, {false, false}, {true, false}, {true, true}};
  int i = 0;
  for (const auto& name : config::preset_names()) {
    auto v = photonsim::scenario_verdict(config::preset(name).scenario);
    ok = ok && v.locality_closed == expect[i][0] && v.freedom_closed == expect[i][1];
    s += fmt("%s: locality %s freedom %s; ", name.c_str(), v.locality_closed ? "closed" : "open",
             v.freedom_closed ? "closed" : "open");
    ++i;
  }
  return {ok, s};
}

Outcome chsh_statistics() {
  auto cfg = config::preset("d");
  auto sum = pipeline::simulate_and_analyze(cfg, 2017);
  if (!sum.estimate) return {false, "no estimate"};
  const auto& e = *sum.estimate;
  const auto n = static_cast<double>(sum.coincidences());
  const bool ok = within(n, 19917, 600) && e.s >= 2.30 && e.s <= 2.44 && within(e.sigma_s, 0.023, 0.004) &&
                  e.sigma_above_2 >= 12.0;
  return {ok, fmt("%.0f s, N = %.0f, S = %.4f +- %.4f, %.1f sigma above 2", sum.duration, n, e.s, e.sigma_s,
                  e.sigma_above_2)};
}

Outcome link_budget() {
  photonsim::ScenarioConfig s;
  s.run_duration = 600.0;
  s.dark_rate_alice = s.dark_rate_bob = 0.0;
  s.gating = {0.0, 0.0, 1e6};  // count every photon
  auto run = photonsim::run_experiment(s, 55);
  auto an = pipeline::analyze_streams(run.alice, run.bob, {});
  const double rate = static_cast<double>(an.coincidences.total) / s.run_duration;
  return {within(rate, 7.9, 0.5), fmt("%.3f Hz measured, %.3f Hz expected", rate, photonsim::rate_budget(s).true_coincidences)};
}

Outcome visibility_budget() {
  const double s1 = quantum::visibility_to_S(0.985 * 0.99 * 0.97 * 0.91);
  const double s2 = quantum::visibility_to_S(0.91);
  return {within(s1, 2.43, 0.01) && within(s2, 2.57, 0.01), fmt("S = %.4f and %.4f", s1, s2)};
}

Outcome duty_cycle() {
  auto s = config::preset("d").scenario;
  s.run_duration = 60.0;
  auto run = photonsim::run_experiment(s, 97);
  const double f = run.stats.discarded_fraction();
  return {within(f, 0.035, 0.002), fmt("%.4f of %llu photons discarded", f,
                                        static_cast<unsigned long long>(run.stats.raw_alice + run.stats.raw_bob))};
}

Outcome tomography_metrics() {
  auto data = tomography::simulate_counts(quantum::werner(0.883), 1e5, 883);
  auto r = tomography::report(data, 200, 884);
  const bool ok = within(r.tangle.value, 0.68, 0.03) && within(r.linear_entropy.value, 0.22, 0.03) &&
                  within(r.fully_entangled_fraction.value, 0.912, 0.01) && within(r.s_opt.value, 2.50, 0.05);
  return {ok, fmt("T = %.3f+-%.3f, S_L = %.3f+-%.3f, F = %.3f+-%.3f, S_opt = %.3f+-%.3f, S_tomo = %.3f+-%.3f",
                  r.tangle.value, r.tangle.sigma, r.linear_entropy.value, r.linear_entropy.sigma,
                  r.fully_entangled_fraction.value, r.fully_entangled_fraction.sigma, r.s_opt.value, r.s_opt.sigma,
                  r.s_tomo.value, r.s_tomo.sigma)};
}

Outcome lhv_ceiling() {
  int best = -4;
  for (const auto& o : photonsim::LhvStrategy::enumerate_deterministic())
    best = std::max(best, std::abs(photonsim::deterministic_chsh(o)));

  photonsim::ScenarioConfig cfg;
  cfg.mode = photonsim::HiddenVariableMode::kLocalDeterministic;
  Rng rng(8);
  double worst_analytic = 0.0, worst_z = -1e9;
  constexpr int kPairs = 400;
  for (int i = 0; i < 10000; ++i) {
    cfg.strategy = photonsim::LhvStrategy::random(1 + i % 8, rng);
    worst_analytic = std::max(worst_analytic, std::abs(cfg.strategy.chsh()));
    const photonsim::PairModel model(cfg, false);
    double s = 0.0, var = 0.0;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        double sum = 0.0;
        for (int k = 0; k < kPairs; ++k) {
          auto [x, y] = model.measure(a, b, 0.0, rng);
          sum += x * y;
        }
        const double e = sum / kPairs;
        s += (a == 1 && b == 1) ? -e : e;
        var += std::max(1.0 - e * e, 1.0 / kPairs) / kPairs;
      }
    worst_z = std::max(worst_z, (std::abs(s) - 2.0) / std::sqrt(var));
  }

  // the best deterministic strategy through the whole pipeline
  auto d = config::preset("d");
  d.scenario.mode = photonsim::HiddenVariableMode::kLocalDeterministic;
  d.scenario.strategy = photonsim::LhvStrategy::deterministic({1, 1}, {1, -1});
  config::set_duration(d, 600.0);
  auto sum = pipeline::simulate_and_analyze(d, 5);
  const double z = sum.estimate ? (sum.estimate->s - 2.0) / sum.estimate->sigma_s : 1e9;

  const bool ok = best == 2 && worst_analytic <= 2.0 + 1e-9 && worst_z <= 4.0 && z <= 4.0;
  return {ok, fmt("deterministic max %d, random max %.6f, worst sampled z %.2f, pipeline S = %.3f (z %.2f)", best,
                  worst_analytic, worst_z, sum.estimate ? sum.estimate->s : 0.0, z)};
}

quantum::Bloch random_direction(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  double x = n(rng), y = n(rng), z = n(rng);
  const double r = std::sqrt(x * x + y * y + z * z);
  return {x / r, y / r, z / r};
}

quantum::DensityMatrix random_state(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  std::uniform_int_distribution<int> rank(1, 4);
  const int k = rank(rng);
  linalg::Mat4 g;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < k; ++j) g(i, j) = linalg::cplx(n(rng), n(rng));
  linalg::Mat4 m = g * linalg::adjoint(g);
  m *= 1.0 / linalg::trace(m);
  return quantum::DensityMatrix::from_matrix(m);
}

Outcome tsirelson_ceiling() {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ang(0.0, 180.0);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const auto rho = i % 10 == 0 ? quantum::werner(1.0) : random_state(rng);
    double s;
    if (i % 2 == 0) {
      s = quantum::chsh(rho, random_direction(rng), random_direction(rng), random_direction(rng), random_direction(rng));
    } else {
      s = quantum::chsh(rho, quantum::PolarizerSetting(ang(rng)), quantum::PolarizerSetting(ang(rng)),
                        quantum::PolarizerSetting(ang(rng)), quantum::PolarizerSetting(ang(rng)));
    }
    worst = std::max({worst, s, quantum::horodecki_optimal_chsh(rho).s_opt});
  }
  return {worst <= kTsirelson + 1e-9, fmt("max S = %.12f (bound %.12f)", worst, kTsirelson)};
}

Outcome lorentz_invariance() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ut(-2e-3, 2e-3), ux(-500e3, 500e3), uv(-0.99, 0.99), u01(0.0, 1.0);
  int class_flips = 0, verdict_flips = 0, geometries = 0;
  for (int i = 0; i < 10000; ++i) {
    auto p = spacetime::SpacetimeEvent::make(spacetime::EventLabel::kCustom, ut(rng), ux(rng), u01(rng) * 20e-9);
    auto q = spacetime::SpacetimeEvent::make(spacetime::EventLabel::kCustom, ut(rng), ux(rng), u01(rng) * 20e-9);
    if (u01(rng) < 0.2) q.x = p.x + c * (q.t - p.t);  // on the light cone
    const double v = uv(rng) * c;
    class_flips += spacetime::interval_class(p, q).kind !=
                   spacetime::interval_class(spacetime::boost(p, v), spacetime::boost(q, v)).kind;
  }
  for (int i = 0; i < 1000; ++i) {
    spacetime::Geometry g;
    g.alice_electronic_delay = u01(rng) * 200e-6;
    g.bob_electronic_delay = u01(rng) * 1500e-6;
    g.alice_qrng_position = (u01(rng) - 0.5) * 20e3;
    g.bob_qrng_offset = (u01(rng) - 0.5) * 20e3;
    std::vector<spacetime::SpacetimeEvent> ev;
    try {
      ev = spacetime::build_scenario_events(g);
    } catch (const Error&) {
      continue;
    }
    ++geometries;
    const bool stochastic = u01(rng) < 0.8;
    const auto base = spacetime::verdicts(ev, stochastic);
    for (int k = 0; k < 10; ++k) {
      const double v = uv(rng) * c;
      auto moved = ev;
      for (auto& e : moved) e = spacetime::boost(e, v);
      const auto vb = spacetime::verdicts(moved, stochastic);
      verdict_flips += vb.locality_closed != base.locality_closed || vb.freedom_closed != base.freedom_closed;
    }
  }
  return {class_flips == 0 && verdict_flips == 0,
          fmt("10000 pairs: %d class changes; %d geometries x 10 boosts: %d verdict changes", class_flips, geometries,
              verdict_flips)};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "space-time reproduction", 1e-3, spacetime_reproduction},
      {2, "verdict matrix", 1.0, verdict_matrix},
      {3, "CHSH statistics (2400 s)", 60.0, chsh_statistics},
      {4, "link budget", 10.0, link_budget},
      {5, "visibility budget", 1e-3, visibility_budget},
      {6, "duty cycle", 10.0, duty_cycle},
      {7, "tomography", 60.0, tomography_metrics},
      {8, "LHV ceiling", 30.0, lhv_ceiling},
      {9, "Tsirelson ceiling", 30.0, tsirelson_ceiling},
      {10, "Lorentz invariance", 5.0, lorentz_invariance},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = cr.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= cr.budget_s;
    const bool pass = out.pass && in_time;
    failed += !pass;
    std::printf("[%s] %2d %-26s %10.3f ms (budget %g s)%s  %s\n", pass ? "PASS" : "FAIL", cr.id, cr.name, secs * 1e3,
                cr.budget_s, in_time ? "" : " OVER BUDGET", out.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed;
}
