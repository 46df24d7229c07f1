#include <cmath>
#include <complex>
#include <random>

#include "bellsim/error.hpp"
#include "bellsim/quantum.hpp"
#include "doctest.h"

using namespace bellsim;
using namespace bellsim::quantum;
using doctest::Approx;

namespace {
const double kPi = std::acos(-1.0);
const double kTsirelson = 2.0 * std::sqrt(2.0);

// Independent oracle: amplitude of the singlet on product analyzer states.
double singlet_prob(double a_deg, int sa, double b_deg, int sb) {
  const double a = a_deg * kPi / 180.0 + (sa > 0 ? 0.0 : kPi / 2);
  const double b = b_deg * kPi / 180.0 + (sb > 0 ? 0.0 : kPi / 2);
  // <a|<b| (|HV> - |VH>)/sqrt2 = (cos a sin b - sin a cos b)/sqrt2
  const double amp = std::sin(b - a) / std::sqrt(2.0);
  return amp * amp;
}

Mat2 random_unitary(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  cplx a(n(rng), n(rng)), b(n(rng), n(rng));
  const double norm = std::sqrt(std::norm(a) + std::norm(b));
  a /= norm;
  b /= norm;
  const cplx phase = std::polar(1.0, n(rng));
  Mat2 u;
  u(0, 0) = a;
  u(0, 1) = -std::conj(b) * phase;
  u(1, 0) = b;
  u(1, 1) = std::conj(a) * phase;
  return u;
}

DensityMatrix random_state(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Mat4 g;
  for (auto& v : g.a) v = cplx(n(rng), n(rng));
  Mat4 m = g * linalg::adjoint(g);
  const cplx tr = linalg::trace(m);
  m *= 1.0 / tr;
  return DensityMatrix::from_matrix(m);
}

DensityMatrix product_state(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  linalg::CVec<2> u{cplx(n(rng), n(rng)), cplx(n(rng), n(rng))}, v{cplx(n(rng), n(rng)), cplx(n(rng), n(rng))};
  Mat4 m;
  linalg::CVec<4> psi{u[0] * v[0], u[0] * v[1], u[1] * v[0], u[1] * v[1]};
  double norm = 0;
  for (auto x : psi) norm += std::norm(x);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) m(i, j) = psi[i] * std::conj(psi[j]) / norm;
  return DensityMatrix::from_matrix(m);
}
}  // namespace

TEST_SUITE("quantum") {
  TEST_CASE("singlet basics") {
    auto s = singlet();
    CHECK(std::real(linalg::trace(s.matrix())) == Approx(1.0));
    CHECK(s.purity() == Approx(1.0));
    CHECK(tangle(s) == Approx(1.0));
    CHECK(concurrence(s).concurrence == Approx(1.0));
    for (double th : {0.0, 13.0, 45.0, 90.0, 157.5})
      CHECK(correlation(s, PolarizerSetting(th), PolarizerSetting(th)) == Approx(-1.0));
  }

  TEST_CASE("outcome probabilities against the amplitude oracle") {
    auto s = singlet();
    const int signs[4][2] = {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
    for (double a : {0.0, 22.5, 45.0, 67.5, 101.0})
      for (double b : {0.0, 22.5, 45.0, 67.5, 170.0}) {
        auto p = outcome_probabilities(s, PolarizerSetting(a), PolarizerSetting(b));
        for (int k = 0; k < 4; ++k) CHECK(p[k] == Approx(singlet_prob(a, signs[k][0], b, signs[k][1])));
      }
    auto p = outcome_probabilities(s, PolarizerSetting(0), PolarizerSetting(0));
    CHECK(p[0] == Approx(0.0));
    CHECK(p[1] == Approx(0.5));
    auto mm = outcome_probabilities(maximally_mixed(), PolarizerSetting(12), PolarizerSetting(80));
    for (double v : mm) CHECK(v == Approx(0.25));
    CHECK(correlation(s, PolarizerSetting(0), PolarizerSetting(22.5)) == Approx(-std::cos(kPi / 4)));
    CHECK(correlation(s, PolarizerSetting(45), PolarizerSetting(67.5)) == Approx(-0.7071).epsilon(1e-4));
  }

  TEST_CASE("werner family") {
    CHECK_THROWS_AS(werner(1.1), Error);
    CHECK_THROWS_AS(werner(-0.5), Error);
    CHECK(trace_distance(werner(1.0).matrix(), singlet().matrix()) < 1e-12);
    CHECK(correlation(werner(0.0), PolarizerSetting(10), PolarizerSetting(30)) == Approx(0.0));
    CHECK(correlation(werner(0.91), PolarizerSetting(33), PolarizerSetting(33)) == Approx(-0.91));
    for (double a : {0.0, 30.0})
      for (double b : {22.5, 80.0}) {
        const double e1 = correlation(singlet(), PolarizerSetting(a), PolarizerSetting(b));
        CHECK(correlation(werner(0.6), PolarizerSetting(a), PolarizerSetting(b)) == Approx(0.6 * e1));
      }
    const double v = 0.883;
    auto w = werner(v);
    CHECK(concurrence(w).concurrence == Approx((3 * v - 1) / 2));
    CHECK(tangle(w) == Approx(std::pow((3 * v - 1) / 2, 2)));
    CHECK(tangle(w) == Approx(0.68).epsilon(0.005 / 0.68));
    CHECK(linear_entropy(w) == Approx(4.0 / 3.0 * (1 - (1 + 3 * v * v) / 4)));
    CHECK(linear_entropy(w) == Approx(0.22).epsilon(0.005 / 0.22));
    CHECK(fully_entangled_fraction(w) == Approx((3 * v + 1) / 4));
    CHECK(horodecki_optimal_chsh(w).s_opt == Approx(kTsirelson * v));
  }

  TEST_CASE("chsh values") {
    const PolarizerSetting a1(45), a2(0), b1(22.5), b2(67.5);
    CHECK(chsh(singlet(), a1, a2, b1, b2) == Approx(kTsirelson));
    CHECK(chsh(werner(0.91), a1, a2, b1, b2) == Approx(0.91 * kTsirelson));
    CHECK(std::abs(chsh(werner(0.91), a1, a2, b1, b2) - 2.5735) < 1e-3);
    CHECK(chsh(maximally_mixed(), a1, a2, b1, b2) == Approx(0.0));
    CHECK(visibility_to_S(0.91) == Approx(2.57).epsilon(0.005 / 2.57));
    CHECK(visibility_to_S(0.985 * 0.99 * 0.97 * 0.91) == Approx(2.43).epsilon(0.005 / 2.43));
    CHECK(visibility_to_S(1.0) == Approx(kTsirelson));
  }

  TEST_CASE("mixed and product states") {
    auto mm = maximally_mixed();
    CHECK(linear_entropy(mm) == Approx(1.0));
    CHECK(fully_entangled_fraction(mm) == Approx(0.25));
    CHECK(linear_entropy(singlet()) == Approx(0.0).epsilon(1e-12));
    CHECK(fully_entangled_fraction(singlet()) == Approx(1.0));
    CHECK(horodecki_optimal_chsh(singlet()).s_opt == Approx(kTsirelson));
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
      auto p = product_state(rng);
      CHECK(tangle(p) == Approx(0.0).epsilon(1e-9));
      CHECK(horodecki_optimal_chsh(p).s_opt <= 2.0 + 1e-9);
    }
  }

  TEST_CASE("probabilities stay normalized and linear") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ang(0, 180), u01(0, 1);
    for (int i = 0; i < 300; ++i) {
      auto r1 = random_state(rng), r2 = random_state(rng);
      PolarizerSetting a(ang(rng)), b(ang(rng));
      auto p = outcome_probabilities(r1, a, b);
      double sum = 0;
      for (double v : p) {
        CHECK(v >= -1e-12);
        sum += v;
      }
      CHECK(std::abs(sum - 1.0) < 1e-10);
      const double w = u01(rng);
      auto mix = DensityMatrix::from_matrix(r1.matrix() * w + r2.matrix() * (1 - w));
      CHECK(std::abs(correlation(mix, a, b) - (w * correlation(r1, a, b) + (1 - w) * correlation(r2, a, b))) < 1e-10);
    }
  }

  TEST_CASE("optimal chsh is attained at the returned directions") {
    std::mt19937_64 rng(9);
    for (int i = 0; i < 200; ++i) {
      auto r = random_state(rng);
      auto opt = horodecki_optimal_chsh(r);
      CHECK(std::abs(chsh(r, opt.a1, opt.a2, opt.b1, opt.b2) - opt.s_opt) < 1e-8);
    }
    auto w = werner(0.8);
    auto opt = horodecki_optimal_chsh(w);
    CHECK(std::abs(chsh(w, opt.a1, opt.a2, opt.b1, opt.b2) - opt.s_opt) < 1e-8);
  }

  TEST_CASE("metrics are invariant under local unitaries") {
    std::mt19937_64 rng(21);
    for (int i = 0; i < 100; ++i) {
      auto r = random_state(rng);
      auto rot = DensityMatrix::from_matrix(local_rotation(random_unitary(rng), random_unitary(rng), r.matrix()));
      CHECK(std::abs(tangle(r) - tangle(rot)) < 1e-8);
      CHECK(std::abs(linear_entropy(r) - linear_entropy(rot)) < 1e-8);
      CHECK(std::abs(fully_entangled_fraction(r) - fully_entangled_fraction(rot)) < 1e-8);
      CHECK(std::abs(horodecki_optimal_chsh(r).s_opt - horodecki_optimal_chsh(rot).s_opt) < 1e-8);
    }
  }

  TEST_CASE("werner metrics are monotone in visibility") {
    double prev_t = -1, prev_f = -1, prev_s = -1, prev_l = 2;
    for (double v = 0.0; v <= 1.0; v += 0.01) {
      auto w = werner(v);
      const double t = tangle(w), f = fully_entangled_fraction(w), s = horodecki_optimal_chsh(w).s_opt;
      const double l = linear_entropy(w);
      CHECK(t >= prev_t - 1e-12);
      CHECK(f >= prev_f - 1e-12);
      CHECK(s >= prev_s - 1e-12);
      CHECK(l <= prev_l + 1e-12);
      prev_t = t;
      prev_f = f;
      prev_s = s;
      prev_l = l;
    }
  }

  TEST_CASE("half-wave plate maps theta to 2 phi - theta") {
    auto hwp = half_wave_plate(67.5);
    for (double th : {0.0, 22.5, 45.0, 100.0}) {
      const double r = th * kPi / 180;
      linalg::CVec<2> in{std::cos(r), std::sin(r)};
      const double o = (135.0 - th) * kPi / 180;
      cplx overlap = std::conj(std::cos(o)) * (hwp(0, 0) * in[0] + hwp(0, 1) * in[1]) +
                     std::sin(o) * (hwp(1, 0) * in[0] + hwp(1, 1) * in[1]);
      CHECK(std::abs(overlap) == Approx(1.0));
    }
  }

  TEST_CASE("invalid matrices are rejected") {
    Mat4 m;
    m(0, 0) = 2.0;
    m(1, 1) = -1.0;
    CHECK_THROWS_AS(DensityMatrix::from_matrix(m), Error);
    Mat4 h;
    h(0, 0) = 1.0;
    h(0, 1) = 0.3;
    CHECK_THROWS_AS(DensityMatrix::from_matrix(h), Error);
  }
}
