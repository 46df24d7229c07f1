#include "bellsim/quantum.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "bellsim/error.hpp"

namespace bellsim::quantum {

namespace {

constexpr double kPi = std::numbers::pi;
const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

double deg_to_rad(double d) { return d * kPi / 180.0; }

Mat4 psi_minus_projector() {
  linalg::CVec<4> v{0.0, kInvSqrt2, -kInvSqrt2, 0.0};
  return linalg::outer(v, v);
}

Mat4 magic_basis() {
  const cplx i{0.0, 1.0};
  Mat4 m;
  m(0, 0) = kInvSqrt2;
  m(3, 0) = kInvSqrt2;
  m(0, 1) = i * kInvSqrt2;
  m(3, 1) = -i * kInvSqrt2;
  m(1, 2) = i * kInvSqrt2;
  m(2, 2) = i * kInvSqrt2;
  m(1, 3) = kInvSqrt2;
  m(2, 3) = -kInvSqrt2;
  return m;
}

Mat4 psd_sqrt(const Mat4& m) {
  const auto eig = linalg::eigh(m);
  Mat4 out;
  for (std::size_t k = 0; k < 4; ++k) {
    const double s = std::sqrt(std::max(eig.values[k], 0.0));
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) out(i, j) += s * eig.vectors(i, k) * std::conj(eig.vectors(j, k));
  }
  return out;
}

}  // namespace

DensityMatrix DensityMatrix::from_matrix(const Mat4& m) {
  const double herm = linalg::hermiticity_defect(m);
  if (!(herm <= 1e-10)) {
    std::ostringstream os;
    os << "density matrix not Hermitian (defect " << herm << ")";
    fail(ErrorKind::kInvalidState, os.str());
  }
  const cplx tr = linalg::trace(m);
  if (!(std::abs(tr - 1.0) <= 1e-10)) {
    std::ostringstream os;
    os << "density matrix trace " << tr.real() << " != 1";
    fail(ErrorKind::kInvalidState, os.str());
  }
  const auto eig = linalg::eigh(m);
  if (eig.values[3] < -1e-9) {
    std::ostringstream os;
    os << "density matrix not positive semidefinite (min eigenvalue " << eig.values[3] << ")";
    fail(ErrorKind::kInvalidState, os.str());
  }
  return DensityMatrix(m);
}

double DensityMatrix::purity() const { return linalg::trace_product(m_, m_).real(); }

PolarizerSetting::PolarizerSetting(double degrees) {
  double d = std::fmod(degrees, 180.0);
  if (d < 0.0) d += 180.0;
  if (d >= 180.0) d = 0.0;
  deg_ = d;
}

double PolarizerSetting::radians() const { return deg_to_rad(deg_); }

Bloch bloch_of(PolarizerSetting s) {
  const double two_theta = 2.0 * s.radians();
  return {std::sin(two_theta), 0.0, std::cos(two_theta)};
}

std::optional<PolarizerSetting> linear_setting_of(const Bloch& b, double tol) {
  if (std::abs(b.y) > tol) return std::nullopt;
  return PolarizerSetting(0.5 * std::atan2(b.x, b.z) * 180.0 / kPi);
}

Mat2 pauli(int i) {
  Mat2 m;
  switch (i) {
    case 0: m(0, 0) = 1.0; m(1, 1) = 1.0; break;
    case 1: m(0, 1) = 1.0; m(1, 0) = 1.0; break;
    case 2: m(0, 1) = cplx{0.0, -1.0}; m(1, 0) = cplx{0.0, 1.0}; break;
    case 3: m(0, 0) = 1.0; m(1, 1) = -1.0; break;
    default: fail(ErrorKind::kInput, "pauli: index out of range");
  }
  return m;
}

Mat2 observable(const Bloch& b) { return b.x * pauli(1) + b.y * pauli(2) + b.z * pauli(3); }

Mat2 projector(PolarizerSetting s) { return 0.5 * (pauli(0) + observable(bloch_of(s))); }

Mat2 half_wave_plate(double degrees) {
  const double two_phi = 2.0 * deg_to_rad(degrees);
  Mat2 m;
  m(0, 0) = std::cos(two_phi);
  m(0, 1) = std::sin(two_phi);
  m(1, 0) = std::sin(two_phi);
  m(1, 1) = -std::cos(two_phi);
  return m;
}

Mat4 local_rotation(const Mat2& ua, const Mat2& ub, const Mat4& rho) {
  const Mat4 u = linalg::kron(ua, ub);
  return u * rho * linalg::adjoint(u);
}

DensityMatrix singlet() { return DensityMatrix::from_matrix(psi_minus_projector()); }

DensityMatrix maximally_mixed() { return DensityMatrix::from_matrix(0.25 * Mat4::identity()); }

DensityMatrix werner(double visibility) {
  if (!(visibility >= -1.0 / 3.0 - 1e-12 && visibility <= 1.0 + 1e-12)) {
    std::ostringstream os;
    os << "werner: visibility " << visibility << " outside [-1/3, 1]";
    fail(ErrorKind::kInvalidState, os.str());
  }
  return DensityMatrix::from_matrix(visibility * psi_minus_projector() +
                                    (0.25 * (1.0 - visibility)) * Mat4::identity());
}

std::array<double, 4> outcome_probabilities(const DensityMatrix& rho, PolarizerSetting a, PolarizerSetting b) {
  const Mat2 pa = projector(a);
  const Mat2 pb = projector(b);
  const Mat2 qa = pauli(0) - pa;
  const Mat2 qb = pauli(0) - pb;
  const auto& m = rho.matrix();
  std::array<double, 4> p{
      linalg::trace_product(m, linalg::kron(pa, pb)).real(),
      linalg::trace_product(m, linalg::kron(pa, qb)).real(),
      linalg::trace_product(m, linalg::kron(qa, pb)).real(),
      linalg::trace_product(m, linalg::kron(qa, qb)).real(),
  };
  for (auto& v : p) v = std::max(v, 0.0);  // clip the -1e-16 round-off of exact zeros
  return p;
}

double correlation(const DensityMatrix& rho, const Bloch& a, const Bloch& b) {
  return linalg::trace_product(rho.matrix(), linalg::kron(observable(a), observable(b))).real();
}

double correlation(const DensityMatrix& rho, PolarizerSetting a, PolarizerSetting b) {
  return correlation(rho, bloch_of(a), bloch_of(b));
}

double chsh(const DensityMatrix& rho, const Bloch& a1, const Bloch& a2, const Bloch& b1, const Bloch& b2) {
  return std::abs(correlation(rho, a1, b1) + correlation(rho, a2, b1) + correlation(rho, a1, b2) -
                  correlation(rho, a2, b2));
}

double chsh(const DensityMatrix& rho, PolarizerSetting a1, PolarizerSetting a2, PolarizerSetting b1,
            PolarizerSetting b2) {
  return chsh(rho, bloch_of(a1), bloch_of(a2), bloch_of(b1), bloch_of(b2));
}

Concurrence concurrence(const DensityMatrix& rho) {
  const Mat4 yy = linalg::kron(pauli(2), pauli(2));
  const Mat4 flipped = yy * linalg::conjugate(rho.matrix()) * yy;
  const Mat4 root = psd_sqrt(rho.matrix());
  const auto eig = linalg::eigh(root * flipped * root);
  Concurrence out;
  for (std::size_t k = 0; k < 4; ++k) out.lambdas[k] = std::sqrt(std::max(eig.values[k], 0.0));
  out.concurrence = std::max(0.0, out.lambdas[0] - out.lambdas[1] - out.lambdas[2] - out.lambdas[3]);
  out.tangle = out.concurrence * out.concurrence;
  return out;
}

double tangle(const DensityMatrix& rho) { return concurrence(rho).tangle; }

double linear_entropy(const DensityMatrix& rho) { return (4.0 / 3.0) * (1.0 - rho.purity()); }

double fully_entangled_fraction(const DensityMatrix& rho) {
  const Mat4 m = magic_basis();
  const Mat4 in_magic = linalg::adjoint(m) * rho.matrix() * m;
  Mat4 real_part;
  for (std::size_t i = 0; i < 16; ++i) real_part.a[i] = in_magic.a[i].real();
  return linalg::eigh(real_part).values[0];
}

std::array<std::array<double, 3>, 3> correlation_matrix(const DensityMatrix& rho) {
  std::array<std::array<double, 3>, 3> t{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      t[i][j] = linalg::trace_product(rho.matrix(), linalg::kron(pauli(i + 1), pauli(j + 1))).real();
  return t;
}

OptimalChsh horodecki_optimal_chsh(const DensityMatrix& rho) {
  const auto t = correlation_matrix(rho);
  linalg::Mat3 tt;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += t[k][i] * t[k][j];
      tt(i, j) = s;
    }
  const auto eig = linalg::eigh(tt);

  OptimalChsh out;
  for (int k = 0; k < 3; ++k) out.u[k] = std::max(eig.values[k], 0.0);
  out.s_opt = 2.0 * std::sqrt(out.u[0] + out.u[1]);

  auto column = [&](int k) {
    // eigenvectors of a real symmetric matrix: drop the arbitrary global phase
    std::array<double, 3> v{};
    cplx phase = 1.0;
    for (int r = 0; r < 3; ++r)
      if (std::abs(eig.vectors(r, k)) > 1e-12) {
        phase = std::abs(eig.vectors(r, k)) / eig.vectors(r, k);
        break;
      }
    for (int r = 0; r < 3; ++r) v[r] = (eig.vectors(r, k) * phase).real();
    return v;
  };
  auto apply_t = [&](const std::array<double, 3>& v) {
    std::array<double, 3> out_v{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) out_v[i] += t[i][j] * v[j];
    return out_v;
  };
  auto normalized = [](std::array<double, 3> v, const std::array<double, 3>& fallback) {
    const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (n < 1e-12) return Bloch{fallback[0], fallback[1], fallback[2]};
    return Bloch{v[0] / n, v[1] / n, v[2] / n};
  };

  const auto e1 = column(0);
  const auto e2 = column(1);
  const double theta = std::atan2(std::sqrt(out.u[1]), std::sqrt(out.u[0]));
  const double ct = std::cos(theta);
  const double st = std::sin(theta);
  out.b1 = {ct * e1[0] + st * e2[0], ct * e1[1] + st * e2[1], ct * e1[2] + st * e2[2]};
  out.b2 = {ct * e1[0] - st * e2[0], ct * e1[1] - st * e2[1], ct * e1[2] - st * e2[2]};
  out.a1 = normalized(apply_t(e1), e1);
  out.a2 = normalized(apply_t(e2), e2);

  auto a1 = linear_setting_of(out.a1);
  auto a2 = linear_setting_of(out.a2);
  auto b1 = linear_setting_of(out.b1);
  auto b2 = linear_setting_of(out.b2);
  if (a1 && a2 && b1 && b2) out.linear_angles = std::array<PolarizerSetting, 4>{*a1, *a2, *b1, *b2};
  return out;
}

double visibility_to_S(double visibility) { return visibility * 2.0 * std::numbers::sqrt2; }

double trace_distance(const Mat4& a, const Mat4& b) {
  const auto eig = linalg::eigh(a - b);
  double s = 0.0;
  for (double v : eig.values) s += std::abs(v);
  return 0.5 * s;
}

double fidelity_with_singlet(const Mat4& rho) { return linalg::trace_product(rho, psi_minus_projector()).real(); }

}  // namespace bellsim::quantum
