#pragma once

#include <array>
#include <optional>

#include "bellsim/linalg.hpp"

namespace bellsim::quantum {

using linalg::cplx;
using linalg::Mat2;
using linalg::Mat4;

/// Validated two-photon polarization state, basis |HH>, |HV>, |VH>, |VV>.
class DensityMatrix {
 public:
  /// Throws Error(kInvalidState) unless Hermitian (1e-10), unit trace (1e-10)
  /// and PSD (eigenvalues >= -1e-9).
  static DensityMatrix from_matrix(const Mat4& m);

  const Mat4& matrix() const { return m_; }
  cplx operator()(std::size_t r, std::size_t c) const { return m_(r, c); }
  double purity() const;

 private:
  explicit DensityMatrix(const Mat4& m) : m_(m) {}
  Mat4 m_;
};

/// Linear polarization analysis direction in degrees, normalized to [0, 180).
class PolarizerSetting {
 public:
  explicit PolarizerSetting(double degrees);
  double degrees() const { return deg_; }
  double radians() const;

 private:
  double deg_;
};

struct Bloch {
  double x = 0.0, y = 0.0, z = 1.0;
};

/// sigma_z = |H><H| - |V><V|, sigma_x = |H><V| + |V><H|; angle theta maps to
/// (sin 2theta, 0, cos 2theta).
Bloch bloch_of(PolarizerSetting s);
std::optional<PolarizerSetting> linear_setting_of(const Bloch& b, double tol = 1e-9);

Mat2 pauli(int i);  // 0 = identity, 1 = x, 2 = y, 3 = z
Mat2 observable(const Bloch& b);
Mat2 projector(PolarizerSetting s);  // onto cos(theta)|H> + sin(theta)|V>

/// Half-wave plate at `degrees`: maps linear polarization theta -> 2*phi - theta.
Mat2 half_wave_plate(double degrees);
Mat4 local_rotation(const Mat2& ua, const Mat2& ub, const Mat4& rho);

DensityMatrix singlet();
DensityMatrix maximally_mixed();
/// V |psi-><psi-| + (1 - V) I/4. Throws Error(kInvalidState) outside [-1/3, 1].
DensityMatrix werner(double visibility);

/// p(A, B) for A, B in {+1, -1}: index 0 = (+,+), 1 = (+,-), 2 = (-,+), 3 = (-,-).
std::array<double, 4> outcome_probabilities(const DensityMatrix& rho, PolarizerSetting a, PolarizerSetting b);

double correlation(const DensityMatrix& rho, PolarizerSetting a, PolarizerSetting b);
double correlation(const DensityMatrix& rho, const Bloch& a, const Bloch& b);

/// |E(a1,b1) + E(a2,b1) + E(a1,b2) - E(a2,b2)|.
double chsh(const DensityMatrix& rho, PolarizerSetting a1, PolarizerSetting a2, PolarizerSetting b1,
            PolarizerSetting b2);
double chsh(const DensityMatrix& rho, const Bloch& a1, const Bloch& a2, const Bloch& b1, const Bloch& b2);

struct Concurrence {
  double concurrence = 0.0;
  double tangle = 0.0;
  std::array<double, 4> lambdas{};  // descending
};

/// Wootters construction through the Hermitian sqrt(rho) rho~ sqrt(rho).
Concurrence concurrence(const DensityMatrix& rho);
double tangle(const DensityMatrix& rho);
double linear_entropy(const DensityMatrix& rho);
/// Largest eigenvalue of Re(rho) in the magic basis.
double fully_entangled_fraction(const DensityMatrix& rho);

struct OptimalChsh {
  double s_opt = 0.0;
  std::array<double, 3> u{};  // eigenvalues of T^T T, descending
  Bloch a1, a2, b1, b2;       // maximizing measurement directions
  std::optional<std::array<PolarizerSetting, 4>> linear_angles;  // when all four lie in the linear plane
};

/// Correlation matrix T_ij = Tr[rho sigma_i (x) sigma_j], i, j in {x, y, z}.
std::array<std::array<double, 3>, 3> correlation_matrix(const DensityMatrix& rho);
OptimalChsh horodecki_optimal_chsh(const DensityMatrix& rho);

double visibility_to_S(double visibility);

/// Trace distance 0.5 * ||a - b||_1 for Hermitian matrices.
double trace_distance(const Mat4& a, const Mat4& b);
/// Uhlmann fidelity with a pure state |psi><psi| reduces to <psi|rho|psi>.
double fidelity_with_singlet(const Mat4& rho);

}  // namespace bellsim::quantum
