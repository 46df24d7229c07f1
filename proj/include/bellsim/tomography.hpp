#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "bellsim/quantum.hpp"

namespace bellsim::tomography {

using linalg::Mat4;

/// Single-photon projections: H, V, D (+45), A (-45), R = (H - iV)/sqrt2, L = (H + iV)/sqrt2.
enum class Projector { kH, kV, kD, kA, kR, kL };

char to_char(Projector p);
Projector parse_projector(const std::string& text);
/// Basis the projector belongs to: 0 = H/V, 1 = D/A, 2 = R/L.
int basis_of(Projector p);
linalg::CVec<2> state_of(Projector p);
Mat4 joint_projector(Projector alice, Projector bob);

using Setting = std::pair<Projector, Projector>;

struct Measurement {
  Projector alice;
  Projector bob;
  double count = 0.0;
};

/// Counts grouped by basis pair: every basis pair present must have all four
/// outcome combinations, measured over a common exposure.
struct TomographyData {
  std::vector<Measurement> entries;
  double total() const;
};

/// All 36 combinations of the six eigenstates.
std::vector<Setting> measurement_set();

/// Rank of the map from the 16 Pauli coefficients to the outcome probabilities.
int design_rank(const std::vector<Setting>& settings);

/// Poisson counts with mean n_per_setting * Tr[rho (Pa x Pb)].
TomographyData simulate_counts(const quantum::DensityMatrix& rho, double n_per_setting, std::uint64_t seed);
/// Exact expected counts (no noise).
TomographyData expected_counts(const quantum::DensityMatrix& rho, double n_per_setting);

struct LinearEstimate {
  Mat4 rho;  // Hermitian, unit trace, possibly not PSD
  double min_eigenvalue = 0.0;
  bool physical = true;
};

/// Least squares over the Pauli expansion. Throws Error(kInput) for
/// rank-deficient or empty data.
LinearEstimate linear_reconstruct(const TomographyData& data);

struct MleOptions {
  int max_iterations = 100000;
  double tolerance = 1e-9;  // log-likelihood improvement per count
};

struct MleResult {
  quantum::DensityMatrix rho = quantum::maximally_mixed();
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Maximum likelihood over rho = G G^dagger / Tr (G lower triangular),
/// BFGS from the projected linear estimate. Throws Error(kInput) on all-zero
/// or incomplete data; non-convergence is reported in the result.
MleResult mle_reconstruct(const TomographyData& data, const MleOptions& opt = {});

struct Metric {
  double value = 0.0;
  double sigma = 0.0;
  double bias = 0.0;  // bootstrap mean minus value
  double corrected() const { return value - bias; }
  /// Error bar around corrected(): spread and bias added in quadrature.
  double uncertainty() const { return std::sqrt(sigma * sigma + bias * bias); }
};

/// Analyzer angles (degrees) for the fixed-angle CHSH value, and the fixed
/// half-wave plate in Bob's arm through which those angles act.
struct ChshAngles {
  double a1 = 22.5, a2 = 67.5, b1 = 0.0, b2 = 45.0;
  double bob_plate = 67.5;
};

struct StateMetrics {
  double tangle = 0.0;
  double linear_entropy = 0.0;
  double fully_entangled_fraction = 0.0;
  double s_tomo = 0.0;
  double s_opt = 0.0;
};

StateMetrics metrics(const quantum::DensityMatrix& rho, const ChshAngles& angles = {});

struct TomographyReport {
  quantum::DensityMatrix rho = quantum::maximally_mixed();
  Metric tangle, linear_entropy, fully_entangled_fraction, s_tomo, s_opt;
  quantum::OptimalChsh optimal;
  int bootstrap_samples = 0;
  bool converged = true;
};

/// MLE state, its metrics, and standard deviations and bias estimates over
/// n_bootstrap reconstructions from Poisson-resampled counts. S_opt in
/// particular is biased upward when T^T T is nearly degenerate.
TomographyReport report(const TomographyData& data, int n_bootstrap, std::uint64_t seed, const ChshAngles& angles = {});

/// CSV "alice_proj,bob_proj,count"; errors carry the line number.
TomographyData read_counts_csv(const std::filesystem::path& path);
std::string format_counts_csv(const TomographyData& data);
/// 4x4 grid of the real or imaginary part, rows and columns labeled HH..VV.
std::string format_matrix_csv(const Mat4& rho, bool imaginary);
std::string format_report(const TomographyReport& r);

}  // namespace bellsim::tomography
