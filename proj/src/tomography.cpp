#include "bellsim/tomography.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "bellsim/error.hpp"
#include "bellsim/parallel.hpp"
#include "bellsim/rng.hpp"

namespace bellsim::tomography {

using linalg::cplx;
using linalg::CVec;

namespace {

constexpr std::array<Projector, 6> kAll{Projector::kH, Projector::kV, Projector::kD,
                                        Projector::kA, Projector::kR, Projector::kL};

CVec<4> product_state(Projector a, Projector b) {
  const auto u = state_of(a);
  const auto v = state_of(b);
  return {u[0] * v[0], u[0] * v[1], u[1] * v[0], u[1] * v[1]};
}

// (1, <sx>, <sy>, <sz>) of a single-photon projector.
std::array<double, 4> pauli_vector(Projector p) {
  const auto s = state_of(p);
  std::array<double, 4> r{};
  for (int i = 0; i < 4; ++i) {
    const auto m = quantum::pauli(i);
    const cplx v = std::conj(s[0]) * (m(0, 0) * s[0] + m(0, 1) * s[1]) + std::conj(s[1]) * (m(1, 0) * s[0] + m(1, 1) * s[1]);
    r[i] = v.real();
  }
  return r;
}

std::array<double, 16> design_row(Projector a, Projector b) {
  const auto ra = pauli_vector(a);
  const auto rb = pauli_vector(b);
  std::array<double, 16> row{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) row[4 * i + j] = 0.25 * ra[i] * rb[j];
  return row;
}

linalg::CMat<16> normal_matrix(const std::vector<std::array<double, 16>>& rows) {
  linalg::CMat<16> m;
  for (const auto& r : rows)
    for (int i = 0; i < 16; ++i)
      for (int j = 0; j < 16; ++j) m(i, j) += r[i] * r[j];
  return m;
}

int rank_of(const linalg::EigenResult<16>& eig) {
  const double top = std::max(eig.values[0], 0.0);
  return static_cast<int>(std::count_if(eig.values.begin(), eig.values.end(),
                                        [&](double v) { return v > 1e-10 * std::max(top, 1e-300); }));
}

struct Group {
  double total = 0.0;
  std::vector<std::size_t> members;
};

// Checks completeness and returns per-entry group totals.
std::vector<double> group_totals(const TomographyData& data) {
  std::map<std::pair<int, int>, Group> groups;
  std::map<std::pair<int, int>, int> seen;
  for (std::size_t k = 0; k < data.entries.size(); ++k) {
    const auto& m = data.entries[k];
    if (!(m.count >= 0.0) || !std::isfinite(m.count)) fail(ErrorKind::kInput, "tomography counts must be finite and >= 0");
    auto& g = groups[{basis_of(m.alice), basis_of(m.bob)}];
    g.total += m.count;
    g.members.push_back(k);
    if (seen[{static_cast<int>(m.alice), static_cast<int>(m.bob)}]++) {
      fail(ErrorKind::kInput, std::string("duplicate tomography setting (") + to_char(m.alice) + "," + to_char(m.bob) + ")");
    }
  }
  std::vector<double> totals(data.entries.size(), 0.0);
  for (const auto& [key, g] : groups) {
    if (g.members.size() != 4) {
      fail(ErrorKind::kInput, "tomography basis pair incomplete: each measured basis pair needs all four outcomes");
    }
    for (auto k : g.members) totals[k] = g.total;
  }
  return totals;
}

Mat4 from_pauli(const std::array<double, 16>& c) {
  Mat4 rho;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      if (c[4 * i + j] == 0.0) continue;
      rho += (0.25 * c[4 * i + j]) * linalg::kron(quantum::pauli(i), quantum::pauli(j));
    }
  return rho;
}

// Lower-triangular G with rho0 = G G^dagger (rho0 positive definite).
Mat4 cholesky(const Mat4& a) {
  Mat4 l;
  for (std::size_t j = 0; j < 4; ++j) {
    double d = a(j, j).real();
    for (std::size_t k = 0; k < j; ++k) d -= std::norm(l(j, k));
    if (!(d > 0.0)) fail(ErrorKind::kNumerical, "cholesky: matrix not positive definite");
    l(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < 4; ++i) {
      cplx s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * std::conj(l(j, k));
      l(i, j) = s / l(j, j).real();
    }
  }
  return l;
}

constexpr std::array<std::pair<int, int>, 6> kLower{{{1, 0}, {2, 0}, {2, 1}, {3, 0}, {3, 1}, {3, 2}}};

using Params = std::array<double, 16>;

Mat4 to_g(const Params& x) {
  Mat4 g;
  for (int i = 0; i < 4; ++i) g(i, i) = x[i];
  for (int k = 0; k < 6; ++k) g(kLower[k].first, kLower[k].second) = cplx(x[4 + 2 * k], x[5 + 2 * k]);
  return g;
}

Params from_g(const Mat4& g) {
  Params x{};
  for (int i = 0; i < 4; ++i) x[i] = g(i, i).real();
  for (int k = 0; k < 6; ++k) {
    const cplx z = g(kLower[k].first, kLower[k].second);
    x[4 + 2 * k] = z.real();
    x[5 + 2 * k] = z.imag();
  }
  return x;
}

struct Likelihood {
  std::vector<CVec<4>> states;
  std::vector<double> counts;
  double total = 0.0;

  // f = -(1/N) sum n log p + (s - 1)^2; returns +inf outside the domain.
  double value(const Params& x, Params* grad) const {
    const Mat4 g = to_g(x);
    double s = 0.0;
    for (const auto& v : g.a) s += std::norm(v);
    if (!(s > 0.0)) return std::numeric_limits<double>::infinity();
    const Mat4 gd = linalg::adjoint(g);
    double f = 0.0;
    Mat4 r;
    for (std::size_t k = 0; k < states.size(); ++k) {
      if (counts[k] == 0.0) continue;
      const auto& psi = states[k];
      double q = 0.0;  // || G^dagger psi ||^2
      for (int i = 0; i < 4; ++i) {
        cplx acc{};
        for (int j = 0; j < 4; ++j) acc += gd(i, j) * psi[j];
        q += std::norm(acc);
      }
      const double p = q / s;
      if (!(p > 0.0)) return std::numeric_limits<double>::infinity();
      f -= counts[k] * std::log(p);
      if (grad) r += (counts[k] / p) * linalg::outer(psi, psi);
    }
    f = f / total + (s - 1.0) * (s - 1.0);
    if (grad) {
      // df/dG* = -(R/N - I) G / s + 2 (s - 1) G
      Mat4 m = r * cplx(1.0 / total) - Mat4::identity();
      const Mat4 d = (m * g) * cplx(-1.0 / s) + g * cplx(2.0 * (s - 1.0));
      for (int i = 0; i < 4; ++i) (*grad)[i] = 2.0 * d(i, i).real();
      for (int k = 0; k < 6; ++k) {
        const cplx z = d(kLower[k].first, kLower[k].second);
        (*grad)[4 + 2 * k] = 2.0 * z.real();
        (*grad)[5 + 2 * k] = 2.0 * z.imag();
      }
    }
    return f;
  }
};

double dot(const Params& a, const Params& b) {
  double s = 0.0;
  for (int i = 0; i < 16; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

char to_char(Projector p) { return "HVDARL"[static_cast<int>(p)]; }

Projector parse_projector(const std::string& text) {
  if (text.size() == 1) {
    const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
    for (auto p : kAll)
      if (to_char(p) == c) return p;
  }
  fail(ErrorKind::kInput, "unknown projector '" + text + "' (expected one of H V D A R L)");
}

int basis_of(Projector p) { return static_cast<int>(p) / 2; }

CVec<2> state_of(Projector p) {
  const double h = 1.0 / std::sqrt(2.0);
  switch (p) {
    case Projector::kH: return {1.0, 0.0};
    case Projector::kV: return {0.0, 1.0};
    case Projector::kD: return {h, h};
    case Projector::kA: return {h, -h};
    case Projector::kR: return {h, cplx(0.0, -h)};
    case Projector::kL: return {h, cplx(0.0, h)};
  }
  return {1.0, 0.0};
}

Mat4 joint_projector(Projector alice, Projector bob) {
  const auto psi = product_state(alice, bob);
  return linalg::outer(psi, psi);
}

double TomographyData::total() const {
  double t = 0.0;
  for (const auto& m : entries) t += m.count;
  return t;
}

std::vector<Setting> measurement_set() {
  std::vector<Setting> out;
  for (auto a : kAll)
    for (auto b : kAll) out.emplace_back(a, b);
  return out;
}

int design_rank(const std::vector<Setting>& settings) {
  std::vector<std::array<double, 16>> rows;
  for (const auto& [a, b] : settings) rows.push_back(design_row(a, b));
  return rank_of(linalg::eigh(normal_matrix(rows)));
}

TomographyData expected_counts(const quantum::DensityMatrix& rho, double n_per_setting) {
  if (!(n_per_setting >= 0.0)) fail(ErrorKind::kInput, "counts per setting must be >= 0");
  TomographyData data;
  for (const auto& [a, b] : measurement_set()) {
    const double p = std::max(0.0, linalg::trace_product(rho.matrix(), joint_projector(a, b)).real());
    data.entries.push_back({a, b, n_per_setting * p});
  }
  return data;
}

TomographyData simulate_counts(const quantum::DensityMatrix& rho, double n_per_setting, std::uint64_t seed) {
  TomographyData data = expected_counts(rho, n_per_setting);
  Rng rng(seed);
  for (auto& m : data.entries) {
    if (m.count > 0.0) m.count = static_cast<double>(std::poisson_distribution<long long>(m.count)(rng));
  }
  return data;
}

LinearEstimate linear_reconstruct(const TomographyData& data) {
  if (data.entries.empty() || !(data.total() > 0.0)) fail(ErrorKind::kInput, "tomography data is empty");
  const auto totals = group_totals(data);
  std::vector<std::array<double, 16>> rows;
  std::vector<double> probs;
  for (std::size_t k = 0; k < data.entries.size(); ++k) {
    if (!(totals[k] > 0.0)) continue;
    rows.push_back(design_row(data.entries[k].alice, data.entries[k].bob));
    probs.push_back(data.entries[k].count / totals[k]);
  }
  const auto eig = linalg::eigh(normal_matrix(rows));
  if (rank_of(eig) < 16) fail(ErrorKind::kInput, "tomography design is rank deficient (not informationally complete)");

  std::array<double, 16> atb{};
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (int i = 0; i < 16; ++i) atb[i] += rows[r][i] * probs[r];
  std::array<double, 16> c{};
  for (int k = 0; k < 16; ++k) {
    double proj = 0.0;
    for (int i = 0; i < 16; ++i) proj += eig.vectors(i, k).real() * atb[i];
    proj /= eig.values[k];
    for (int i = 0; i < 16; ++i) c[i] += eig.vectors(i, k).real() * proj;
  }
  if (!(std::abs(c[0]) > 0.0)) fail(ErrorKind::kNumerical, "linear reconstruction has zero trace");
  for (int i = 15; i >= 0; --i) c[i] /= c[0];

  LinearEstimate est;
  est.rho = from_pauli(c);
  est.min_eigenvalue = linalg::eigh(est.rho).values[3];
  est.physical = est.min_eigenvalue >= -1e-12;
  return est;
}

MleResult mle_reconstruct(const TomographyData& data, const MleOptions& opt) {
  const auto linear = linear_reconstruct(data);  // validates the data

  Likelihood like;
  for (const auto& m : data.entries) {
    like.states.push_back(product_state(m.alice, m.bob));
    like.counts.push_back(m.count);
  }
  like.total = data.total();

  // Start from the linear estimate pushed into the interior of the state space.
  const auto eig = linalg::eigh(linear.rho);
  Mat4 start;
  double tr = 0.0;
  for (int k = 0; k < 4; ++k) {
    const double v = std::max(eig.values[k], 0.0);
    tr += v;
    CVec<4> col;
    for (int i = 0; i < 4; ++i) col[i] = eig.vectors(i, k);
    start += v * linalg::outer(col, col);
  }
  constexpr double kMix = 1e-3;
  start = start * cplx((1.0 - kMix) / tr) + Mat4::identity() * cplx(kMix / 4.0);
  Params x = from_g(cholesky(start));

  Params g{};
  double f = like.value(x, &g);
  std::array<Params, 16> h{};  // inverse Hessian approximation
  auto reset = [&] {
    for (int i = 0; i < 16; ++i) {
      h[i].fill(0.0);
      h[i][i] = 1.0;
    }
  };
  reset();

  MleResult result;
  int quiet = 0;
  for (result.iterations = 1; result.iterations <= opt.max_iterations; ++result.iterations) {
    Params d{};
    for (int i = 0; i < 16; ++i) d[i] = -dot(h[i], g);
    double slope = dot(g, d);
    if (!(slope < 0.0)) {
      reset();
      for (int i = 0; i < 16; ++i) d[i] = -g[i];
      slope = dot(g, d);
    }
    if (slope == 0.0) {
      result.converged = true;
      break;
    }
    double step = 1.0;
    Params xn{}, gn{};
    double fn = f;
    bool accepted = false;
    for (int tries = 0; tries < 80; ++tries, step *= 0.5) {
      for (int i = 0; i < 16; ++i) xn[i] = x[i] + step * d[i];
      fn = like.value(xn, &gn);
      if (fn <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // No descent left at working precision: the optimum is reached.
      result.converged = true;
      break;
    }
    Params sv{}, yv{};
    for (int i = 0; i < 16; ++i) {
      sv[i] = xn[i] - x[i];
      yv[i] = gn[i] - g[i];
    }
    const double improvement = (f - fn) * like.total;
    x = xn;
    g = gn;
    f = fn;
    const double sy = dot(sv, yv);
    if (sy > 1e-300) {
      Params hy{};
      for (int i = 0; i < 16; ++i) hy[i] = dot(h[i], yv);
      const double yhy = dot(yv, hy);
      for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j)
          h[i][j] += ((sy + yhy) * sv[i] * sv[j]) / (sy * sy) - (hy[i] * sv[j] + sv[i] * hy[j]) / sy;
    }
    quiet = improvement < opt.tolerance ? quiet + 1 : 0;
    if (quiet >= 3) {
      result.converged = true;
      break;
    }
  }
  result.iterations = std::min(result.iterations, opt.max_iterations);

  const Mat4 gm = to_g(x);
  Mat4 rho = gm * linalg::adjoint(gm);
  const double s = linalg::trace(rho).real();
  rho = rho * cplx(1.0 / s);
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      const cplx avg = 0.5 * (rho(i, j) + std::conj(rho(j, i)));
      rho(i, j) = avg;
      rho(j, i) = std::conj(avg);
    }
  for (int i = 0; i < 4; ++i) rho(i, i) = rho(i, i).real();
  result.rho = quantum::DensityMatrix::from_matrix(rho);
  result.log_likelihood = -(f - (s - 1.0) * (s - 1.0)) * like.total;
  return result;
}

StateMetrics metrics(const quantum::DensityMatrix& rho, const ChshAngles& angles) {
  StateMetrics m;
  m.tangle = quantum::tangle(rho);
  m.linear_entropy = quantum::linear_entropy(rho);
  m.fully_entangled_fraction = quantum::fully_entangled_fraction(rho);
  const auto analyzer_frame = quantum::DensityMatrix::from_matrix(
      quantum::local_rotation(linalg::Mat2::identity(), quantum::half_wave_plate(angles.bob_plate), rho.matrix()));
  m.s_tomo = quantum::chsh(analyzer_frame, quantum::PolarizerSetting(angles.a1), quantum::PolarizerSetting(angles.a2),
                           quantum::PolarizerSetting(angles.b1), quantum::PolarizerSetting(angles.b2));
  m.s_opt = quantum::horodecki_optimal_chsh(rho).s_opt;
  return m;
}

TomographyReport report(const TomographyData& data, int n_bootstrap, std::uint64_t seed, const ChshAngles& angles) {
  if (n_bootstrap < 0) fail(ErrorKind::kInput, "bootstrap sample count must be >= 0");
  const auto fit = mle_reconstruct(data);
  TomographyReport r;
  r.rho = fit.rho;
  r.converged = fit.converged;
  r.optimal = quantum::horodecki_optimal_chsh(fit.rho);
  const auto central = metrics(fit.rho, angles);
  r.tangle.value = central.tangle;
  r.linear_entropy.value = central.linear_entropy;
  r.fully_entangled_fraction.value = central.fully_entangled_fraction;
  r.s_tomo.value = central.s_tomo;
  r.s_opt.value = central.s_opt;
  r.bootstrap_samples = n_bootstrap;
  if (n_bootstrap < 2) return r;

  std::vector<StateMetrics> samples(static_cast<std::size_t>(n_bootstrap));
  parallel_for(samples.size(), [&](std::size_t i) {
    Rng rng(derive_seed(seed, "bootstrap", i));
    TomographyData resampled = data;
    for (auto& m : resampled.entries) {
      if (m.count > 0.0) m.count = static_cast<double>(std::poisson_distribution<long long>(m.count)(rng));
    }
    samples[i] = metrics(mle_reconstruct(resampled).rho, angles);
  });
  auto summarize = [&](double StateMetrics::*field, Metric& m) {
    double mean = 0.0;
    for (const auto& s : samples) mean += s.*field;
    mean /= static_cast<double>(samples.size());
    double var = 0.0;
    for (const auto& s : samples) var += (s.*field - mean) * (s.*field - mean);
    m.sigma = std::sqrt(var / static_cast<double>(samples.size() - 1));
    m.bias = mean - m.value;
  };
  summarize(&StateMetrics::tangle, r.tangle);
  summarize(&StateMetrics::linear_entropy, r.linear_entropy);
  summarize(&StateMetrics::fully_entangled_fraction, r.fully_entangled_fraction);
  summarize(&StateMetrics::s_tomo, r.s_tomo);
  summarize(&StateMetrics::s_opt, r.s_opt);
  return r;
}

TomographyData read_counts_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kInput, "cannot open counts file " + path.string());
  TomographyData data;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    auto where = [&] { return path.filename().string() + " line " + std::to_string(line_no) + ": "; };
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(trim(cell));
    if (!header_seen) {
      header_seen = true;
      if (cells.size() == 3 && cells[0] == "alice_proj" && cells[1] == "bob_proj" && cells[2] == "count") continue;
      fail(ErrorKind::kInput, where() + "expected header alice_proj,bob_proj,count");
    }
    if (cells.size() != 3) fail(ErrorKind::kInput, where() + "expected 3 fields, found " + std::to_string(cells.size()));
    Measurement m{};
    try {
      m.alice = parse_projector(cells[0]);
      m.bob = parse_projector(cells[1]);
    } catch (const Error& e) {
      fail(ErrorKind::kInput, where() + e.what());
    }
    const char* first = cells[2].data();
    const char* last = first + cells[2].size();
    const auto [ptr, ec] = std::from_chars(first, last, m.count);
    if (ec != std::errc() || ptr != last || !(m.count >= 0.0) || !std::isfinite(m.count)) {
      fail(ErrorKind::kInput, where() + "invalid count '" + cells[2] + "'");
    }
    data.entries.push_back(m);
  }
  if (!header_seen) fail(ErrorKind::kInput, path.filename().string() + ": empty counts file");
  return data;
}

std::string format_counts_csv(const TomographyData& data) {
  std::ostringstream os;
  os << std::setprecision(17) << "alice_proj,bob_proj,count\n";
  for (const auto& m : data.entries) os << to_char(m.alice) << ',' << to_char(m.bob) << ',' << m.count << "\n";
  return os.str();
}

std::string format_matrix_csv(const Mat4& rho, bool imaginary) {
  static const char* labels[4] = {"HH", "HV", "VH", "VV"};
  std::ostringstream os;
  os << std::setprecision(10) << (imaginary ? "im" : "re");
  for (auto l : labels) os << ',' << l;
  os << "\n";
  for (int i = 0; i < 4; ++i) {
    os << labels[i];
    for (int j = 0; j < 4; ++j) os << ',' << (imaginary ? rho(i, j).imag() : rho(i, j).real());
    os << "\n";
  }
  return os.str();
}

std::string format_report(const TomographyReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  auto row = [&](const char* name, const Metric& m) {
    os << "  " << std::left << std::setw(26) << name << std::right << std::setw(8) << m.value;
    if (r.bootstrap_samples >= 2) os << " +- " << m.sigma << "   bias " << std::showpos << m.bias << std::noshowpos;
    os << "\n";
  };
  os << "state metrics";
  if (r.bootstrap_samples >= 2) os << " (bootstrap, " << r.bootstrap_samples << " samples)";
  os << "\n";
  row("tangle", r.tangle);
  row("linear entropy", r.linear_entropy);
  row("fully entangled fraction", r.fully_entangled_fraction);
  row("S at fixed angles", r.s_tomo);
  row("S at optimal angles", r.s_opt);
  auto vec = [&](const char* name, const quantum::Bloch& b) {
    os << "  " << name << " = (" << b.x << ", " << b.y << ", " << b.z << ")\n";
  };
  os << "optimal measurement directions (Bloch vectors)\n";
  vec("a1", r.optimal.a1);
  vec("a2", r.optimal.a2);
  vec("b1", r.optimal.b1);
  vec("b2", r.optimal.b2);
  if (r.optimal.linear_angles) {
    os << "  as linear angles:";
    for (const auto& s : *r.optimal.linear_angles) os << ' ' << s.degrees();
    os << " deg\n";
  }
  if (!r.converged) os << "warning: likelihood maximization hit the iteration cap\n";
  return os.str();
}

}  // namespace bellsim::tomography
