#pragma once

#include <algorithm>
#include <numeric>
#include <sstream>

#include "bellsim/error.hpp"

namespace bellsim::linalg {

namespace detail {

template <std::size_t N>
double off_diagonal_norm(const CMat<N>& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j)
      if (i != j) s += std::norm(m(i, j));
  return std::sqrt(s);
}

}  // namespace detail

template <std::size_t N>
EigenResult<N> eigh(const CMat<N>& input, double tol, int max_sweeps) {
  CMat<N> m = input;
  CMat<N> v = CMat<N>::identity();
  for (const auto& x : m.a) {
    if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) fail(ErrorKind::kNumerical, "eigh: non-finite matrix entry");
  }
  // symmetrize so round-off in the caller cannot break the rotations
  for (std::size_t i = 0; i < N; ++i) {
    m(i, i) = m(i, i).real();
    for (std::size_t j = i + 1; j < N; ++j) {
      const cplx avg = 0.5 * (m(i, j) + std::conj(m(j, i)));
      m(i, j) = avg;
      m(j, i) = std::conj(avg);
    }
  }
  const double threshold = tol * std::max(1.0, frobenius(m));

  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    if (detail::off_diagonal_norm(m) < threshold) break;
    for (std::size_t p = 0; p + 1 < N; ++p) {
      for (std::size_t q = p + 1; q < N; ++q) {
        const cplx b = m(p, q);
        const double g = std::abs(b);
        if (g < 1e-300) continue;
        const cplx phase = b / g;  // e^{i phi}
        const double alpha = m(p, p).real();
        const double beta = m(q, q).real();
        const double tau = (beta - alpha) / (2.0 * g);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        // U = diag(1, e^{-i phi}) * [[c, s], [-s, c]]
        const cplx upp = c;
        const cplx upq = s;
        const cplx uqp = -s * std::conj(phase);
        const cplx uqq = c * std::conj(phase);

        for (std::size_t k = 0; k < N; ++k) {  // M <- M U
          const cplx mkp = m(k, p);
          const cplx mkq = m(k, q);
          m(k, p) = mkp * upp + mkq * uqp;
          m(k, q) = mkp * upq + mkq * uqq;
        }
        for (std::size_t k = 0; k < N; ++k) {  // M <- U^dagger M
          const cplx mpk = m(p, k);
          const cplx mqk = m(q, k);
          m(p, k) = std::conj(upp) * mpk + std::conj(uqp) * mqk;
          m(q, k) = std::conj(upq) * mpk + std::conj(uqq) * mqk;
        }
        for (std::size_t k = 0; k < N; ++k) {  // V <- V U
          const cplx vkp = v(k, p);
          const cplx vkq = v(k, q);
          v(k, p) = vkp * upp + vkq * uqp;
          v(k, q) = vkp * upq + vkq * uqq;
        }
        m(p, q) = 0.0;
        m(q, p) = 0.0;
        m(p, p) = m(p, p).real();
        m(q, q) = m(q, q).real();
      }
    }
  }
  if (detail::off_diagonal_norm(m) >= threshold) {
    std::ostringstream os;
    os << "eigh: no convergence after " << max_sweeps << " sweeps (off-diagonal norm "
       << detail::off_diagonal_norm(m) << ", threshold " << threshold << ")";
    fail(ErrorKind::kNumerical, os.str());
  }

  std::array<std::size_t, N> order{};
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return m(l, l).real() > m(r, r).real(); });

  EigenResult<N> out;
  out.sweeps = sweep;
  for (std::size_t k = 0; k < N; ++k) {
    out.values[k] = m(order[k], order[k]).real();
    for (std::size_t r = 0; r < N; ++r) out.vectors(r, k) = v(r, order[k]);
  }
  return out;
}

}  // namespace bellsim::linalg
