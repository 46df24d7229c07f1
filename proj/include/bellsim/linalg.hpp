#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>

namespace bellsim::linalg {

using cplx = std::complex<double>;

/// Small dense complex matrix, row-major, fixed size.
template <std::size_t N>
struct CMat {
  std::array<cplx, N * N> a{};

  static constexpr std::size_t size() { return N; }

  cplx& operator()(std::size_t r, std::size_t c) { return a[r * N + c]; }
  const cplx& operator()(std::size_t r, std::size_t c) const { return a[r * N + c]; }

  static CMat identity() {
    CMat m;
    for (std::size_t i = 0; i < N; ++i) m(i, i) = 1.0;
    return m;
  }

  CMat& operator+=(const CMat& o) {
    for (std::size_t i = 0; i < N * N; ++i) a[i] += o.a[i];
    return *this;
  }
  CMat& operator-=(const CMat& o) {
    for (std::size_t i = 0; i < N * N; ++i) a[i] -= o.a[i];
    return *this;
  }
  CMat& operator*=(cplx s) {
    for (auto& v : a) v *= s;
    return *this;
  }
  friend CMat operator+(CMat l, const CMat& r) { return l += r; }
  friend CMat operator-(CMat l, const CMat& r) { return l -= r; }
  friend CMat operator*(CMat l, cplx s) { return l *= s; }
  friend CMat operator*(cplx s, CMat r) { return r *= s; }

  friend CMat operator*(const CMat& l, const CMat& r) {
    CMat out;
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t k = 0; k < N; ++k) {
        const cplx lik = l(i, k);
        if (lik == cplx{}) continue;
        for (std::size_t j = 0; j < N; ++j) out(i, j) += lik * r(k, j);
      }
    return out;
  }
};

template <std::size_t N>
using CVec = std::array<cplx, N>;

using Mat2 = CMat<2>;
using Mat3 = CMat<3>;
using Mat4 = CMat<4>;

template <std::size_t N>
CMat<N> adjoint(const CMat<N>& m) {
  CMat<N> out;
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j) out(i, j) = std::conj(m(j, i));
  return out;
}

template <std::size_t N>
CMat<N> conjugate(const CMat<N>& m) {
  CMat<N> out;
  for (std::size_t i = 0; i < N * N; ++i) out.a[i] = std::conj(m.a[i]);
  return out;
}

template <std::size_t N>
cplx trace(const CMat<N>& m) {
  cplx t{};
  for (std::size_t i = 0; i < N; ++i) t += m(i, i);
  return t;
}

/// Tr(A B) without forming the product.
template <std::size_t N>
cplx trace_product(const CMat<N>& l, const CMat<N>& r) {
  cplx t{};
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t k = 0; k < N; ++k) t += l(i, k) * r(k, i);
  return t;
}

template <std::size_t N>
double frobenius(const CMat<N>& m) {
  double s = 0.0;
  for (const auto& v : m.a) s += std::norm(v);
  return std::sqrt(s);
}

template <std::size_t N>
double hermiticity_defect(const CMat<N>& m) {
  double worst = 0.0;
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = i; j < N; ++j) worst = std::max(worst, std::abs(m(i, j) - std::conj(m(j, i))));
  return worst;
}

inline Mat4 kron(const Mat2& l, const Mat2& r) {
  Mat4 out;
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t m = 0; m < 2; ++m) out(2 * i + k, 2 * j + m) = l(i, j) * r(k, m);
  return out;
}

template <std::size_t N>
CMat<N> outer(const CVec<N>& u, const CVec<N>& v) {
  CMat<N> out;
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j) out(i, j) = u[i] * std::conj(v[j]);
  return out;
}

template <std::size_t N>
struct EigenResult {
  std::array<double, N> values{};  // descending
  CMat<N> vectors;                  // column k is the eigenvector of values[k]
  int sweeps = 0;
};

/// Cyclic Jacobi diagonalization of a Hermitian matrix.
///
/// Each rotation first removes the phase of the pivot element with a diagonal
/// unitary and then applies a real Givens rotation, so the accumulated
/// transform stays unitary. Stops once the off-diagonal Frobenius norm drops
/// below `tol * max(1, ||A||_F)`. Throws Error(kNumerical) if `max_sweeps` is
/// exhausted or the input is not finite.
template <std::size_t N>
EigenResult<N> eigh(const CMat<N>& input, double tol = 1e-12, int max_sweeps = 100);

}  // namespace bellsim::linalg

#include "bellsim/linalg_impl.hpp"
