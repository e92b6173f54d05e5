#pragma once

// Independent reference computations for the tests: explicit loops, dense
// n x n intermediates, Kronecker solves and finite differences. Nothing here
// calls the library routine it is used to check.

#include "landing/data.hpp"
#include "landing/field.hpp"
#include "landing/manifold.hpp"
#include "landing/problems.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

using landing::Matrix;
using landing::Rng;
using landing::Vector;

/// X^T B X - I by explicit triple loops.
inline Matrix residual_loops(const Matrix& x, const Matrix& b) {
  const auto n = x.rows();
  const auto p = x.cols();
  Matrix h(p, p);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < n; ++k)
        for (Eigen::Index l = 0; l < n; ++l) s += x(k, i) * b(k, l) * x(l, j);
      h(i, j) = s - (i == j ? 1.0 : 0.0);
    }
  return h;
}

/// Solves 2 L S + 2 S L = R through the p^2 x p^2 Kronecker system.
inline Matrix lyapunov_kron(const Matrix& s, const Matrix& r) {
  const auto p = s.rows();
  const Matrix id = Matrix::Identity(p, p);
  Matrix k(p * p, p * p);
  // vec(L S) = (S^T kron I) vec L, vec(S L) = (I kron S) vec L
  for (Eigen::Index a = 0; a < p; ++a)
    for (Eigen::Index b = 0; b < p; ++b)
      k.block(a * p, b * p, p, p) = 2.0 * s(b, a) * id + 2.0 * id(a, b) * s;
  const Vector rhs = Eigen::Map<const Vector>(r.data(), p * p);
  const Vector sol = k.fullPivLu().solve(rhs);
  return Eigen::Map<const Matrix>(sol.data(), p, p);
}

inline Matrix skew_dense(const Matrix& m) { return 0.5 * (m - m.transpose()); }

/// 2 skew(G X^T B1) B2 X with the n x n matrix formed explicitly.
inline Matrix psi_dense(const Matrix& x, const Matrix& g, const Matrix& b1, const Matrix& b2) {
  const Matrix m = g * x.transpose() * b1;
  return 2.0 * skew_dense(m) * b2 * x;
}

/// 2 skew(B^{-1} G X^T) B X with an explicit inverse.
inline Matrix psi_riemannian_dense(const Matrix& x, const Matrix& g, const Matrix& b) {
  const Matrix m = b.inverse() * g * x.transpose();
  return 2.0 * skew_dense(m) * b * x;
}

inline Matrix stochastic_field_dense(const Matrix& x, const Matrix& g, const Matrix& bz,
                                     const Matrix& bzp, double omega) {
  const Matrix h = x.transpose() * bz * x - Matrix::Identity(x.cols(), x.cols());
  return psi_dense(x, g, bz, bzp) + 2.0 * omega * bzp * x * h;
}

/// Central difference of f at x along v.
inline double directional_fd(const std::function<double(const Matrix&)>& f, const Matrix& x,
                             const Matrix& v, double step = 1e-5) {
  return (f(x + step * v) - f(x - step * v)) / (2.0 * step);
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

inline double rel_err(const Matrix& a, const Matrix& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-300});
  return (a - b).norm() / scale;
}

inline Matrix random_symmetric(Eigen::Index p, Rng& rng) {
  return landing::sym(landing::gaussian_matrix(p, p, rng));
}

/// A B-orthonormal n x p matrix built from a Gaussian one by a Cholesky factor
/// of X^T B X (independent of the library retractions).
inline Matrix b_orthonormal(const Matrix& b, Eigen::Index p, Rng& rng) {
  const Matrix x = landing::gaussian_matrix(b.rows(), p, rng);
  const Matrix m = x.transpose() * b * x;
  const Eigen::LLT<Matrix> llt(m);
  const Matrix l_inv_t = llt.matrixU().solve(Matrix::Identity(p, p));
  return x * l_inv_t;
}

/// Random point with ||X^T B X - I|| <= eps: a feasible point scaled by a
/// random symmetric square root of I + C with ||C|| uniform in [0, eps].
inline Matrix safe_point(const Matrix& b, Eigen::Index p, double eps, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Matrix x = b_orthonormal(b, p, rng);
  return landing::random_layer_point(x, eps * u(rng), rng);
}

/// GEVP instance for the property tests: equidistant A, exponential B.
inline landing::GevpProblem gevp_instance(Eigen::Index n, double kappa, std::uint64_t seed) {
  using landing::SpectrumSpec;
  auto pair = landing::gen_spd_pair({SpectrumSpec::Kind::equidistant, kappa, n},
                                    {SpectrumSpec::Kind::exponential, kappa, n}, seed);
  return landing::GevpProblem(std::move(pair.a), std::move(pair.b));
}

}  // namespace oracle
