#pragma once

// Geometry of the generalized Stiefel manifold St_B(p, n) = {X : X^T B X = I_p}
// and of the layered manifolds X^T B X = I_p + C foliating its safe region.

#include "landing/common.hpp"

#include <memory>
#include <mutex>
#include <string>
#include <string_view>

namespace landing {

/// Symmetric positive-definite constraint matrix.
///
/// Validated on construction by a Cholesky attempt. Extreme eigenvalues are
/// computed on first request and cached; the cache is shared by copies and
/// is safe under concurrent readers.
class SpdMatrix {
 public:
  explicit SpdMatrix(Matrix b);

  const Matrix& matrix() const { return b_; }
  Eigen::Index size() const { return b_.rows(); }

  Matrix apply(const Matrix& x) const;
  /// B^{-1} rhs using the cached Cholesky factor.
  Matrix solve(const Matrix& rhs) const;
  /// Lower-triangular L with B = L L^T.
  Matrix cholesky_factor() const;

  double beta_max() const;
  double beta_min() const;
  double condition_number() const { return beta_max() / beta_min(); }

 private:
  struct EigCache {
    std::once_flag once;
    double hi = 0.0;
    double lo = 0.0;
  };
  const EigCache& extremes() const;

  Matrix b_;
  Eigen::LLT<Matrix> llt_;
  std::shared_ptr<EigCache> eig_;
};

struct ConstraintResidual {
  Matrix h;  // X^T B X - I_p, exactly symmetric
  double norm = 0.0;
};

struct Penalty {
  double value = 0.0;  // N(X) = 0.5 ||h(X)||_F^2
  Matrix gradient;     // 2 B X h(X)
};

struct SmoothnessConstants {
  double c_h = 0.0;        // upper bound on singular values of Dh(X)
  double c_h_lower = 0.0;  // lower bound on singular values of Dh(X)
  double l_n = 0.0;        // Lipschitz constant of grad N on the safe region
  double epsilon = 0.0;
};

enum class RetractionKind { polar, svd, cholesky_qr };

std::string to_string(RetractionKind kind);
RetractionKind parse_retraction_kind(std::string_view name);

ConstraintResidual constraint_residual(const Matrix& x, const SpdMatrix& b);
/// Same as above when B X is already available.
ConstraintResidual constraint_residual_from_bx(const Matrix& x, const Matrix& bx);

Penalty penalty_and_gradient(const Matrix& x, const SpdMatrix& b);

/// Maps X + Z back onto St_B. Throws RetractionError when X + Z is rank deficient.
Matrix retract(const Matrix& x, const Matrix& z, const SpdMatrix& b, RetractionKind kind);

/// Least-squares multipliers lambda(X): the symmetric solution of
///   2 lambda S + 2 S lambda = X^T B G + G^T B X,  S = X^T B^2 X.
/// Solved in the eigenbasis of S. Throws SingularError when S is numerically singular.
Matrix lagrange_multiplier(const Matrix& x, const Matrix& g, const SpdMatrix& b);
Matrix lagrange_multiplier_from_bx(const Matrix& bx, const Matrix& g);

/// grad f = G - 2 B X lambda(X), the Euclidean projection of G onto the
/// tangent space of the layered manifold through X.
Matrix riemannian_gradient(const Matrix& x, const Matrix& g, const SpdMatrix& b);

/// Fletcher's augmented Lagrangian f - <h, lambda> + beta ||h||^2.
double fletcher_merit(const Matrix& x, double f_val, const Matrix& g, const SpdMatrix& b,
                      double beta);

SmoothnessConstants smoothness_constants(double beta_1, double beta_n, double epsilon);

/// P_X(Y) = Y - X (X^T B X)^{-1} sym(X^T B Y), tangent projection of the
/// canonical-type metric below.
Matrix tangent_project(const Matrix& x, const Matrix& y, const SpdMatrix& b);

/// g_X(xi, zeta) = <xi, (B - 0.5 B X M^{-1} X^T B) zeta M^{-1}>, M = X^T B X.
double canonical_metric(const Matrix& x, const Matrix& xi, const Matrix& zeta,
                        const SpdMatrix& b);

/// Random point with X^T B X = I + C, ||C||_F = radius, starting from a
/// feasible X. Requires radius < 1.
Matrix random_layer_point(const Matrix& feasible_x, double radius, Rng& rng);

}  // namespace landing
