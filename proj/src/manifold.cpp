#include "landing/manifold.hpp"

#include <cmath>
#include <limits>

namespace landing {

Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = normal(rng);
  return out;
}

namespace {

constexpr double kSymmetryTol = 1e-12;
// Relative floor on eigenvalues of small Gram matrices before they count as singular.
constexpr double kGramFloor = 1e-13;

bool gram_is_singular(const Vector& eigenvalues) {
  const double hi = eigenvalues.maxCoeff();
  const double lo = eigenvalues.minCoeff();
  return !(hi > 0.0) || !(lo > kGramFloor * hi);
}

}  // namespace

SpdMatrix::SpdMatrix(Matrix b) : b_(std::move(b)), eig_(std::make_shared<EigCache>()) {
  require_dims(b_.rows() == b_.cols() && b_.rows() > 0, "constraint matrix must be square");
  const double scale = b_.cwiseAbs().maxCoeff();
  const double asym = (b_ - b_.transpose()).cwiseAbs().maxCoeff();
  if (!std::isfinite(scale) || asym > kSymmetryTol * std::max(scale, 1e-300))
    throw NotSpdError("constraint matrix is not symmetric");
  b_ = sym(b_);
  llt_.compute(b_);
  if (llt_.info() != Eigen::Success) throw NotSpdError("constraint matrix is not positive definite");
  const auto diag = llt_.matrixLLT().diagonal();
  if (!(diag.minCoeff() > 0.0)) throw NotSpdError("constraint matrix is not positive definite");
}

Matrix SpdMatrix::apply(const Matrix& x) const {
  require_dims(x.rows() == b_.rows(), "B * X");
  return b_ * x;
}

Matrix SpdMatrix::solve(const Matrix& rhs) const {
  require_dims(rhs.rows() == b_.rows(), "B^{-1} * X");
  return llt_.solve(rhs);
}

Matrix SpdMatrix::cholesky_factor() const { return llt_.matrixL(); }

const SpdMatrix::EigCache& SpdMatrix::extremes() const {
  std::call_once(eig_->once, [this] {
    Eigen::SelfAdjointEigenSolver<Matrix> es(b_, Eigen::EigenvaluesOnly);
    eig_->lo = es.eigenvalues().minCoeff();
    eig_->hi = es.eigenvalues().maxCoeff();
  });
  return *eig_;
}

double SpdMatrix::beta_max() const { return extremes().hi; }
double SpdMatrix::beta_min() const { return extremes().lo; }

std::string to_string(RetractionKind kind) {
  switch (kind) {
    case RetractionKind::polar:
      return "polar";
    case RetractionKind::svd:
      return "svd";
    case RetractionKind::cholesky_qr:
      return "cholesky_qr";
  }
  return "?";
}

RetractionKind parse_retraction_kind(std::string_view name) {
  if (name == "polar") return RetractionKind::polar;
  if (name == "svd") return RetractionKind::svd;
  if (name == "cholesky_qr") return RetractionKind::cholesky_qr;
  throw ConfigError("unknown retraction kind: " + std::string(name));
}

ConstraintResidual constraint_residual_from_bx(const Matrix& x, const Matrix& bx) {
  require_dims(x.rows() == bx.rows() && x.cols() == bx.cols(), "X vs BX");
  ConstraintResidual out;
  out.h = sym(x.transpose() * bx);
  out.h.diagonal().array() -= 1.0;
  out.norm = out.h.norm();
  return out;
}

ConstraintResidual constraint_residual(const Matrix& x, const SpdMatrix& b) {
  require_dims(x.rows() == b.size(), "X rows vs B");
  return constraint_residual_from_bx(x, b.apply(x));
}

Penalty penalty_and_gradient(const Matrix& x, const SpdMatrix& b) {
  require_dims(x.rows() == b.size(), "X rows vs B");
  const Matrix bx = b.apply(x);
  const auto res = constraint_residual_from_bx(x, bx);
  return {0.5 * res.norm * res.norm, 2.0 * bx * res.h};
}

Matrix retract(const Matrix& x, const Matrix& z, const SpdMatrix& b, RetractionKind kind) {
  require_dims(x.rows() == b.size() && z.rows() == x.rows() && z.cols() == x.cols(),
               "retraction operands");
  const Matrix y = x + z;
  switch (kind) {
    case RetractionKind::polar: {
      const Matrix gram = sym(y.transpose() * b.apply(y));
      Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
      if (es.info() != Eigen::Success || gram_is_singular(es.eigenvalues()))
        throw RetractionError("polar retraction: X + Z is rank deficient");
      const Vector inv_sqrt = es.eigenvalues().array().rsqrt();
      return y * (es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose());
    }
    case RetractionKind::svd: {
      // Y = L^{-T} (U S V^T) with L^T Y = U S V^T; L^{-T} U is B-orthonormal.
      const Matrix l = b.cholesky_factor();
      const Matrix w = l.transpose() * y;
      Eigen::JacobiSVD<Matrix> svd(w, Eigen::ComputeThinU | Eigen::ComputeThinV);
      const Vector& s = svd.singularValues();
      if (!(s.size() > 0) || gram_is_singular(s.array().square().matrix()))
        throw RetractionError("svd retraction: X + Z is rank deficient");
      const Matrix ub = l.transpose().triangularView<Eigen::Upper>().solve(svd.matrixU());
      return ub * svd.matrixV().transpose();
    }
    case RetractionKind::cholesky_qr: {
      const Matrix gram = sym(y.transpose() * b.apply(y));
      Eigen::LLT<Matrix> llt(gram);
      if (llt.info() != Eigen::Success)
        throw RetractionError("cholesky-qr retraction: X + Z is rank deficient");
      const Vector d = llt.matrixLLT().diagonal();
      if (gram_is_singular(d.array().square().matrix()))
        throw RetractionError("cholesky-qr retraction: X + Z is rank deficient");
      // Y R^{-1} with R = L^T.
      const Matrix lower = llt.matrixL();
      return lower.triangularView<Eigen::Lower>().solve(y.transpose()).transpose();
    }
  }
  throw RetractionError("unknown retraction kind");
}

Matrix lagrange_multiplier_from_bx(const Matrix& bx, const Matrix& g) {
  require_dims(bx.rows() == g.rows() && bx.cols() == g.cols(), "BX vs gradient");
  const Matrix s = sym(bx.transpose() * bx);
  const Matrix cross = bx.transpose() * g;
  const Matrix rhs = cross + cross.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  if (es.info() != Eigen::Success || gram_is_singular(es.eigenvalues()))
    throw SingularError("X^T B^2 X is singular; X is outside the safe region");
  const Matrix& q = es.eigenvectors();
  const Vector& d = es.eigenvalues();
  Matrix lam = q.transpose() * rhs * q;
  for (Eigen::Index j = 0; j < lam.cols(); ++j)
    for (Eigen::Index i = 0; i < lam.rows(); ++i) lam(i, j) /= 2.0 * (d(i) + d(j));
  return sym(q * lam * q.transpose());
}

Matrix lagrange_multiplier(const Matrix& x, const Matrix& g, const SpdMatrix& b) {
  require_dims(x.rows() == b.size(), "X rows vs B");
  return lagrange_multiplier_from_bx(b.apply(x), g);
}

Matrix riemannian_gradient(const Matrix& x, const Matrix& g, const SpdMatrix& b) {
  const Matrix bx = b.apply(x);
  return g - 2.0 * bx * lagrange_multiplier_from_bx(bx, g);
}

double fletcher_merit(const Matrix& x, double f_val, const Matrix& g, const SpdMatrix& b,
                      double beta) {
  if (!(beta > 0.0)) throw ConfigError("merit beta must be positive");
  const Matrix bx = b.apply(x);
  const auto res = constraint_residual_from_bx(x, bx);
  const Matrix lam = lagrange_multiplier_from_bx(bx, g);
  return f_val - inner(res.h, lam) + beta * res.norm * res.norm;
}

SmoothnessConstants smoothness_constants(double beta_1, double beta_n, double epsilon) {
  if (!(beta_n > 0.0) || !(beta_1 >= beta_n))
    throw ConfigError("smoothness constants need 0 < beta_n <= beta_1");
  if (!(epsilon >= 0.0) || !(epsilon < 1.0))
    throw ConfigError("safe-region radius must satisfy 0 <= epsilon < 1");
  const double kappa = beta_1 / beta_n;
  SmoothnessConstants c;
  c.c_h = 2.0 * std::sqrt((1.0 + epsilon) * beta_1 * kappa);
  c.c_h_lower = 2.0 * std::sqrt((1.0 - epsilon) * beta_n / kappa);
  c.l_n = 2.0 * beta_1 * (epsilon + 2.0 * (1.0 + epsilon) * kappa);
  c.epsilon = epsilon;
  return c;
}

namespace {

Eigen::LLT<Matrix> gram_factor(const Matrix& x, const Matrix& bx) {
  const Matrix m = sym(x.transpose() * bx);
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success ||
      gram_is_singular(llt.matrixLLT().diagonal().array().square().matrix()))
    throw SingularError("X^T B X is singular");
  return llt;
}

}  // namespace

Matrix tangent_project(const Matrix& x, const Matrix& y, const SpdMatrix& b) {
  require_dims(x.rows() == b.size() && y.rows() == x.rows() && y.cols() == x.cols(),
               "tangent projection operands");
  const Matrix bx = b.apply(x);
  const auto llt = gram_factor(x, bx);
  return y - x * llt.solve(sym(bx.transpose() * y));
}

double canonical_metric(const Matrix& x, const Matrix& xi, const Matrix& zeta,
                        const SpdMatrix& b) {
  require_dims(x.rows() == b.size() && xi.rows() == x.rows() && zeta.rows() == x.rows() &&
                   xi.cols() == x.cols() && zeta.cols() == x.cols(),
               "metric operands");
  const Matrix bx = b.apply(x);
  const auto llt = gram_factor(x, bx);
  Matrix k = b.apply(zeta) - 0.5 * bx * llt.solve(bx.transpose() * zeta);
  // K M^{-1} = (M^{-1} K^T)^T since M is symmetric.
  const Matrix km = llt.solve(k.transpose()).transpose();
  return inner(xi, km);
}

Matrix random_layer_point(const Matrix& feasible_x, double radius, Rng& rng) {
  if (!(radius >= 0.0) || !(radius < 1.0)) throw ConfigError("layer radius must be in [0, 1)");
  const Eigen::Index p = feasible_x.cols();
  Matrix c = sym(gaussian_matrix(p, p, rng));
  const double norm = c.norm();
  c *= (norm > 0.0 ? radius / norm : 0.0);
  Matrix target = Matrix::Identity(p, p) + c;
  Eigen::SelfAdjointEigenSolver<Matrix> es(target);
  const Vector root = es.eigenvalues().array().sqrt();
  const Matrix sqrt_target = es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
  return feasible_x * sqrt_target;
}

}  // namespace landing
