#include "landing/problems.hpp"

#include <cmath>
#include <limits>

namespace landing {

namespace {

// X^T X / scale filled on both triangles.
Matrix gram(const Matrix& cols, double scale) {
  Matrix out = Matrix::Zero(cols.rows(), cols.rows());
  out.selfadjointView<Eigen::Lower>().rankUpdate(cols, 1.0 / scale);
  out.triangularView<Eigen::StrictlyUpper>() = out.transpose();
  return out;
}

Matrix psd_sqrt(const Matrix& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  if (es.info() != Eigen::Success) throw SingularError(std::string(what) + ": eigensolver failed");
  const double tol = 1e-12 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  if (es.eigenvalues().minCoeff() < -tol)
    throw NotSpdError(std::string(what) + " must be positive semidefinite");
  const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

Matrix spd_inv_sqrt(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  const Vector inv = es.eigenvalues().cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

void check_iterate(const Problem& prob, const Iterate& x) {
  require_dims(x.size() == prob.num_blocks(), prob.name() + ": wrong number of blocks");
  for (std::size_t b = 0; b < x.size(); ++b)
    require_dims(x[b].rows() == prob.block_rows(b), prob.name() + ": block row count");
}

}  // namespace

std::optional<std::vector<BlockSample>> FullBatchSampler::sample(const Iterate& x) {
  Evaluation ev = problem_.evaluate(x);
  std::vector<BlockSample> out;
  for (std::size_t b = 0; b < problem_.num_blocks(); ++b) {
    const Matrix& bm = problem_.constraint(b).matrix();
    out.push_back({std::move(ev.gradient[b]), PsdEstimate::dense(bm), PsdEstimate::dense(bm)});
  }
  return out;
}

std::optional<std::vector<Matrix>> FullBatchSampler::covariance_chunk() {
  if (chunk_done_) return std::nullopt;
  chunk_done_ = true;
  // sqrt(n) L has n columns whose mean outer product is L L^T = B.
  std::vector<Matrix> out;
  for (std::size_t b = 0; b < problem_.num_blocks(); ++b) {
    const auto& spd = problem_.constraint(b);
    out.push_back(std::sqrt(static_cast<double>(spd.size())) * spd.cholesky_factor());
  }
  return out;
}

// ---------------------------------------------------------------------------

GevpProblem::GevpProblem(Matrix a, SpdMatrix b) : a_(std::move(a)), b_(std::move(b)) {
  require_dims(a_.rows() == a_.cols() && a_.rows() == b_.size(), "GEVP: A and B sizes");
  const double scale = std::max(a_.cwiseAbs().maxCoeff(), 1e-300);
  if ((a_ - a_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw ConfigError("GEVP: A must be symmetric");
  a_ = sym(a_);
}

std::pair<double, Matrix> gevp_value_grad(const Matrix& x, const GevpProblem& prob) {
  require_dims(x.rows() == prob.a().rows(), "GEVP: X rows");
  Matrix ax = prob.a() * x;
  const double value = -0.5 * inner(x, ax);
  return {value, -ax};
}

Evaluation GevpProblem::evaluate(const Iterate& x) const {
  check_iterate(*this, x);
  auto [value, grad] = gevp_value_grad(x[0], *this);
  return {value, {std::move(grad)}};
}

GevpSolution gevp_oracle(const GevpProblem& prob, Eigen::Index p) {
  const Eigen::Index n = prob.a().rows();
  if (p < 1 || p > n) throw ConfigError("GEVP oracle: need 1 <= p <= n");
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(prob.a(), prob.b().matrix());
  if (es.info() != Eigen::Success) throw SingularError("generalized eigensolver failed");
  GevpSolution out;
  out.eigenvalues = es.eigenvalues().tail(p).reverse();
  out.x = es.eigenvectors().rightCols(p).rowwise().reverse();
  out.value = -0.5 * out.eigenvalues.sum();
  return out;
}

GevpStreamSampler::GevpStreamSampler(const GevpProblem& prob, Eigen::Index batch,
                                     std::uint64_t seed, std::int64_t epoch_length)
    : a_half_(psd_sqrt(prob.a(), "GEVP stream: A")),
      b_half_(psd_sqrt(prob.b().matrix(), "GEVP stream: B")),
      batch_(batch),
      epoch_(epoch_length),
      rng_(seed) {
  if (batch < 1) throw ConfigError("batch size must be at least 1");
  if (epoch_length < 1) throw ConfigError("epoch length must be at least 1");
}

std::optional<std::vector<BlockSample>> GevpStreamSampler::sample(const Iterate& x) {
  require_dims(x.size() == 1 && x[0].rows() == a_half_.rows(), "GEVP stream: iterate");
  const Eigen::Index n = a_half_.rows();
  const double inv_r = 1.0 / static_cast<double>(batch_);
  const Matrix va = a_half_ * gaussian_matrix(n, batch_, rng_);
  Matrix vb = b_half_ * gaussian_matrix(n, batch_, rng_);
  Matrix vbp = b_half_ * gaussian_matrix(n, batch_, rng_);
  Matrix g = va * (va.transpose() * x[0]);
  g *= -inv_r;
  std::vector<BlockSample> out;
  out.push_back({std::move(g), PsdEstimate::factored(std::move(vb), inv_r),
                 PsdEstimate::factored(std::move(vbp), inv_r)});
  return out;
}

std::optional<std::vector<Matrix>> GevpStreamSampler::covariance_chunk() {
  return std::vector<Matrix>{b_half_ * gaussian_matrix(b_half_.rows(), batch_, rng_)};
}

// ---------------------------------------------------------------------------

CcaProblem::CcaProblem(Matrix d1, Matrix d2, double ridge)
    : d1_(std::move(d1)),
      d2_(std::move(d2)),
      ridge_(ridge),
      c11_([&] {
        require_dims(d1_.cols() == d2_.cols() && d1_.cols() > 0, "CCA: views need equal sample counts");
        if (!(ridge >= 0.0)) throw ConfigError("CCA ridge must be nonnegative");
        Matrix c = gram(d1_, static_cast<double>(d1_.cols()));
        c.diagonal().array() += ridge;
        return SpdMatrix(std::move(c));
      }()),
      c22_([&] {
        Matrix c = gram(d2_, static_cast<double>(d2_.cols()));
        c.diagonal().array() += ridge;
        return SpdMatrix(std::move(c));
      }()),
      c12_(d1_ * d2_.transpose() / static_cast<double>(d1_.cols())) {}

double default_cca_ridge(const Matrix& d1, const Matrix& d2) {
  require_dims(d1.cols() == d2.cols() && d1.cols() > 0, "CCA: views need equal sample counts");
  const double samples = static_cast<double>(d1.cols());
  const double trace = (d1.squaredNorm() + d2.squaredNorm()) / samples;
  return 1e-3 * trace / static_cast<double>(d1.rows() + d2.rows());
}

CcaValueGrad cca_value_grad(const Matrix& x, const Matrix& y, const CcaProblem& prob) {
  require_dims(x.rows() == prob.c12().rows() && y.rows() == prob.c12().cols() &&
                   x.cols() == y.cols(),
               "CCA: X, Y shapes");
  CcaValueGrad out;
  out.grad_x = -(prob.c12() * y);
  out.grad_y = -(prob.c12().transpose() * x);
  out.value = inner(x, out.grad_x);
  return out;
}

Evaluation CcaProblem::evaluate(const Iterate& x) const {
  check_iterate(*this, x);
  auto vg = cca_value_grad(x[0], x[1], *this);
  return {vg.value, {std::move(vg.grad_x), std::move(vg.grad_y)}};
}

CcaSolution cca_oracle(const CcaProblem& prob, Eigen::Index p) {
  const Eigen::Index n1 = prob.c12().rows();
  const Eigen::Index n2 = prob.c12().cols();
  if (p < 1 || p > std::min(n1, n2)) throw ConfigError("CCA oracle: need 1 <= p <= min(n1, n2)");
  const Matrix w1 = spd_inv_sqrt(prob.constraint(0).matrix());
  const Matrix w2 = spd_inv_sqrt(prob.constraint(1).matrix());
  Eigen::BDCSVD<Matrix> svd(w1 * prob.c12() * w2, Eigen::ComputeThinU | Eigen::ComputeThinV);
  CcaSolution out;
  out.correlations = svd.singularValues().head(p);
  out.x = w1 * svd.matrixU().leftCols(p);
  out.y = w2 * svd.matrixV().leftCols(p);
  out.value = -out.correlations.sum();
  return out;
}

CcaSample cca_stochastic_sample(const CcaProblem& prob, const BatchTriple& t) {
  const auto r = [](const IndexBatch& idx) { return 1.0 / static_cast<double>(idx.size()); };
  require_dims(!t.xi.empty() && !t.zeta.empty() && !t.zeta_prime.empty(), "CCA: empty batch");
  CcaSample s;
  s.d1_xi = prob.d1()(Eigen::all, t.xi);
  s.d2_xi = prob.d2()(Eigen::all, t.xi);
  s.c11_zeta = PsdEstimate::factored(prob.d1()(Eigen::all, t.zeta), r(t.zeta));
  s.c22_zeta = PsdEstimate::factored(prob.d2()(Eigen::all, t.zeta), r(t.zeta));
  s.c11_zeta_prime = PsdEstimate::factored(prob.d1()(Eigen::all, t.zeta_prime), r(t.zeta_prime));
  s.c22_zeta_prime = PsdEstimate::factored(prob.d2()(Eigen::all, t.zeta_prime), r(t.zeta_prime));
  return s;
}

CcaSample cca_stochastic_sample(const CcaProblem& prob, Eigen::Index batch, Rng& rng) {
  if (batch < 1) throw ConfigError("batch size must be at least 1");
  if (batch > prob.samples()) throw ConfigError("batch size exceeds the number of samples");
  std::uniform_int_distribution<Eigen::Index> pick(0, prob.samples() - 1);
  const auto draw = [&] {
    IndexBatch idx(static_cast<std::size_t>(batch));
    for (auto& i : idx) i = pick(rng);
    return idx;
  };
  BatchTriple t;
  t.xi = draw();
  t.zeta = draw();
  t.zeta_prime = draw();
  return cca_stochastic_sample(prob, t);
}

CcaSampler::CcaSampler(const CcaProblem& prob, Eigen::Index batch, std::uint64_t seed,
                       std::int64_t max_steps)
    : prob_(prob), stream_(prob.samples(), batch, seed, max_steps) {}

std::optional<std::vector<BlockSample>> CcaSampler::sample(const Iterate& x) {
  check_iterate(prob_, x);
  BatchTriple t;
  try {
    t = stream_.next_triple();
  } catch (const SamplerExhaustedError&) {
    return std::nullopt;
  }
  const double inv_r = 1.0 / static_cast<double>(stream_.batch_size());
  const double ridge = prob_.ridge();
  const Matrix d1_xi = prob_.d1()(Eigen::all, t.xi);
  const Matrix d2_xi = prob_.d2()(Eigen::all, t.xi);
  Matrix gx = d1_xi * (d2_xi.transpose() * x[1]);
  gx *= -inv_r;
  Matrix gy = d2_xi * (d1_xi.transpose() * x[0]);
  gy *= -inv_r;
  std::vector<BlockSample> out;
  out.push_back({std::move(gx),
                 PsdEstimate::factored(prob_.d1()(Eigen::all, t.zeta), inv_r, ridge),
                 PsdEstimate::factored(prob_.d1()(Eigen::all, t.zeta_prime), inv_r, ridge)});
  out.push_back({std::move(gy),
                 PsdEstimate::factored(prob_.d2()(Eigen::all, t.zeta), inv_r, ridge),
                 PsdEstimate::factored(prob_.d2()(Eigen::all, t.zeta_prime), inv_r, ridge)});
  return out;
}

std::int64_t CcaSampler::epoch_length() const {
  const auto r = stream_.batch_size();
  return static_cast<std::int64_t>((prob_.samples() + r - 1) / r);
}

std::optional<std::vector<Matrix>> CcaSampler::covariance_chunk() {
  if (cursor_ >= prob_.samples()) return std::nullopt;
  const Eigen::Index len = std::min(stream_.batch_size(), prob_.samples() - cursor_);
  std::vector<Matrix> out{prob_.d1().middleCols(cursor_, len), prob_.d2().middleCols(cursor_, len)};
  cursor_ += len;
  return out;
}

// ---------------------------------------------------------------------------

IcaProblem::IcaProblem(Matrix data, std::optional<Matrix> mixing)
    : data_(std::move(data)),
      data_t_(data_.transpose()),
      mixing_(std::move(mixing)),
      b_([&] {
        if (data_.rows() < data_.cols() || data_.cols() < 1)
          throw ConfigError("ICA: need at least as many samples as dimensions");
        return SpdMatrix(gram(data_t_, static_cast<double>(data_.rows())));
      }()) {
  if (mixing_)
    require_dims(mixing_->rows() == data_.cols() && mixing_->cols() == data_.cols(),
                 "ICA: mixing matrix shape");
}

double log_cosh(double x) {
  const double a = std::abs(x);
  return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
}

std::pair<double, Matrix> ica_value_grad(const Matrix& x, const IcaProblem& prob) {
  require_dims(x.rows() == prob.data().cols(), "ICA: X rows");
  const Matrix ax = prob.data() * x;
  const double inv_n = 1.0 / static_cast<double>(prob.samples());
  const double value = ax.unaryExpr([](double v) { return log_cosh(v); }).sum() * inv_n;
  Matrix grad = prob.data_t() * ax.array().tanh().matrix();
  grad *= inv_n;
  return {value, std::move(grad)};
}

Evaluation IcaProblem::evaluate(const Iterate& x) const {
  check_iterate(*this, x);
  auto [value, grad] = ica_value_grad(x[0], *this);
  return {value, {std::move(grad)}};
}

std::optional<double> IcaProblem::extra_metric(const Iterate& x) const {
  if (!mixing_ || x.size() != 1 || x[0].cols() != mixing_->cols()) return std::nullopt;
  if (!x[0].allFinite()) return std::numeric_limits<double>::quiet_NaN();
  return amari_distance(mixing_->transpose() * x[0]);
}

IcaSampler::IcaSampler(const IcaProblem& prob, Eigen::Index batch, std::uint64_t seed,
                       std::int64_t max_steps)
    : prob_(prob), stream_(prob.samples(), batch, seed, max_steps) {}

std::optional<std::vector<BlockSample>> IcaSampler::sample(const Iterate& x) {
  check_iterate(prob_, x);
  BatchTriple t;
  try {
    t = stream_.next_triple();
  } catch (const SamplerExhaustedError&) {
    return std::nullopt;
  }
  const double inv_r = 1.0 / static_cast<double>(stream_.batch_size());
  const Matrix a_xi = prob_.data_t()(Eigen::all, t.xi);
  Matrix g = a_xi * (a_xi.transpose() * x[0]).array().tanh().matrix();
  g *= inv_r;
  std::vector<BlockSample> out;
  out.push_back({std::move(g), PsdEstimate::factored(prob_.data_t()(Eigen::all, t.zeta), inv_r),
                 PsdEstimate::factored(prob_.data_t()(Eigen::all, t.zeta_prime), inv_r)});
  return out;
}

std::int64_t IcaSampler::epoch_length() const {
  const auto r = stream_.batch_size();
  return static_cast<std::int64_t>((prob_.samples() + r - 1) / r);
}

std::optional<std::vector<Matrix>> IcaSampler::covariance_chunk() {
  if (cursor_ >= prob_.samples()) return std::nullopt;
  const Eigen::Index len = std::min(stream_.batch_size(), prob_.samples() - cursor_);
  std::vector<Matrix> out{prob_.data_t().middleCols(cursor_, len)};
  cursor_ += len;
  return out;
}

double amari_distance(const Matrix& p) {
  require_dims(p.rows() == p.cols() && p.rows() > 0, "Amari distance needs a square matrix");
  const Matrix q = p.cwiseAbs();
  const Vector row_max = q.rowwise().maxCoeff();
  const Vector col_max = q.colwise().maxCoeff().transpose();
  if (!(row_max.minCoeff() > 0.0) || !(col_max.minCoeff() > 0.0))
    throw SingularError("Amari distance undefined for a zero row or column");
  const double rows = (q.array().colwise() / row_max.array()).rowwise().sum().sum() - q.rows();
  const double cols = (q.array().rowwise() / col_max.transpose().array()).colwise().sum().sum() - q.cols();
  return (rows + cols) / (2.0 * static_cast<double>(q.rows()));
}

}  // namespace landing
