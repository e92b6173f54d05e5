#pragma once

// Objective oracles for the generalized eigenvalue problem, canonical
// correlation analysis and independent component analysis, with their exact
// solutions and minibatch samplers.

#include "landing/batch_stream.hpp"
#include "landing/manifold.hpp"
#include "landing/psd_estimate.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace landing {

struct Evaluation {
  double value = 0.0;
  Iterate gradient;
};

/// Smooth objective over a product of generalized Stiefel manifolds, one
/// constraint matrix per block.
class Problem {
 public:
  virtual ~Problem() = default;
  virtual std::string name() const = 0;
  virtual std::size_t num_blocks() const = 0;
  virtual const SpdMatrix& constraint(std::size_t block) const = 0;
  virtual Evaluation evaluate(const Iterate& x) const = 0;
  /// Problem-specific score recorded next to the objective (Amari distance for ICA).
  virtual std::optional<double> extra_metric(const Iterate&) const { return std::nullopt; }

  Eigen::Index block_rows(std::size_t block) const { return constraint(block).size(); }
};

/// One (G_xi, B_zeta, B_zeta') draw for one block.
struct BlockSample {
  Matrix gradient;
  PsdEstimate b_zeta;
  PsdEstimate b_zeta_prime;
};

/// Source of independent stochastic landing inputs.
class StochasticSampler {
 public:
  virtual ~StochasticSampler() = default;
  /// One draw for every block; nullopt once a finite stream has run out.
  virtual std::optional<std::vector<BlockSample>> sample(const Iterate& x) = 0;
  /// Steps per pass over the data; default cadence of full-data evaluation.
  virtual std::int64_t epoch_length() const = 0;
  /// Next chunk of raw sample columns per block, for the rolling-average
  /// covariance. Data-backed samplers walk the data once in order, then return nullopt.
  virtual std::optional<std::vector<Matrix>> covariance_chunk() = 0;
  /// Multiple of the identity added to the averaged covariance of a block.
  virtual double covariance_shift(std::size_t) const { return 0.0; }
};

/// Degenerate sampler: full gradient and the exact B for both constraint draws.
class FullBatchSampler : public StochasticSampler {
 public:
  explicit FullBatchSampler(const Problem& problem) : problem_(problem) {}
  std::optional<std::vector<BlockSample>> sample(const Iterate& x) override;
  std::int64_t epoch_length() const override { return 1; }
  std::optional<std::vector<Matrix>> covariance_chunk() override;

 private:
  const Problem& problem_;
  bool chunk_done_ = false;
};

// ---------------------------------------------------------------------------
// GEVP: min -1/2 Tr(X^T A X) s.t. X^T B X = I

class GevpProblem : public Problem {
 public:
  GevpProblem(Matrix a, SpdMatrix b);

  std::string name() const override { return "gevp"; }
  std::size_t num_blocks() const override { return 1; }
  const SpdMatrix& constraint(std::size_t) const override { return b_; }
  Evaluation evaluate(const Iterate& x) const override;

  const Matrix& a() const { return a_; }
  const SpdMatrix& b() const { return b_; }

 private:
  Matrix a_;
  SpdMatrix b_;
};

std::pair<double, Matrix> gevp_value_grad(const Matrix& x, const GevpProblem& prob);

struct GevpSolution {
  double value = 0.0;  // -1/2 sum of the p largest generalized eigenvalues
  Matrix x;            // B-orthonormal eigenvectors, largest eigenvalue first
  Vector eigenvalues;  // the p largest, descending
};

GevpSolution gevp_oracle(const GevpProblem& prob, Eigen::Index p);

/// Streaming GEVP: A_xi = A^{1/2} z z^T A^{1/2} / r and B_zeta likewise, with
/// z standard Gaussian, so both estimates are unbiased. Requires A PSD.
class GevpStreamSampler : public StochasticSampler {
 public:
  GevpStreamSampler(const GevpProblem& prob, Eigen::Index batch, std::uint64_t seed,
                    std::int64_t epoch_length = 100);
  std::optional<std::vector<BlockSample>> sample(const Iterate& x) override;
  std::int64_t epoch_length() const override { return epoch_; }
  std::optional<std::vector<Matrix>> covariance_chunk() override;

 private:
  Matrix a_half_;
  Matrix b_half_;
  Eigen::Index batch_;
  std::int64_t epoch_;
  Rng rng_;
};

// ---------------------------------------------------------------------------
// CCA: min -Tr(X^T C12 Y) s.t. X^T C11 X = I, Y^T C22 Y = I

class CcaProblem : public Problem {
 public:
  /// d1, d2: zero-centered views with samples as columns. ridge >= 0 is added to C11 and C22.
  CcaProblem(Matrix d1, Matrix d2, double ridge);

  std::string name() const override { return "cca"; }
  std::size_t num_blocks() const override { return 2; }
  const SpdMatrix& constraint(std::size_t block) const override {
    return block == 0 ? c11_ : c22_;
  }
  Evaluation evaluate(const Iterate& x) const override;

  const Matrix& d1() const { return d1_; }
  const Matrix& d2() const { return d2_; }
  const Matrix& c12() const { return c12_; }
  double ridge() const { return ridge_; }
  Eigen::Index samples() const { return d1_.cols(); }

 private:
  Matrix d1_;
  Matrix d2_;
  double ridge_;
  SpdMatrix c11_;
  SpdMatrix c22_;
  Matrix c12_;
};

/// Default ridge: 1e-3 times the mean diagonal of the unregularized block covariances.
double default_cca_ridge(const Matrix& d1, const Matrix& d2);

struct CcaValueGrad {
  double value = 0.0;
  Matrix grad_x;
  Matrix grad_y;
};

CcaValueGrad cca_value_grad(const Matrix& x, const Matrix& y, const CcaProblem& prob);

struct CcaSolution {
  double value = 0.0;  // -sum of the p largest canonical correlations
  Matrix x;
  Matrix y;
  Vector correlations;
};

/// Whitening + SVD: singular values of C11^{-1/2} C12 C22^{-1/2}.
CcaSolution cca_oracle(const CcaProblem& prob, Eigen::Index p);

/// Minibatch CCA blocks, ridge-free. The cross covariance is D1_xi D2_xi^T / r,
/// kept as the two gathered views.
struct CcaSample {
  Matrix d1_xi;
  Matrix d2_xi;
  PsdEstimate c11_zeta;
  PsdEstimate c22_zeta;
  PsdEstimate c11_zeta_prime;
  PsdEstimate c22_zeta_prime;

  Matrix c12_xi() const {
    return d1_xi * d2_xi.transpose() / static_cast<double>(d1_xi.cols());
  }
};

CcaSample cca_stochastic_sample(const CcaProblem& prob, const BatchTriple& batches);
CcaSample cca_stochastic_sample(const CcaProblem& prob, Eigen::Index batch, Rng& rng);

/// Minibatch sampler for CCA. The ridge enters each B_zeta as a constant
/// shift, so the estimates average to the regularized C11 and C22.
class CcaSampler : public StochasticSampler {
 public:
  CcaSampler(const CcaProblem& prob, Eigen::Index batch, std::uint64_t seed,
             std::int64_t max_steps = 0);
  std::optional<std::vector<BlockSample>> sample(const Iterate& x) override;
  std::int64_t epoch_length() const override;
  std::optional<std::vector<Matrix>> covariance_chunk() override;
  double covariance_shift(std::size_t) const override { return prob_.ridge(); }

 private:
  const CcaProblem& prob_;
  BatchStream stream_;
  Eigen::Index cursor_ = 0;
};

// ---------------------------------------------------------------------------
// ICA: min (1/N) sum log cosh(A X) s.t. X^T (A^T A / N) X = I

class IcaProblem : public Problem {
 public:
  /// data: N x n mixed signals (rows are samples). mixing: optional true W for scoring.
  IcaProblem(Matrix data, std::optional<Matrix> mixing = std::nullopt);

  std::string name() const override { return "ica"; }
  std::size_t num_blocks() const override { return 1; }
  const SpdMatrix& constraint(std::size_t) const override { return b_; }
  Evaluation evaluate(const Iterate& x) const override;
  /// amari_distance(W^T X) when the mixing matrix is known.
  std::optional<double> extra_metric(const Iterate& x) const override;

  const Matrix& data() const { return data_; }
  /// n x N transpose of data(); samples as columns.
  const Matrix& data_t() const { return data_t_; }
  const std::optional<Matrix>& mixing() const { return mixing_; }
  Eigen::Index samples() const { return data_.rows(); }

 private:
  Matrix data_;
  Matrix data_t_;  // n x N copy; samples as columns for cheap gathers
  std::optional<Matrix> mixing_;
  SpdMatrix b_;
};

/// log cosh(x) without overflow: |x| + log((1 + exp(-2|x|)) / 2).
double log_cosh(double x);

std::pair<double, Matrix> ica_value_grad(const Matrix& x, const IcaProblem& prob);

class IcaSampler : public StochasticSampler {
 public:
  IcaSampler(const IcaProblem& prob, Eigen::Index batch, std::uint64_t seed,
             std::int64_t max_steps = 0);
  std::optional<std::vector<BlockSample>> sample(const Iterate& x) override;
  std::int64_t epoch_length() const override;
  std::optional<std::vector<Matrix>> covariance_chunk() override;

 private:
  const IcaProblem& prob_;
  BatchStream stream_;
  Eigen::Index cursor_ = 0;
};

/// Amari index of P: zero iff P is a scaled permutation. Throws on a zero row or column.
double amari_distance(const Matrix& p);

}  // namespace landing
