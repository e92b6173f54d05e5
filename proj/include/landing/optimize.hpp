#pragma once

// Iteration drivers: deterministic and stochastic landing, and retraction-based
// Riemannian baselines. Every driver returns a per-iteration trace.

#include "landing/field.hpp"
#include "landing/problems.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace landing {

struct TraceRecord {
  std::int64_t k = 0;
  double time_s = 0.0;
  double f_val = 0.0;
  double h_norm = 0.0;    // sqrt of the sum of squared block residual norms
  double psi_norm = 0.0;  // ||Psi||; Riemannian gradient norm for the baselines
  double eta = 0.0;       // step taken from this iterate (0 for a final record)
  std::optional<double> safeguard;
  std::optional<double> merit;
  std::optional<double> extra;
  std::vector<double> block_h;  // per-block ||h||
};

enum class RunStatus { budget_exhausted, converged, time_limit, diverged };

std::string to_string(RunStatus status);

struct RunResult {
  std::vector<TraceRecord> trace;
  Iterate x;
  RunStatus status = RunStatus::budget_exhausted;
  std::int64_t iterations = 0;
  /// Stochastic runs: recorded iterates with ||h|| > epsilon.
  std::int64_t violations = 0;
  std::optional<double> merit_beta;
};

struct RunConfig {
  LandingConfig landing;
  std::int64_t max_iters = 1000;
  double max_seconds = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  bool record_merit = false;
  /// Fletcher merit penalty. Nonpositive means "select automatically" (see select_merit_beta).
  double merit_beta = 0.0;
  /// Cap each step at the safeguard. When off, leaving the safe region aborts the run.
  bool safeguard_check = true;
  std::int64_t record_every = 1;
  /// Full-data evaluation cadence of stochastic runs; 0 means once per epoch.
  std::int64_t eval_every = 0;
  double field_tol = 1e-10;

  void validate() const;
};

/// Thrown by the deterministic driver when an iterate leaves the safe region
/// with the safeguard disabled. Carries the trace up to and including that iterate.
class SafeRegionEscapeError : public OutOfSafeRegionError {
 public:
  SafeRegionEscapeError(const std::string& what, std::vector<TraceRecord> trace)
      : OutOfSafeRegionError(what), trace_(std::move(trace)) {}
  const std::vector<TraceRecord>& trace() const { return trace_; }

 private:
  std::vector<TraceRecord> trace_;
};

/// Gaussian blocks of the right shapes, made feasible by a Cholesky-QR retraction.
Iterate initial_point(const Problem& problem, Eigen::Index p, Rng& rng);

/// Combined smoothness constants of the product manifold: the largest C_h and
/// L_N and the smallest lower constant over blocks.
SmoothnessConstants problem_constants(const Problem& problem, double epsilon);

/// Alignment constant of the product manifold: the smallest per-block rho.
double problem_rho(const Problem& problem, const LandingConfig& landing);

/// Sum over blocks of the Fletcher merit, with the objective counted once.
double problem_merit(const Problem& problem, const Iterate& x, const Evaluation& ev, double beta);

/// Largest ||Psi|| over `samples` random safe-region points: fresh feasible
/// points pushed onto random layers with ||h|| <= epsilon.
double estimate_c_psi(const Problem& problem, Eigen::Index p, const LandingConfig& landing,
                      int samples, Rng& rng);

/// Starts from rho / (4 C_h^2 omega) and doubles until the merit decreases on
/// each of the first `probe_steps` landing steps from x0.
double select_merit_beta(const Problem& problem, const Iterate& x0, const RunConfig& cfg,
                         int probe_steps = 10);

RunResult run_landing_deterministic(const Problem& problem, const Iterate& x0,
                                    const RunConfig& cfg);

RunResult run_landing_stochastic(const Problem& problem, StochasticSampler& sampler,
                                 const Iterate& x0, const RunConfig& cfg);

/// Running mean of outer products of sample columns.
class RollingCovariance {
 public:
  explicit RollingCovariance(Eigen::Index n) : sum_(Matrix::Zero(n, n)) {}
  void add(const Matrix& columns);
  std::int64_t count() const { return count_; }
  /// sum / count + shift I. Throws ConfigError before the first sample.
  Matrix mean(double shift = 0.0) const;

 private:
  Matrix sum_;
  std::int64_t count_ = 0;
};

enum class BSource { fixed, rolling_average };

std::string to_string(BSource source);
BSource parse_b_source(std::string_view name);

/// Riemannian gradient descent: X <- Retr(X, -eta grad f) with
/// grad f = G - 2 B X lambda(X). With a sampler the gradient is stochastic.
/// rolling_average needs a sampler and replaces B by the running mean of the
/// covariance chunks seen so far; steps are skipped while that mean is singular.
RunResult run_riemannian_baseline(const Problem& problem, BSource source,
                                  StochasticSampler* sampler, const Iterate& x0,
                                  const RunConfig& cfg, RetractionKind retraction);

}  // namespace landing
