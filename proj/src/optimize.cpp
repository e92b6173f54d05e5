#include "landing/optimize.hpp"

#include <chrono>
#include <cmath>

namespace landing {

std::string to_string(RunStatus status) {
  switch (status) {
    case RunStatus::budget_exhausted:
      return "budget_exhausted";
    case RunStatus::converged:
      return "converged";
    case RunStatus::time_limit:
      return "time_limit";
    case RunStatus::diverged:
      return "diverged";
  }
  return "?";
}

std::string to_string(BSource source) {
  return source == BSource::fixed ? "fixed" : "rolling_average";
}

BSource parse_b_source(std::string_view name) {
  if (name == "fixed") return BSource::fixed;
  if (name == "rolling_average") return BSource::rolling_average;
  throw ConfigError("unknown B source: " + std::string(name));
}

void RunConfig::validate() const {
  landing.validate();
  if (max_iters < 0) throw ConfigError("max_iters must be nonnegative");
  if (!(max_seconds > 0.0)) throw ConfigError("max_seconds must be positive");
  if (max_iters == std::numeric_limits<std::int64_t>::max() && !std::isfinite(max_seconds))
    throw ConfigError("at least one of max_iters and max_seconds must be finite");
  if (record_every < 1) throw ConfigError("record_every must be at least 1");
  if (eval_every < 0) throw ConfigError("eval_every must be nonnegative");
  if (!(field_tol >= 0.0)) throw ConfigError("field_tol must be nonnegative");
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void check_shapes(const Problem& problem, const Iterate& x) {
  require_dims(x.size() == problem.num_blocks(), "iterate block count");
  for (std::size_t b = 0; b < x.size(); ++b) {
    require_dims(x[b].rows() == problem.block_rows(b), "iterate block rows");
    require_dims(x[b].cols() == x[0].cols() && x[b].cols() >= 1 && x[b].cols() <= x[b].rows(),
                 "iterate block columns");
  }
}

struct Snapshot {
  std::vector<LandingField> fields;
  std::vector<double> block_h;
  double h_norm = 0.0;
  double psi_norm = 0.0;
  double normal_norm = 0.0;
  double field_norm = 0.0;
};

Snapshot landing_snapshot(const Problem& problem, const Iterate& x, const Evaluation& ev,
                          const LandingConfig& landing) {
  Snapshot s;
  double h2 = 0.0, psi2 = 0.0, n2 = 0.0, f2 = 0.0;
  for (std::size_t b = 0; b < x.size(); ++b) {
    s.fields.push_back(
        landing_field(x[b], ev.gradient[b], problem.constraint(b), landing.omega, landing.variant));
    const auto& f = s.fields.back();
    s.block_h.push_back(f.residual.norm);
    h2 += f.residual.norm * f.residual.norm;
    psi2 += f.psi_norm * f.psi_norm;
    n2 += f.normal_norm * f.normal_norm;
    f2 += f.field_norm * f.field_norm;
  }
  s.h_norm = std::sqrt(h2);
  s.psi_norm = std::sqrt(psi2);
  s.normal_norm = std::sqrt(n2);
  s.field_norm = std::sqrt(f2);
  return s;
}

std::vector<double> block_residuals(const Problem& problem, const Iterate& x, double& total) {
  std::vector<double> out;
  double h2 = 0.0;
  for (std::size_t b = 0; b < x.size(); ++b) {
    out.push_back(constraint_residual(x[b], problem.constraint(b)).norm);
    h2 += out.back() * out.back();
  }
  total = std::sqrt(h2);
  return out;
}

/// Makes x feasible when it starts outside the safe region.
void enter_safe_region(const Problem& problem, Iterate& x, double epsilon) {
  double h = 0.0;
  block_residuals(problem, x, h);
  if (h <= epsilon) return;
  for (std::size_t b = 0; b < x.size(); ++b)
    x[b] = retract(x[b], Matrix::Zero(x[b].rows(), x[b].cols()), problem.constraint(b),
                   RetractionKind::cholesky_qr);
}

/// Safeguard for the current snapshot, tolerating roundoff right at the boundary.
std::optional<double> snapshot_safeguard(const Snapshot& s, const SmoothnessConstants& c,
                                         const LandingConfig& landing) {
  double h = s.h_norm;
  if (h > landing.epsilon && h <= landing.epsilon * (1.0 + 1e-12)) h = landing.epsilon;
  return step_size_safeguard(s.normal_norm, s.field_norm, h, c.l_n, landing.omega,
                             landing.epsilon);
}

/// Step length for iterate k of a deterministic run.
double deterministic_eta(std::int64_t k, const std::optional<double>& safeguard,
                         const RunConfig& cfg) {
  double eta = cfg.landing.step.at(k);
  if (cfg.safeguard_check && safeguard) eta = std::min(eta, *safeguard);
  return eta;
}

bool finite_state(double f, double h) { return std::isfinite(f) && std::isfinite(h); }

}  // namespace

Iterate initial_point(const Problem& problem, Eigen::Index p, Rng& rng) {
  Iterate x;
  for (std::size_t b = 0; b < problem.num_blocks(); ++b) {
    const Eigen::Index n = problem.block_rows(b);
    if (p < 1 || p > n) throw ConfigError("need 1 <= p <= n for every block");
    const Matrix g = gaussian_matrix(n, p, rng);
    x.push_back(retract(g, Matrix::Zero(n, p), problem.constraint(b), RetractionKind::cholesky_qr));
  }
  return x;
}

SmoothnessConstants problem_constants(const Problem& problem, double epsilon) {
  SmoothnessConstants out;
  for (std::size_t b = 0; b < problem.num_blocks(); ++b) {
    const auto& spd = problem.constraint(b);
    const auto c = smoothness_constants(spd.beta_max(), spd.beta_min(), epsilon);
    if (b == 0) {
      out = c;
    } else {
      out.c_h = std::max(out.c_h, c.c_h);
      out.c_h_lower = std::min(out.c_h_lower, c.c_h_lower);
      out.l_n = std::max(out.l_n, c.l_n);
    }
  }
  return out;
}

double problem_rho(const Problem& problem, const LandingConfig& landing) {
  double rho = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < problem.num_blocks(); ++b) {
    const auto& spd = problem.constraint(b);
    rho = std::min(rho, relative_ascent_rho(landing.variant, spd.beta_max(), spd.beta_min(),
                                            landing.epsilon));
  }
  return rho;
}

double problem_merit(const Problem& problem, const Iterate& x, const Evaluation& ev, double beta) {
  double merit = ev.value;
  for (std::size_t b = 0; b < x.size(); ++b)
    merit += fletcher_merit(x[b], 0.0, ev.gradient[b], problem.constraint(b), beta);
  return merit;
}

double estimate_c_psi(const Problem& problem, Eigen::Index p, const LandingConfig& landing,
                      int samples, Rng& rng) {
  if (samples < 1) throw ConfigError("need at least one sample to estimate C_psi");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double per_block = landing.epsilon / std::sqrt(static_cast<double>(problem.num_blocks()));
  double best = 0.0;
  for (int s = 0; s < samples; ++s) {
    Iterate x = initial_point(problem, p, rng);
    for (auto& block : x) block = random_layer_point(block, per_block * unit(rng), rng);
    const Evaluation ev = problem.evaluate(x);
    double psi2 = 0.0;
    for (std::size_t b = 0; b < x.size(); ++b)
      psi2 += relative_ascent(x[b], ev.gradient[b], problem.constraint(b), landing.variant)
                  .squaredNorm();
    best = std::max(best, std::sqrt(psi2));
  }
  return best;
}

double select_merit_beta(const Problem& problem, const Iterate& x0, const RunConfig& cfg,
                         int probe_steps) {
  cfg.validate();
  check_shapes(problem, x0);
  const auto consts = problem_constants(problem, cfg.landing.epsilon);
  Iterate x = x0;
  enter_safe_region(problem, x, cfg.landing.epsilon);

  // merit_k(beta) = a_k + beta c_k along a beta-independent trajectory.
  std::vector<double> a, c;
  for (int k = 0; k <= probe_steps; ++k) {
    const Evaluation ev = problem.evaluate(x);
    double lin = ev.value, quad = 0.0;
    for (std::size_t b = 0; b < x.size(); ++b) {
      const auto& spd = problem.constraint(b);
      const Matrix bx = spd.apply(x[b]);
      const auto res = constraint_residual_from_bx(x[b], bx);
      lin -= inner(res.h, lagrange_multiplier_from_bx(bx, ev.gradient[b]));
      quad += res.norm * res.norm;
    }
    a.push_back(lin);
    c.push_back(quad);
    if (k == probe_steps) break;
    const Snapshot s = landing_snapshot(problem, x, ev, cfg.landing);
    if (s.field_norm <= cfg.field_tol) break;
    const double eta = deterministic_eta(k, snapshot_safeguard(s, consts, cfg.landing), cfg);
    for (std::size_t b = 0; b < x.size(); ++b) x[b].noalias() -= eta * s.fields[b].field;
  }

  double beta = problem_rho(problem, cfg.landing) /
                (4.0 * consts.c_h * consts.c_h * cfg.landing.omega);
  for (int attempt = 0; attempt < 200; ++attempt, beta *= 2.0) {
    bool descent = true;
    for (std::size_t k = 0; k + 1 < a.size() && descent; ++k)
      descent = (a[k + 1] + beta * c[k + 1]) <= (a[k] + beta * c[k]) + 1e-12;
    if (descent) return beta;
  }
  throw ConfigError("no merit penalty beta gives descent on the probe iterates");
}

RunResult run_landing_deterministic(const Problem& problem, const Iterate& x0,
                                    const RunConfig& cfg) {
  cfg.validate();
  check_shapes(problem, x0);
  const auto& landing = cfg.landing;
  const auto consts = problem_constants(problem, landing.epsilon);

  RunResult out;
  out.x = x0;
  Iterate& x = out.x;
  enter_safe_region(problem, x, landing.epsilon);
  std::optional<double> beta;
  if (cfg.record_merit)
    beta = cfg.merit_beta > 0.0 ? cfg.merit_beta : select_merit_beta(problem, x, cfg);
  out.merit_beta = beta;

  const auto start = Clock::now();
  for (std::int64_t k = 0;; ++k) {
    const Evaluation ev = problem.evaluate(x);
    const Snapshot s = landing_snapshot(problem, x, ev, landing);

    TraceRecord rec;
    rec.k = k;
    rec.time_s = seconds_since(start);
    rec.f_val = ev.value;
    rec.h_norm = s.h_norm;
    rec.psi_norm = s.psi_norm;
    rec.block_h = s.block_h;
    rec.extra = problem.extra_metric(x);

    if (!finite_state(ev.value, s.h_norm)) {
      out.trace.push_back(std::move(rec));
      out.status = RunStatus::diverged;
      out.iterations = k;
      return out;
    }
    if (s.h_norm > landing.epsilon * (1.0 + 1e-12)) {
      out.trace.push_back(std::move(rec));
      throw SafeRegionEscapeError("iterate " + std::to_string(k) + " left the safe region (||h|| = " +
                                      std::to_string(s.h_norm) + ")",
                                  std::move(out.trace));
    }
    rec.safeguard = snapshot_safeguard(s, consts, landing);
    if (beta) rec.merit = problem_merit(problem, x, ev, *beta);

    std::optional<RunStatus> stop;
    if (s.field_norm <= cfg.field_tol || (cfg.safeguard_check && !rec.safeguard))
      stop = RunStatus::converged;
    else if (k >= cfg.max_iters)
      stop = RunStatus::budget_exhausted;
    else if (rec.time_s >= cfg.max_seconds)
      stop = RunStatus::time_limit;
    if (stop) {
      out.trace.push_back(std::move(rec));
      out.status = *stop;
      out.iterations = k;
      return out;
    }

    const double eta = deterministic_eta(k, rec.safeguard, cfg);
    rec.eta = eta;
    if (k % cfg.record_every == 0) out.trace.push_back(std::move(rec));
    for (std::size_t b = 0; b < x.size(); ++b) x[b].noalias() -= eta * s.fields[b].field;
  }
}

RunResult run_landing_stochastic(const Problem& problem, StochasticSampler& sampler,
                                 const Iterate& x0, const RunConfig& cfg) {
  cfg.validate();
  check_shapes(problem, x0);
  const auto& landing = cfg.landing;
  const auto consts = problem_constants(problem, landing.epsilon);
  const std::int64_t eval_every = cfg.eval_every > 0 ? cfg.eval_every : sampler.epoch_length();

  RunResult out;
  out.x = x0;
  Iterate& x = out.x;
  enter_safe_region(problem, x, landing.epsilon);
  std::optional<double> beta;
  if (cfg.record_merit)
    beta = cfg.merit_beta > 0.0 ? cfg.merit_beta : select_merit_beta(problem, x, cfg);
  out.merit_beta = beta;

  const auto start = Clock::now();
  for (std::int64_t k = 0;; ++k) {
    const double elapsed = seconds_since(start);
    std::optional<RunStatus> stop;
    if (k >= cfg.max_iters)
      stop = RunStatus::budget_exhausted;
    else if (elapsed >= cfg.max_seconds)
      stop = RunStatus::time_limit;

    if (stop || k % eval_every == 0) {
      const Evaluation ev = problem.evaluate(x);
      const Snapshot s = landing_snapshot(problem, x, ev, landing);
      TraceRecord rec;
      rec.k = k;
      rec.time_s = elapsed;
      rec.f_val = ev.value;
      rec.h_norm = s.h_norm;
      rec.psi_norm = s.psi_norm;
      rec.block_h = s.block_h;
      rec.eta = stop ? 0.0 : landing.step.at(k);
      rec.extra = problem.extra_metric(x);
      const bool finite = finite_state(ev.value, s.h_norm);
      if (finite && s.h_norm > landing.epsilon) ++out.violations;
      if (finite && s.h_norm <= landing.epsilon) {
        rec.safeguard = snapshot_safeguard(s, consts, landing);
        if (beta) rec.merit = problem_merit(problem, x, ev, *beta);
      }
      out.trace.push_back(std::move(rec));
      if (!finite) stop = RunStatus::diverged;
    }
    if (stop) {
      out.status = *stop;
      out.iterations = k;
      return out;
    }

    auto draw = sampler.sample(x);
    if (!draw) throw SamplerExhaustedError("sampler ran out at step " + std::to_string(k));
    require_dims(draw->size() == x.size(), "sampler block count");
    const double eta = landing.step.at(k);
    for (std::size_t b = 0; b < x.size(); ++b) {
      const auto& d = (*draw)[b];
      const Matrix field =
          landing_field_stochastic(x[b], d.gradient, d.b_zeta, d.b_zeta_prime, landing.omega);
      x[b].noalias() -= eta * field;
    }
  }
}

void RollingCovariance::add(const Matrix& columns) {
  require_dims(columns.rows() == sum_.rows(), "rolling covariance chunk rows");
  sum_.selfadjointView<Eigen::Lower>().rankUpdate(columns);
  count_ += columns.cols();
}

Matrix RollingCovariance::mean(double shift) const {
  if (count_ == 0) throw ConfigError("rolling covariance has no samples yet");
  Matrix out = sum_.selfadjointView<Eigen::Lower>();
  out /= static_cast<double>(count_);
  out.diagonal().array() += shift;
  return out;
}

RunResult run_riemannian_baseline(const Problem& problem, BSource source,
                                  StochasticSampler* sampler, const Iterate& x0,
                                  const RunConfig& cfg, RetractionKind retraction) {
  cfg.validate();
  check_shapes(problem, x0);
  if (source == BSource::rolling_average && sampler == nullptr)
    throw ConfigError("the rolling-average baseline needs a sampler");
  const std::size_t blocks = problem.num_blocks();
  const std::int64_t eval_every =
      sampler ? (cfg.eval_every > 0 ? cfg.eval_every : sampler->epoch_length()) : cfg.record_every;

  std::vector<RollingCovariance> rolling;
  std::vector<std::optional<SpdMatrix>> b_bar(blocks);
  if (source == BSource::rolling_average)
    for (std::size_t b = 0; b < blocks; ++b) rolling.emplace_back(problem.block_rows(b));

  RunResult out;
  out.x = x0;
  Iterate& x = out.x;
  const auto start = Clock::now();
  for (std::int64_t k = 0;; ++k) {
    const double elapsed = seconds_since(start);
    std::optional<RunStatus> stop;
    if (k >= cfg.max_iters)
      stop = RunStatus::budget_exhausted;
    else if (elapsed >= cfg.max_seconds)
      stop = RunStatus::time_limit;

    std::optional<Evaluation> full;
    if (!sampler || stop || k % eval_every == 0) full = problem.evaluate(x);
    if (full && (stop || k % eval_every == 0)) {
      TraceRecord rec;
      rec.k = k;
      rec.time_s = elapsed;
      rec.f_val = full->value;
      double g2 = 0.0;
      for (std::size_t b = 0; b < blocks; ++b) {
        const Matrix rg = riemannian_gradient(x[b], full->gradient[b], problem.constraint(b));
        g2 += rg.squaredNorm();
      }
      rec.psi_norm = std::sqrt(g2);
      rec.block_h = block_residuals(problem, x, rec.h_norm);
      rec.extra = problem.extra_metric(x);
      rec.eta = stop ? 0.0 : cfg.landing.step.at(k);
      if (!finite_state(rec.f_val, rec.h_norm)) stop = RunStatus::diverged;
      if (!sampler && !stop && rec.psi_norm <= cfg.field_tol) stop = RunStatus::converged;
      if (stop) rec.eta = 0.0;
      out.trace.push_back(std::move(rec));
    }
    if (stop) {
      out.status = *stop;
      out.iterations = k;
      return out;
    }

    if (source == BSource::rolling_average) {
      if (auto chunk = sampler->covariance_chunk()) {
        require_dims(chunk->size() == blocks, "covariance chunk block count");
        for (std::size_t b = 0; b < blocks; ++b) {
          rolling[b].add((*chunk)[b]);
          try {
            b_bar[b].emplace(rolling[b].mean(sampler->covariance_shift(b)));
          } catch (const NotSpdError&) {
            b_bar[b].reset();
          }
        }
      }
    }

    Iterate grad;
    if (sampler) {
      auto draw = sampler->sample(x);
      if (!draw) throw SamplerExhaustedError("sampler ran out at step " + std::to_string(k));
      for (auto& d : *draw) grad.push_back(std::move(d.gradient));
    } else {
      grad = std::move(full->gradient);
    }

    bool ready = true;
    for (std::size_t b = 0; b < blocks && source == BSource::rolling_average; ++b)
      ready = ready && b_bar[b].has_value();
    if (!ready) continue;

    const double eta = cfg.landing.step.at(k);
    for (std::size_t b = 0; b < blocks; ++b) {
      const SpdMatrix& bm = source == BSource::fixed ? problem.constraint(b) : *b_bar[b];
      const Matrix rg = riemannian_gradient(x[b], grad[b], bm);
      x[b] = retract(x[b], -eta * rg, bm, retraction);
    }
  }
}

}  // namespace landing
