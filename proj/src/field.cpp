#include "landing/field.hpp"

#include <cmath>

namespace landing {

std::string to_string(AscentVariant v) {
  return v == AscentVariant::psi_b ? "psi_b" : "psi_b_riemannian";
}

AscentVariant parse_ascent_variant(std::string_view name) {
  if (name == "psi_b") return AscentVariant::psi_b;
  if (name == "psi_b_riemannian" || name == "psi_br") return AscentVariant::psi_b_riemannian;
  throw ConfigError("unknown ascent variant: " + std::string(name));
}

std::string to_string(StepSchedule::Kind kind) {
  return kind == StepSchedule::Kind::constant ? "constant" : "inverse_sqrt";
}

StepSchedule::Kind parse_schedule_kind(std::string_view name) {
  if (name == "constant") return StepSchedule::Kind::constant;
  if (name == "inverse_sqrt") return StepSchedule::Kind::inverse_sqrt;
  throw ConfigError("unknown step schedule: " + std::string(name));
}

double StepSchedule::at(std::int64_t k) const {
  if (kind == Kind::constant) return eta0;
  return eta0 / std::sqrt(1.0 + static_cast<double>(k));
}

void StepSchedule::validate() const {
  if (!(eta0 > 0.0) || !std::isfinite(eta0)) throw ConfigError("step size eta0 must be positive");
}

void LandingConfig::validate() const {
  if (!(omega > 0.0) || !std::isfinite(omega)) throw ConfigError("omega must be positive");
  if (!(epsilon > 0.0) || !(epsilon < 1.0)) throw ConfigError("epsilon must lie in (0, 1)");
  step.validate();
}

namespace {

// With U = B_z X and W = B_z' X:
//   2 skew(G U^T) W = G (U^T W) - U (G^T W)
Matrix skew_transport(const Matrix& g, const Matrix& u, const Matrix& w) {
  Matrix out = g * (u.transpose() * w);
  out.noalias() -= u * (g.transpose() * w);
  return out;
}

}  // namespace

Matrix relative_ascent(const Matrix& x, const Matrix& g, const SpdMatrix& b,
                       AscentVariant variant) {
  require_dims(x.rows() == b.size() && g.rows() == x.rows() && g.cols() == x.cols(),
               "relative ascent operands");
  const Matrix bx = b.apply(x);
  if (variant == AscentVariant::psi_b) return skew_transport(g, bx, bx);
  const Matrix binv_g = b.solve(g);
  Matrix out = binv_g * sym(x.transpose() * bx);
  out.noalias() -= x * (g.transpose() * x);
  return out;
}

namespace {

// Shared by the deterministic and stochastic paths so that a zero-variance
// stochastic run reproduces the deterministic one bit for bit.
void assemble_normal(LandingField& out, const Matrix& x, const Matrix& u, const Matrix& w,
                     double omega) {
  out.residual = constraint_residual_from_bx(x, u);
  out.normal = w * out.residual.h;
  out.normal *= 2.0;
  out.field = out.normal;
  out.field *= omega;
  out.field += out.psi;
}

}  // namespace

LandingField landing_field(const Matrix& x, const Matrix& g, const SpdMatrix& b, double omega,
                           AscentVariant variant) {
  require_dims(x.rows() == b.size() && g.rows() == x.rows() && g.cols() == x.cols(),
               "landing field operands");
  LandingField out;
  const Matrix bx = b.apply(x);
  if (variant == AscentVariant::psi_b) {
    out.psi = skew_transport(g, bx, bx);
  } else {
    out.psi = b.solve(g) * sym(x.transpose() * bx);
    out.psi.noalias() -= x * (g.transpose() * x);
  }
  assemble_normal(out, x, bx, bx, omega);
  out.psi_norm = out.psi.norm();
  out.normal_norm = out.normal.norm();
  out.field_norm = std::sqrt(out.psi_norm * out.psi_norm +
                             omega * omega * out.normal_norm * out.normal_norm);
  return out;
}

Matrix landing_field_stochastic(const Matrix& x, const Matrix& g_xi, const PsdEstimate& b_zeta,
                                const PsdEstimate& b_zeta_prime, double omega) {
  require_dims(x.rows() == b_zeta.size() && x.rows() == b_zeta_prime.size() &&
                   g_xi.rows() == x.rows() && g_xi.cols() == x.cols(),
               "stochastic landing operands");
  const Matrix u = b_zeta.apply(x);
  const Matrix w = b_zeta_prime.apply(x);
  LandingField out;
  out.psi = skew_transport(g_xi, u, w);
  assemble_normal(out, x, u, w, omega);
  return std::move(out.field);
}

std::optional<double> step_size_safeguard(double norm_grad_n, double norm_field, double norm_h,
                                          double l_n, double omega, double epsilon) {
  if (!(l_n > 0.0) || !(omega > 0.0) || !(epsilon > 0.0))
    throw ConfigError("safeguard needs positive L_N, omega and epsilon");
  if (norm_h > epsilon) throw OutOfSafeRegionError("iterate is outside the safe region");
  if (!(norm_field > 0.0)) return std::nullopt;
  const double g2 = norm_grad_n * norm_grad_n;
  const double lam2 = norm_field * norm_field;
  const double slack = std::max(0.0, epsilon * epsilon - norm_h * norm_h);
  const double disc = omega * omega * g2 * g2 + l_n * lam2 * slack;
  return (omega * g2 + std::sqrt(disc)) / (l_n * lam2);
}

double safeguard_lower_bound(const SmoothnessConstants& c, double c_psi, double omega,
                             double alpha) {
  if (!(alpha > 0.0) || !(alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (!(c_psi > 0.0)) throw ConfigError("C_psi must be positive");
  if (!(omega > 0.0)) throw ConfigError("omega must be positive");
  const double eps = c.epsilon;
  const double spread = c_psi * c_psi + omega * omega * c.c_h * c.c_h * eps * eps;
  const double root = std::sqrt(2.0 * c.l_n);
  const double t1 =
      omega * c.c_h_lower * c.c_h_lower * alpha * alpha * eps * eps / (c.l_n * spread);
  const double t2 = (1.0 - alpha) * eps / root;
  const double t3 = (1.0 - alpha) * eps / (root * spread);
  const double ratio = c.c_h_lower / c.c_h;
  const double t4 = ratio * ratio / (omega * c.l_n);
  return std::min({t1, t2, t3, t4});
}

double relative_ascent_rho(AscentVariant variant, double beta_1, double beta_n, double epsilon) {
  if (variant == AscentVariant::psi_b) return 1.0 / ((beta_1 / beta_n) * beta_1 * (1.0 + epsilon));
  return beta_n / (1.0 + epsilon);
}

VarianceBound variance_bound(double sigma_g2, double sigma_b2, double omega, double epsilon,
                             double beta_1, double beta_n, double p_b, double delta) {
  if (sigma_g2 < 0.0 || sigma_b2 < 0.0 || omega < 0.0 || epsilon < 0.0 || p_b < 0.0 ||
      delta < 0.0 || !(beta_n > 0.0) || beta_1 < beta_n)
    throw ConfigError("variance bound inputs must be nonnegative with 0 < beta_n <= beta_1");
  const double r = (1.0 + epsilon) / beta_n;
  VarianceBound v;
  v.alpha_g = 8.0 * p_b * p_b * r * r;
  v.alpha_b = 8.0 * r * delta * (p_b + beta_1 * beta_1);
  v.gamma_b = 8.0 * r * (r * sigma_b2 + epsilon * epsilon + beta_1 * beta_1 * r * r * r);
  v.total = sigma_g2 * v.alpha_g + sigma_b2 * (v.alpha_b + omega * omega * v.gamma_b);
  return v;
}

}  // namespace landing
