#pragma once

// The landing field: a relative ascent direction plus omega times the gradient
// of the infeasibility penalty, in deterministic and stochastic form, together
// with the step-size safeguard that keeps iterates inside the safe region.

#include "landing/manifold.hpp"
#include "landing/psd_estimate.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace landing {

enum class AscentVariant {
  psi_b,             // 2 skew(G X^T B) B X; multiplications only
  psi_b_riemannian,  // 2 skew(B^{-1} G X^T) B X; needs a solve with B
};

std::string to_string(AscentVariant v);
AscentVariant parse_ascent_variant(std::string_view name);

struct StepSchedule {
  enum class Kind { constant, inverse_sqrt };
  Kind kind = Kind::constant;
  double eta0 = 0.01;

  /// eta0 for constant, eta0 / sqrt(1 + k) for inverse_sqrt.
  double at(std::int64_t k) const;
  void validate() const;
};

std::string to_string(StepSchedule::Kind kind);
StepSchedule::Kind parse_schedule_kind(std::string_view name);

struct LandingConfig {
  double omega = 1.0;
  double epsilon = 0.5;
  AscentVariant variant = AscentVariant::psi_b;
  StepSchedule step;

  void validate() const;
};

/// Landing field together with the pieces it is assembled from.
struct LandingField {
  Matrix psi;     // relative ascent direction
  Matrix normal;  // grad N(X) = 2 B X h(X)
  Matrix field;   // psi + omega * normal
  ConstraintResidual residual;
  double psi_norm = 0.0;
  double normal_norm = 0.0;
  /// sqrt(||psi||^2 + omega^2 ||normal||^2); the two parts are orthogonal.
  double field_norm = 0.0;
};

/// Psi_B or Psi_B^R at X for Euclidean gradient G.
Matrix relative_ascent(const Matrix& x, const Matrix& g, const SpdMatrix& b, AscentVariant variant);

LandingField landing_field(const Matrix& x, const Matrix& g, const SpdMatrix& b, double omega,
                           AscentVariant variant);

inline Matrix landing_field_deterministic(const Matrix& x, const Matrix& g, const SpdMatrix& b,
                                          const LandingConfig& config) {
  return landing_field(x, g, b, config.omega, config.variant).field;
}

/// 2 skew(G_xi X^T B_z) B_z' X + 2 omega B_z' X (X^T B_z X - I).
/// Only n x p and p x p intermediates are formed, so factored estimates cost O(n p r).
Matrix landing_field_stochastic(const Matrix& x, const Matrix& g_xi, const PsdEstimate& b_zeta,
                                const PsdEstimate& b_zeta_prime, double omega);

/// Largest step keeping the segment x -> x - eta * field inside ||h|| <= epsilon.
/// Returns nullopt when the field vanished (the caller treats this as converged).
/// Throws OutOfSafeRegionError when norm_h > epsilon.
std::optional<double> step_size_safeguard(double norm_grad_n, double norm_field, double norm_h,
                                          double l_n, double omega, double epsilon);

/// Uniform lower bound on the safeguard over the safe region, given a bound
/// c_psi on ||Psi||. 0 < alpha < 1 trades off the four regimes.
double safeguard_lower_bound(const SmoothnessConstants& constants, double c_psi, double omega,
                             double alpha = 0.5);

/// Alignment constant rho of the chosen relative ascent direction.
double relative_ascent_rho(AscentVariant variant, double beta_1, double beta_n, double epsilon);

struct VarianceBound {
  double alpha_g = 0.0;
  double alpha_b = 0.0;
  double gamma_b = 0.0;
  double total = 0.0;  // sigma_g2 * alpha_g + sigma_b2 * (alpha_b + omega^2 gamma_b)
};

/// Upper bound on E||Lambda_stoch - Lambda||^2.
///   sigma_g2: E||grad f_xi - grad f||^2     sigma_b2: E||B_z - B||_F^2
///   p_b:      E||B_z||_2^2                  delta:    bound on ||grad f X^T||_2^2
VarianceBound variance_bound(double sigma_g2, double sigma_b2, double omega, double epsilon,
                             double beta_1, double beta_n, double p_b, double delta);

}  // namespace landing
