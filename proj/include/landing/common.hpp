#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace landing {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Point on a product of generalized Stiefel manifolds, one n_b x p block per factor.
/// GEVP and ICA use a single block, CCA uses two.
using Iterate = std::vector<Matrix>;

using Rng = std::mt19937_64;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class NotSpdError : public Error {
 public:
  using Error::Error;
};

/// Factorization failure inside a retraction. Recoverable: callers may shrink the step.
class RetractionError : public Error {
 public:
  using Error::Error;
};

class SingularError : public Error {
 public:
  using Error::Error;
};

class OutOfSafeRegionError : public Error {
 public:
  using Error::Error;
};

class SamplerExhaustedError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

inline Matrix sym(const Matrix& m) { return 0.5 * (m + m.transpose()); }
inline Matrix skew(const Matrix& m) { return 0.5 * (m - m.transpose()); }

/// Frobenius inner product.
inline double inner(const Matrix& a, const Matrix& b) { return a.cwiseProduct(b).sum(); }

inline void require_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionError("dimension mismatch: " + what);
}

/// Standard Gaussian matrix drawn column-major from rng.
Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng);

}  // namespace landing
