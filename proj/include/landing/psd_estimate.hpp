#pragma once

#include "landing/common.hpp"

#include <variant>

namespace landing {

/// A positive-semidefinite estimate of the constraint matrix B.
///
/// Either a dense n x n matrix, or a factored minibatch covariance
/// V V^T * scale + shift * I with V of size n x r. The factored form is the one
/// used on the hot path: applying it to an n x p block costs O(n p r).
class PsdEstimate {
 public:
  static PsdEstimate dense(Matrix b) {
    require_dims(b.rows() == b.cols(), "dense PSD estimate must be square");
    PsdEstimate out;
    out.rep_ = std::move(b);
    return out;
  }

  /// V V^T * scale + shift * I. For a batch of r samples stored as columns, scale = 1/r.
  static PsdEstimate factored(Matrix v, double scale, double shift = 0.0) {
    PsdEstimate out;
    out.rep_ = Factor{std::move(v), scale, shift};
    return out;
  }

  Eigen::Index size() const {
    if (const auto* d = std::get_if<Matrix>(&rep_)) return d->rows();
    return std::get<Factor>(rep_).v.rows();
  }

  bool is_factored() const { return std::holds_alternative<Factor>(rep_); }

  Matrix apply(const Matrix& x) const {
    require_dims(x.rows() == size(), "PSD estimate applied to block with wrong row count");
    if (const auto* d = std::get_if<Matrix>(&rep_)) return (*d) * x;
    const auto& f = std::get<Factor>(rep_);
    Matrix out = f.v * (f.v.transpose() * x);
    out *= f.scale;
    if (f.shift != 0.0) out.noalias() += f.shift * x;
    return out;
  }

  Matrix to_dense() const {
    if (const auto* d = std::get_if<Matrix>(&rep_)) return *d;
    const auto& f = std::get<Factor>(rep_);
    Matrix out = f.scale * (f.v * f.v.transpose());
    out.diagonal().array() += f.shift;
    return out;
  }

 private:
  struct Factor {
    Matrix v;
    double scale = 1.0;
    double shift = 0.0;
  };
  std::variant<Matrix, Factor> rep_;
};

}  // namespace landing
