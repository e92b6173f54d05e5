#pragma once

// Synthetic instances, MNIST ingestion and ICA data synthesis.

#include "landing/problems.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

namespace landing {

struct SpectrumSpec {
  enum class Kind { equidistant, exponential };
  Kind kind = Kind::equidistant;
  double kappa = 1.0;
  Eigen::Index n = 1;

  /// Descending eigenvalues in [1/kappa, 1]. Equidistant spacing includes both
  /// endpoints; exponential decay is geometric from 1 down to 1/kappa.
  Vector eigenvalues() const;
  void validate() const;
};

std::string to_string(SpectrumSpec::Kind kind);
SpectrumSpec::Kind parse_spectrum_kind(std::string_view name);

/// Haar orthogonal matrix: QR of a Gaussian matrix with R's diagonal made positive.
Matrix random_orthogonal(Eigen::Index n, Rng& rng);

/// Q diag(spectrum) Q^T with a Haar Q.
Matrix matrix_with_spectrum(const SpectrumSpec& spec, Rng& rng);

struct SpdPair {
  Matrix a;
  SpdMatrix b;
};

/// A and B with the given spectra and independent random eigenbases.
SpdPair gen_spd_pair(const SpectrumSpec& spec_a, const SpectrumSpec& spec_b, std::uint64_t seed);

struct MnistViews {
  Matrix left;   // 14 * rows features per image, samples as columns
  Matrix right;
  Eigen::Index image_rows = 0;
  Eigen::Index image_cols = 0;
};

/// Reads an IDX image file (magic 0x00000803) and splits every image into its
/// left and right halves. Pixels are scaled to [0, 1], then every feature is
/// centered over the samples. max_images = 0 reads all of them.
MnistViews load_mnist_views(const std::string& path, Eigen::Index max_images = 0);

/// CCA between the two halves. Without an explicit ridge, default_cca_ridge is used.
CcaProblem load_mnist_split(const std::string& path, std::optional<double> ridge = std::nullopt,
                            Eigen::Index max_images = 0);

/// A = S W^T with S an N x n matrix of unit-scale Laplace sources and W Haar orthogonal.
IcaProblem gen_ica_dataset(Eigen::Index n, Eigen::Index samples, std::uint64_t seed);

/// Two centered views driven by a shared latent factor of the given dimension
/// (at most min(n1, n2)) through orthonormal loadings, each with independent unit
/// noise. Samples are columns.
std::pair<Matrix, Matrix> gen_cca_synthetic(Eigen::Index n1, Eigen::Index n2,
                                            Eigen::Index samples, Eigen::Index latent,
                                            std::uint64_t seed);

}  // namespace landing
