#include "landing/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <vector>

namespace landing {

std::string to_string(SpectrumSpec::Kind kind) {
  return kind == SpectrumSpec::Kind::equidistant ? "equidistant" : "exponential";
}

SpectrumSpec::Kind parse_spectrum_kind(std::string_view name) {
  if (name == "equidistant") return SpectrumSpec::Kind::equidistant;
  if (name == "exponential") return SpectrumSpec::Kind::exponential;
  throw ConfigError("unknown spectrum kind: " + std::string(name));
}

void SpectrumSpec::validate() const {
  if (!(kappa >= 1.0) || !std::isfinite(kappa)) throw ConfigError("kappa must be >= 1");
  if (n < 1) throw ConfigError("spectrum dimension must be positive");
}

Vector SpectrumSpec::eigenvalues() const {
  validate();
  Vector out(n);
  if (n == 1) {
    out(0) = 1.0;
    return out;
  }
  const double last = static_cast<double>(n - 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / last;
    out(i) = kind == Kind::equidistant ? 1.0 - t * (1.0 - 1.0 / kappa) : std::pow(kappa, -t);
  }
  out(n - 1) = 1.0 / kappa;
  return out;
}

Matrix random_orthogonal(Eigen::Index n, Rng& rng) {
  Eigen::HouseholderQR<Matrix> qr(gaussian_matrix(n, n, rng));
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  const auto r_diag = qr.matrixQR().diagonal();
  for (Eigen::Index j = 0; j < n; ++j)
    if (r_diag(j) < 0.0) q.col(j) *= -1.0;
  return q;
}

Matrix matrix_with_spectrum(const SpectrumSpec& spec, Rng& rng) {
  const Vector lam = spec.eigenvalues();
  const Matrix q = random_orthogonal(spec.n, rng);
  return sym(q * lam.asDiagonal() * q.transpose());
}

SpdPair gen_spd_pair(const SpectrumSpec& spec_a, const SpectrumSpec& spec_b, std::uint64_t seed) {
  if (spec_a.n != spec_b.n) throw ConfigError("A and B spectra must have the same dimension");
  Rng rng(seed);
  Matrix a = matrix_with_spectrum(spec_a, rng);
  Matrix b = matrix_with_spectrum(spec_b, rng);
  return {std::move(a), SpdMatrix(std::move(b))};
}

namespace {

std::uint32_t read_be32(const unsigned char* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
         std::uint32_t{p[3]};
}

}  // namespace

MnistViews load_mnist_views(const std::string& path, Eigen::Index max_images) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open IDX file: " + path);
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  if (bytes.size() < 16) throw FormatError("IDX file too short: " + path);
  if (read_be32(bytes.data()) != 0x00000803u)
    throw FormatError("IDX magic is not 0x00000803 (unsigned byte, 3 dims): " + path);
  const Eigen::Index count = read_be32(bytes.data() + 4);
  const Eigen::Index rows = read_be32(bytes.data() + 8);
  const Eigen::Index cols = read_be32(bytes.data() + 12);
  if (count < 1 || rows < 1 || cols < 2 || cols % 2 != 0)
    throw FormatError("IDX image dimensions unsupported: " + path);
  const std::size_t pixels = static_cast<std::size_t>(rows * cols);
  if (bytes.size() - 16 < static_cast<std::size_t>(count) * pixels)
    throw FormatError("IDX file truncated: " + path);

  const Eigen::Index used = max_images > 0 ? std::min(max_images, count) : count;
  const Eigen::Index half = cols / 2;
  MnistViews out;
  out.image_rows = rows;
  out.image_cols = cols;
  out.left.resize(rows * half, used);
  out.right.resize(rows * half, used);
  for (Eigen::Index s = 0; s < used; ++s) {
    const unsigned char* img = bytes.data() + 16 + static_cast<std::size_t>(s) * pixels;
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < half; ++c) {
        out.left(r * half + c, s) = img[r * cols + c] / 255.0;
        out.right(r * half + c, s) = img[r * cols + half + c] / 255.0;
      }
    }
  }
  out.left.colwise() -= out.left.rowwise().mean();
  out.right.colwise() -= out.right.rowwise().mean();
  return out;
}

CcaProblem load_mnist_split(const std::string& path, std::optional<double> ridge,
                            Eigen::Index max_images) {
  MnistViews v = load_mnist_views(path, max_images);
  const double gamma = ridge ? *ridge : default_cca_ridge(v.left, v.right);
  return CcaProblem(std::move(v.left), std::move(v.right), gamma);
}

IcaProblem gen_ica_dataset(Eigen::Index n, Eigen::Index samples, std::uint64_t seed) {
  if (n < 1 || samples < n) throw ConfigError("ICA data needs N >= n >= 1");
  Rng rng(seed);
  // Laplace(0, 1) as the difference of two unit exponentials.
  std::exponential_distribution<double> expo(1.0);
  Matrix s(samples, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < samples; ++i) s(i, j) = expo(rng) - expo(rng);
  Matrix w = random_orthogonal(n, rng);
  Matrix a = s * w.transpose();
  return IcaProblem(std::move(a), std::move(w));
}

std::pair<Matrix, Matrix> gen_cca_synthetic(Eigen::Index n1, Eigen::Index n2,
                                            Eigen::Index samples, Eigen::Index latent,
                                            std::uint64_t seed) {
  if (n1 < 1 || n2 < 1 || samples < 2 || latent < 1)
    throw ConfigError("synthetic CCA needs positive sizes and at least two samples");
  if (latent > std::min(n1, n2)) throw ConfigError("latent dimension exceeds a view dimension");
  Rng rng(seed);
  // Orthonormal loadings: each view covariance is I + W diag(s^2) W^T, and the
  // population canonical correlations are s_k^2 / (1 + s_k^2).
  Vector strength(latent);
  for (Eigen::Index k = 0; k < latent; ++k) strength(k) = 2.0 / (1.0 + 0.5 * static_cast<double>(k));
  const Matrix w1 = random_orthogonal(n1, rng).leftCols(latent);
  const Matrix w2 = random_orthogonal(n2, rng).leftCols(latent);
  const Matrix z = strength.asDiagonal() * gaussian_matrix(latent, samples, rng);
  Matrix d1 = w1 * z + gaussian_matrix(n1, samples, rng);
  Matrix d2 = w2 * z + gaussian_matrix(n2, samples, rng);
  d1.colwise() -= d1.rowwise().mean();
  d2.colwise() -= d2.rowwise().mean();
  return {std::move(d1), std::move(d2)};
}

}  // namespace landing
