#include "oracles.hpp"

#include "landing/manifold.hpp"

#include <doctest.h>

#include <algorithm>
#include <array>
#include <thread>

using namespace landing;

namespace {

SpdMatrix random_spd(Eigen::Index n, Rng& rng) {
  const Matrix g = gaussian_matrix(n, n, rng);
  return SpdMatrix(g * g.transpose() / static_cast<double>(n) + 0.5 * Matrix::Identity(n, n));
}

constexpr std::array<RetractionKind, 3> kAllRetractions = {
    RetractionKind::polar, RetractionKind::svd, RetractionKind::cholesky_qr};

}  // namespace

TEST_CASE("SpdMatrix validates symmetry and definiteness") {
  CHECK_NOTHROW(SpdMatrix(Matrix::Identity(3, 3)));
  Matrix asym = Matrix::Identity(3, 3);
  asym(0, 1) = 0.1;
  CHECK_THROWS_AS(SpdMatrix{asym}, NotSpdError);
  Matrix indefinite = Matrix::Identity(3, 3);
  indefinite(2, 2) = -1.0;
  CHECK_THROWS_AS(SpdMatrix{indefinite}, NotSpdError);
  CHECK_THROWS_AS(SpdMatrix{Matrix::Zero(2, 3)}, DimensionError);

  Rng rng(3);
  const SpdMatrix b = random_spd(6, rng);
  Eigen::SelfAdjointEigenSolver<Matrix> es(b.matrix());
  CHECK(b.beta_max() == doctest::Approx(es.eigenvalues().maxCoeff()).epsilon(1e-12));
  CHECK(b.beta_min() == doctest::Approx(es.eigenvalues().minCoeff()).epsilon(1e-12));
  const Matrix rhs = gaussian_matrix(6, 2, rng);
  CHECK(oracle::rel_err(b.matrix() * b.solve(rhs), rhs) < 1e-12);
  const Matrix l = b.cholesky_factor();
  CHECK(oracle::rel_err(l * l.transpose(), b.matrix()) < 1e-12);
}

TEST_CASE("SpdMatrix eigenvalue cache under concurrent readers") {
  Rng rng(4);
  const SpdMatrix b = random_spd(30, rng);
  const SpdMatrix copy = b;
  std::vector<double> hi(8);
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i < hi.size(); ++i)
    pool.emplace_back([&, i] { hi[i] = (i % 2 ? copy : b).beta_max(); });
  for (auto& t : pool) t.join();
  for (double v : hi) CHECK(v == hi[0]);
}

TEST_CASE("constraint_residual") {
  Rng rng(1);
  SUBCASE("orthonormal columns with B = I") {
    const Matrix q = random_orthogonal(5, rng).leftCols(3);
    const auto res = constraint_residual(q, SpdMatrix(Matrix::Identity(5, 5)));
    CHECK(res.norm < 1e-14);
  }
  SUBCASE("X = 0") {
    const auto res = constraint_residual(Matrix::Zero(4, 3), SpdMatrix(Matrix::Identity(4, 4)));
    CHECK(res.h.isApprox(-Matrix::Identity(3, 3)));
    CHECK(res.norm == doctest::Approx(std::sqrt(3.0)));
  }
  SUBCASE("dense loops oracle, n=3, p=2") {
    const SpdMatrix b = random_spd(3, rng);
    const Matrix x = gaussian_matrix(3, 2, rng);
    const auto res = constraint_residual(x, b);
    const Matrix ref = oracle::residual_loops(x, b.matrix());
    CHECK((res.h - ref).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(res.h == res.h.transpose());
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(constraint_residual(Matrix::Zero(4, 2), SpdMatrix(Matrix::Identity(3, 3))),
                    DimensionError);
  }
}

TEST_CASE("penalty_and_gradient") {
  Rng rng(2);
  const SpdMatrix b = random_spd(7, rng);
  SUBCASE("feasible point") {
    const Matrix x = oracle::b_orthonormal(b.matrix(), 3, rng);
    const auto pen = penalty_and_gradient(x, b);
    CHECK(pen.value < 1e-25);
    CHECK(pen.gradient.norm() < 1e-12);
  }
  SUBCASE("finite differences on safe-region points") {
    for (int trial = 0; trial < 10; ++trial) {
      const Matrix x = oracle::safe_point(b.matrix(), 3, 0.5, rng);
      const Matrix v = gaussian_matrix(7, 3, rng);
      const auto pen = penalty_and_gradient(x, b);
      const double fd = oracle::directional_fd(
          [&](const Matrix& y) { return penalty_and_gradient(y, b).value; }, x, v);
      CHECK(std::abs(fd - inner(pen.gradient, v)) <= 1e-6 * pen.gradient.norm() * v.norm());
    }
  }
  SUBCASE("dense oracle, n=3, p=2") {
    const SpdMatrix b3 = random_spd(3, rng);
    const Matrix x = gaussian_matrix(3, 2, rng);
    const Matrix h = oracle::residual_loops(x, b3.matrix());
    const auto pen = penalty_and_gradient(x, b3);
    CHECK(std::abs(pen.value - 0.5 * h.squaredNorm()) < 1e-12);
    CHECK((pen.gradient - 2.0 * b3.matrix() * x * h).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("retractions") {
  Rng rng(5);
  const SpdMatrix b = random_spd(6, rng);
  const Matrix x = oracle::b_orthonormal(b.matrix(), 3, rng);

  SUBCASE("zero step is the identity on the manifold") {
    for (auto kind : kAllRetractions)
      CHECK(oracle::rel_err(retract(x, Matrix::Zero(6, 3), b, kind), x) < 1e-12);
  }
  SUBCASE("feasibility and polar/svd agreement, n=6, p=3") {
    const Matrix z = 0.3 * gaussian_matrix(6, 3, rng);
    for (auto kind : kAllRetractions)
      CHECK(constraint_residual(retract(x, z, b, kind), b).norm <= 1e-10);
    CHECK(oracle::rel_err(retract(x, z, b, RetractionKind::polar),
                          retract(x, z, b, RetractionKind::svd)) < 1e-8);
  }
  SUBCASE("polar reduces to the Stiefel polar factor for B = I") {
    const SpdMatrix id(Matrix::Identity(6, 6));
    const Matrix q = random_orthogonal(6, rng).leftCols(3);
    const Matrix z = tangent_project(q, gaussian_matrix(6, 3, rng), id);
    Eigen::SelfAdjointEigenSolver<Matrix> es(Matrix::Identity(3, 3) + z.transpose() * z);
    const Matrix ref = (q + z) * es.operatorInverseSqrt();
    CHECK(oracle::rel_err(retract(q, z, id, RetractionKind::polar), ref) < 1e-12);
  }
  SUBCASE("second-order remainder for tangent directions") {
    const Matrix z = tangent_project(x, gaussian_matrix(6, 3, rng), b);
    for (auto kind : kAllRetractions) {
      std::vector<double> ratios;
      for (double t : {1e-2, 1e-3, 1e-4})
        ratios.push_back((retract(x, t * z, b, kind) - x - t * z).norm() / (t * t));
      const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
      CAPTURE(to_string(kind));
      CHECK(*hi < 10.0 * *lo);
    }
  }
  SUBCASE("rank deficiency is a typed error") {
    for (auto kind : kAllRetractions) CHECK_THROWS_AS(retract(x, -x, b, kind), RetractionError);
  }
}

TEST_CASE("lagrange_multiplier") {
  Rng rng(6);
  SUBCASE("B = I and orthonormal X") {
    const SpdMatrix id(Matrix::Identity(5, 5));
    const Matrix q = random_orthogonal(5, rng).leftCols(2);
    const Matrix g = gaussian_matrix(5, 2, rng);
    CHECK(oracle::rel_err(lagrange_multiplier(q, g, id), 0.5 * sym(q.transpose() * g)) < 1e-12);
  }
  SUBCASE("gradient in the normal space is annihilated") {
    const SpdMatrix b = random_spd(6, rng);
    const Matrix x = oracle::b_orthonormal(b.matrix(), 3, rng);
    const Matrix g = b.matrix() * x * oracle::random_symmetric(3, rng);
    CHECK(riemannian_gradient(x, g, b).norm() <= 1e-10 * g.norm());
  }
  SUBCASE("Kronecker oracle, n=5, p=2") {
    const SpdMatrix b = random_spd(5, rng);
    const Matrix x = oracle::safe_point(b.matrix(), 2, 0.5, rng);
    const Matrix g = gaussian_matrix(5, 2, rng);
    const Matrix bx = b.matrix() * x;
    const Matrix s = bx.transpose() * bx;
    const Matrix rhs = x.transpose() * b.matrix() * g + g.transpose() * bx;
    const Matrix lam = lagrange_multiplier(x, g, b);
    CHECK(oracle::rel_err(lam, oracle::lyapunov_kron(s, rhs)) < 1e-10);
    CHECK((2.0 * lam * s + 2.0 * s * lam - rhs).norm() <= 1e-10 * rhs.norm());
    CHECK(lam == lam.transpose());
  }
  SUBCASE("singular S") {
    const SpdMatrix b = random_spd(4, rng);
    Matrix x = gaussian_matrix(4, 2, rng);
    x.col(1) = x.col(0);
    CHECK_THROWS_AS(lagrange_multiplier(x, gaussian_matrix(4, 2, rng), b), SingularError);
  }
}

TEST_CASE("riemannian gradient is tangent with rho = 1") {
  Rng rng(7);
  const SpdMatrix b = random_spd(8, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix x = oracle::safe_point(b.matrix(), 3, 0.5, rng);
    const Matrix g = gaussian_matrix(8, 3, rng);
    const Matrix rg = riemannian_gradient(x, g, b);
    const Matrix dh = x.transpose() * b.matrix() * rg + rg.transpose() * b.matrix() * x;
    CHECK(dh.norm() <= 1e-10 * std::max(1.0, rg.norm()));
    CHECK(oracle::rel_err(inner(rg, g), rg.squaredNorm()) < 1e-8);
  }
}

TEST_CASE("fletcher_merit") {
  Rng rng(8);
  const SpdMatrix b = random_spd(6, rng);
  const Matrix g = gaussian_matrix(6, 2, rng);
  SUBCASE("feasible point") {
    const Matrix x = oracle::b_orthonormal(b.matrix(), 2, rng);
    const double m = fletcher_merit(x, 1.25, g, b, 3.0);
    CHECK(std::abs(m - 1.25) < 1e-13);
  }
  SUBCASE("linear in beta") {
    const Matrix x = oracle::safe_point(b.matrix(), 2, 0.5, rng);
    const double h2 = constraint_residual(x, b).h.squaredNorm();
    const double m1 = fletcher_merit(x, -2.0, g, b, 1.5);
    const double m2 = fletcher_merit(x, -2.0, g, b, 3.0);
    CHECK(std::abs((m2 - m1) - 1.5 * h2) < 1e-12);
  }
  SUBCASE("dense GEVP oracle") {
    const auto prob = oracle::gevp_instance(10, 10.0, 1);
    const Matrix x = oracle::safe_point(prob.b().matrix(), 3, 0.4, rng);
    const auto ev = prob.evaluate({x});
    const Matrix& bm = prob.b().matrix();
    const Matrix gx = -prob.a() * x;
    const Matrix h = x.transpose() * bm * x - Matrix::Identity(3, 3);
    const Matrix s = x.transpose() * bm * bm * x;
    const Matrix lam = oracle::lyapunov_kron(s, x.transpose() * bm * gx + gx.transpose() * bm * x);
    const double f = -0.5 * (x.transpose() * prob.a() * x).trace();
    const double ref = f - (h.cwiseProduct(lam)).sum() + 2.0 * h.squaredNorm();
    CHECK(oracle::rel_err(fletcher_merit(x, ev.value, ev.gradient[0], prob.b(), 2.0), ref) < 1e-10);
  }
  SUBCASE("beta must be positive") {
    const Matrix x = oracle::b_orthonormal(b.matrix(), 2, rng);
    CHECK_THROWS_AS(fletcher_merit(x, 0.0, g, b, 0.0), ConfigError);
  }
}

TEST_CASE("smoothness_constants") {
  const auto unit = smoothness_constants(1.0, 1.0, 0.0);
  CHECK(unit.c_h == doctest::Approx(2.0));
  CHECK(unit.c_h_lower == doctest::Approx(2.0));
  CHECK(unit.l_n == doctest::Approx(4.0));

  const auto c = smoothness_constants(1.0, 0.01, 0.5);
  CHECK(c.c_h == doctest::Approx(2.0 * std::sqrt(150.0)).epsilon(1e-12));
  CHECK(c.c_h == doctest::Approx(24.4949).epsilon(1e-5));
  CHECK(c.c_h_lower == doctest::Approx(0.0141421).epsilon(1e-5));
  CHECK(c.l_n == doctest::Approx(601.0).epsilon(1e-12));

  const auto wider = smoothness_constants(1.0, 0.01, 0.7);
  CHECK(wider.c_h > c.c_h);
  CHECK(wider.l_n > c.l_n);
  CHECK(wider.c_h_lower < c.c_h_lower);
  CHECK(c.c_h_lower <= c.c_h);

  CHECK_THROWS_AS(smoothness_constants(1.0, 0.5, 1.0), ConfigError);
  CHECK_THROWS_AS(smoothness_constants(0.5, 1.0, 0.5), ConfigError);
}

TEST_CASE("singular values in the safe region") {
  Rng rng(9);
  const SpdMatrix b = random_spd(8, rng);
  const double eps = 0.5;
  const double lo = std::sqrt((1.0 - eps) / b.beta_max());
  const double hi = std::sqrt((1.0 + eps) / b.beta_min());
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix x = oracle::safe_point(b.matrix(), 3, eps, rng);
    const Vector s = x.jacobiSvd().singularValues();
    CHECK(s.maxCoeff() <= hi * (1 + 1e-12));
    CHECK(s.minCoeff() >= lo * (1 - 1e-12));
  }
}

TEST_CASE("tangent_project") {
  Rng rng(10);
  const SpdMatrix b = random_spd(7, rng);
  const Matrix x = oracle::safe_point(b.matrix(), 3, 0.4, rng);
  const Matrix m = x.transpose() * b.matrix() * x;
  SUBCASE("normal elements vanish") {
    const Matrix y = x * m.inverse() * oracle::random_symmetric(3, rng);
    CHECK(tangent_project(x, y, b).norm() < 1e-10 * y.norm());
  }
  SUBCASE("idempotent, tangent images") {
    const Matrix y = gaussian_matrix(7, 3, rng);
    const Matrix p = tangent_project(x, y, b);
    CHECK(oracle::rel_err(tangent_project(x, p, b), p) < 1e-10);
    const Matrix dh = x.transpose() * b.matrix() * p + p.transpose() * b.matrix() * x;
    CHECK(dh.norm() < 1e-10 * y.norm());
  }
  SUBCASE("singular gram") {
    CHECK_THROWS_AS(tangent_project(Matrix::Zero(7, 3), x, b), SingularError);
  }
}

TEST_CASE("random_layer_point") {
  Rng rng(11);
  const SpdMatrix b = random_spd(6, rng);
  const Matrix x = oracle::b_orthonormal(b.matrix(), 3, rng);
  for (double radius : {0.0, 0.1, 0.49}) {
    const Matrix y = random_layer_point(x, radius, rng);
    CHECK(constraint_residual(y, b).norm == doctest::Approx(radius).epsilon(1e-10));
  }
  CHECK_THROWS_AS(random_layer_point(x, 1.0, rng), ConfigError);
}

TEST_CASE("retraction kind names") {
  for (auto kind : kAllRetractions) CHECK(parse_retraction_kind(to_string(kind)) == kind);
  CHECK_THROWS_AS(parse_retraction_kind("qr"), ConfigError);
}
