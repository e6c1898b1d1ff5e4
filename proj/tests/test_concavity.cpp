#include "clafd/scenarios.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace clafd;
using clafd::testing::TestRng;

namespace {

PairQuadratic quadratic(const Matrix& H, const Vector& c, double h = 0.0) {
  PairQuadratic pq;
  pq.H = H;
  pq.c = c;
  pq.h = h;
  return pq;
}

/// Random H of the given rank and c in range(H).
PairQuadratic random_in_range(TestRng& rng, Eigen::Index m, Eigen::Index rank) {
  const Matrix q = rng.normal_matrix(m, m).householderQr().householderQ();
  const Matrix U = q.leftCols(rank);
  Vector lambda(rank);
  for (Eigen::Index i = 0; i < rank; ++i) lambda[i] = std::exp(rng.uniform(std::log(0.01), std::log(10.0)));
  return quadratic(U * lambda.asDiagonal() * U.transpose(), U * rng.normal_vector(rank));
}

/// Largest curvature of exp(-d) restricted to range(U1), without the
/// positive factor exp(-d).
double range_curvature(const PairQuadratic& pq, const ConcavitySpectrum& spec, const Vector& u) {
  const Vector g = 2.0 * pq.H * u + pq.c;
  const Matrix hess = spec.U1.transpose() * (g * g.transpose() - 2.0 * pq.H) * spec.U1;
  return Eigen::SelfAdjointEigenSolver<Matrix>(hess).eigenvalues().maxCoeff();
}

}  // namespace

TEST_CASE("spectrum") {
  SUBCASE("diagonal") {
    const auto spec = spectrum(quadratic((Matrix(2, 2) << 2, 0, 0, 0).finished(), Vector::Zero(2)));
    REQUIRE(spec.rank() == 1);
    CHECK(spec.lambda1[0] == doctest::Approx(2.0));
    CHECK(std::abs(spec.U1(0, 0)) == doctest::Approx(1.0));
    CHECK(spec.U2.cols() == 1);
  }
  SUBCASE("zero") {
    const auto pq = quadratic(Matrix::Zero(3, 3), Vector::Zero(3));
    const auto spec = spectrum(pq);
    CHECK(spec.degenerate());
    CHECK(concave_at(pq, spec, Vector::Ones(3)) == Concavity::concave);
    const auto tilted = quadratic(Matrix::Zero(3, 3), Vector::Ones(3));
    CHECK(concave_at(tilted, spectrum(tilted), Vector::Ones(3)) == Concavity::not_certified);
  }
  SUBCASE("random rank three") {
    TestRng rng(4);
    const Matrix G = rng.normal_matrix(6, 3);
    const auto pq = quadratic(G * G.transpose(), Vector::Zero(6));
    const auto spec = spectrum(pq);
    CHECK(spec.rank() == 3);
    const Matrix rebuilt = spec.U1 * spec.lambda1.asDiagonal() * spec.U1.transpose();
    CHECK((rebuilt - pq.H).norm() < 1e-10);
    CHECK(spec.lambda1[0] >= spec.lambda1[1]);
  }
}

TEST_CASE("pointwise concavity condition") {
  const auto pq = quadratic(Matrix::Identity(2, 2), Vector::Zero(2));
  const auto spec = spectrum(pq);
  CHECK(concave_at(pq, spec, Vector::Zero(2)) == Concavity::concave);
  CHECK(concave_at(pq, spec, (Vector(2) << 1.0, 0.0).finished()) == Concavity::not_concave);
  const auto outside = quadratic((Matrix(2, 2) << 1, 0, 0, 0).finished(), Vector::Ones(2));
  CHECK(concave_at(outside, spectrum(outside), Vector::Zero(2)) == Concavity::not_certified);
}

TEST_CASE("concavity condition implies non-positive curvature") {
  TestRng rng(21);
  int passing = 0;
  int failing = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index m = rng.integer(1, 8);
    const auto pq = random_in_range(rng, m, rng.integer(1, static_cast<int>(m)));
    const auto spec = spectrum(pq);
    const Vector center = -0.5 * spec.U1 * spec.lambda1.cwiseInverse().asDiagonal() * spec.U1.transpose() * pq.c;
    // level(center + t v) = t^2 v'Hv, sampled in [0, 1.5]
    const Vector v = rng.normal_vector(m);
    const double vhv = v.dot(pq.H * v);
    if (vhv < 1e-12) continue;
    const double target = rng.uniform(0.0, 1.5);
    const double t = std::sqrt(target / vhv);
    const Vector u = center + t * v;
    const double level = concavity_level(pq, spec, u);
    CHECK(level == doctest::Approx(target).epsilon(1e-8).scale(1e-8));
    if (level <= 0.5) {
      CHECK(concave_at(pq, spec, u) == Concavity::concave);
      CHECK(range_curvature(pq, spec, u) <= 1e-9);
      ++passing;
    } else if (level >= 0.55) {
      CHECK(range_curvature(pq, spec, u) > 0.0);
      ++failing;
    }
  }
  CHECK(passing > 10);
  CHECK(failing > 10);
}

TEST_CASE("polytope check") {
  const auto pq = quadratic(Matrix::Identity(2, 2), Vector::Zero(2));
  const auto spec = spectrum(pq);
  Matrix square(2, 4);
  square << -1, -1, 1, 1, -1, 1, -1, 1;
  CHECK(check_polytope(pq, spec, 0.1 * square) == Concavity::concave);
  CHECK(check_polytope(pq, spec, square) == Concavity::not_concave);
}

TEST_CASE("first step of the polytope scenario is certified") {
  const ExperimentConfig cfg = build_scenario("uncontrolled-polytope");
  std::vector<LiftedModel> lifts;
  for (const auto& c : cfg.candidates) lifts.push_back(build_lifted(c.model, c.noise, cfg.horizon));
  const auto pairs = all_pairs(lifts, cfg.initial_belief().filters);
  const Matrix V = enumerate_vertices(BoxRatePolytope{2.0, 1.0, Vector::Zero(2)}, cfg.horizon);
  for (const auto& pq : pairs) CHECK(check_polytope(pq, spectrum(pq), V) == Concavity::concave);
}

TEST_CASE("minimum-norm boundary point") {
  SUBCASE("scalar without linear term") {
    const auto pq = quadratic(Matrix::Constant(1, 1, 3.0), Vector::Zero(1));
    const auto sol = min_norm_boundary(spectrum(pq), pq.c);
    CHECK(sol.z.norm() == doctest::Approx(1.0 / std::sqrt(6.0)));
    CHECK(sol.hard_case);
  }
  SUBCASE("scalar with linear term") {
    const auto pq = quadratic(Matrix::Constant(1, 1, 1.0), Vector::Constant(1, 1.0));
    const auto sol = min_norm_boundary(spectrum(pq), pq.c);
    CHECK(sol.z.norm() == doctest::Approx((std::sqrt(2.0) - 1.0) / 2.0).epsilon(1e-12));
  }
  SUBCASE("isotropic without linear term") {
    const auto pq = quadratic((Matrix(3, 3) << 4, 0, 0, 0, 1, 0, 0, 0, 2).finished(), Vector::Zero(3));
    const auto sol = min_norm_boundary(spectrum(pq), pq.c);
    CHECK(sol.z.norm() == doctest::Approx(1.0 / std::sqrt(8.0)));
    CHECK(std::abs(sol.z[0]) == doctest::Approx(1.0 / std::sqrt(8.0)));
  }
  SUBCASE("random instances lie on the boundary and beat sampled points") {
    TestRng rng(8);
    for (int trial = 0; trial < 30; ++trial) {
      const Eigen::Index m = rng.integer(1, 5);
      auto pq = random_in_range(rng, m, m);
      pq.c *= 0.3;
      const auto spec = spectrum(pq);
      if (concavity_offset(pq, spec) > 0.5) continue;
      const auto sol = min_norm_boundary(spec, pq.c);
      CHECK(std::abs(concavity_level(pq, spec, sol.z) - 0.5) < 1e-10);
      for (int s = 0; s < 200; ++s) {
        // a random boundary point along a ray from the region centre
        const Vector center =
            -0.5 * spec.U1 * spec.lambda1.cwiseInverse().asDiagonal() * spec.U1.transpose() * pq.c;
        const Vector v = rng.normal_vector(m);
        const Vector p = center + v * std::sqrt(0.5 / v.dot(pq.H * v));
        CHECK(p.norm() >= sol.z.norm() - 1e-12);
      }
    }
  }
  CHECK_THROWS_AS(min_norm_boundary(spectrum(quadratic(Matrix::Zero(2, 2), Vector::Zero(2))), Vector::Zero(2)),
                  NumericError);
}

TEST_CASE("energy ball check") {
  const auto pq = quadratic(Matrix::Identity(1, 1), Vector::Zero(1));
  const auto spec = spectrum(pq);
  CHECK(check_energy_ball(pq, spec, 0.1, 1) == Concavity::concave);
  CHECK(check_energy_ball(pq, spec, 1.0, 1) == Concavity::not_concave);
  CHECK(check_energy_ball(pq, spec, 0.1, 6) == Concavity::not_concave);
}
