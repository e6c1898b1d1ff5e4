#include "clafd/open_loop.hpp"
#include "clafd/scenarios.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

using namespace clafd;
using clafd::testing::TestRng;

namespace {

ConstraintSet box(double amp, double rate, const Vector& u_prev, int horizon) {
  return {BoxRatePolytope{amp, rate, u_prev}, horizon, u_prev.size()};
}

ConstraintSet ball(double eps, Eigen::Index n_u, int horizon) {
  return {EnergyBallProduct{eps, Vector::Zero(n_u)}, horizon, n_u};
}

BeliefState belief(const Vector& p) {
  return BeliefState::from_probabilities(p, std::vector<FilterState>(static_cast<std::size_t>(p.size())));
}

PairQuadratic quadratic(const Matrix& H, const Vector& c, double h = 0.0, int i = 0, int j = 1) {
  PairQuadratic pq;
  pq.H = H;
  pq.c = c;
  pq.h = h;
  pq.i = i;
  pq.j = j;
  return pq;
}

using VertexSet = std::set<std::vector<long long>>;

VertexSet as_set(const Matrix& V) {
  VertexSet out;
  for (Eigen::Index k = 0; k < V.cols(); ++k) {
    std::vector<long long> key;
    for (Eigen::Index i = 0; i < V.rows(); ++i) key.push_back(std::llround(V(i, k) * 1e8));
    out.insert(key);
  }
  return out;
}

/// Extreme points of {u : G u <= g} by solving every square subsystem of
/// active constraints.
Matrix brute_force_vertices(const Matrix& G, const Vector& g) {
  const auto n = G.cols();
  const auto rows = G.rows();
  std::vector<Vector> found;
  std::vector<int> pick(static_cast<std::size_t>(n));
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == n) {
      Matrix M(n, n);
      Vector rhs(n);
      for (int k = 0; k < n; ++k) {
        M.row(k) = G.row(pick[static_cast<std::size_t>(k)]);
        rhs[k] = g[pick[static_cast<std::size_t>(k)]];
      }
      Eigen::FullPivLU<Matrix> lu(M);
      if (lu.rank() < n) return;
      const Vector u = lu.solve(rhs);
      if (((G * u - g).array() <= 1e-9).all()) found.push_back(u);
      return;
    }
    for (int r = start; r < rows; ++r) {
      pick[static_cast<std::size_t>(depth)] = r;
      rec(r + 1, depth + 1);
    }
  };
  rec(0, 0);
  Matrix V(n, static_cast<Eigen::Index>(found.size()));
  for (std::size_t k = 0; k < found.size(); ++k) V.col(static_cast<Eigen::Index>(k)) = found[k];
  return V;
}

/// H-representation of a box-rate polytope.
std::pair<Matrix, Vector> h_representation(const BoxRatePolytope& p, int horizon) {
  const auto nu = p.u_prev.size();
  const auto m = horizon * nu;
  std::vector<std::pair<Vector, double>> rows;
  for (int l = 0; l < horizon; ++l) {
    for (Eigen::Index ch = 0; ch < nu; ++ch) {
      const Eigen::Index idx = l * nu + ch;
      for (double s : {1.0, -1.0}) {
        rows.push_back({s * Vector::Unit(m, idx), p.amp_bound});
        Vector a = s * Vector::Unit(m, idx);
        double b = p.rate_bound;
        if (l == 0) {
          b += s * p.u_prev[ch];
        } else {
          a[idx - nu] -= s;
        }
        rows.push_back({a, b});
      }
    }
  }
  Matrix G(static_cast<Eigen::Index>(rows.size()), m);
  Vector g(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    G.row(static_cast<Eigen::Index>(k)) = rows[k].first.transpose();
    g[static_cast<Eigen::Index>(k)] = rows[k].second;
  }
  return {G, g};
}

double exhaustive_bound(std::span<const PairQuadratic> pairs, const BeliefState& b, const Matrix& V) {
  double best = 1e300;
  for (Eigen::Index k = 0; k < V.cols(); ++k) best = std::min(best, weighted_bound(pairs, b, V.col(k)));
  return best;
}

}  // namespace

TEST_CASE("vertex enumeration") {
  SUBCASE("rate binds inside the box") {
    const Matrix V = enumerate_vertices(BoxRatePolytope{2.0, 1.0, Vector::Zero(1)}, 1);
    REQUIRE(V.cols() == 2);
    CHECK(V(0, 0) == -1.0);
    CHECK(V(0, 1) == 1.0);
  }
  SUBCASE("previous input at the amplitude limit") {
    const Matrix V = enumerate_vertices(BoxRatePolytope{2.0, 1.0, Vector::Constant(1, 2.0)}, 1);
    REQUIRE(V.cols() == 2);
    CHECK(V(0, 0) == 1.0);
    CHECK(V(0, 1) == 2.0);
  }
  SUBCASE("agrees with the H-representation oracle") {
    TestRng rng(2);
    for (int trial = 0; trial < 25; ++trial) {
      const int horizon = rng.integer(1, 4);
      const Eigen::Index nu = horizon <= 2 ? rng.integer(1, 2) : 1;
      BoxRatePolytope p{rng.uniform(0.5, 2.5), rng.uniform(0.2, 2.0), Vector::Zero(nu)};
      for (Eigen::Index ch = 0; ch < nu; ++ch) p.u_prev[ch] = rng.uniform(-p.amp_bound, p.amp_bound);
      if (trial == 0) p = {2.0, 1.0, Vector::Zero(1)};
      const auto [G, g] = h_representation(p, horizon);
      CHECK(as_set(enumerate_vertices(p, horizon)) == as_set(brute_force_vertices(G, g)));
    }
  }
  SUBCASE("cap") {
    CHECK_THROWS_AS(enumerate_vertices(BoxRatePolytope{2.0, 1.0, Vector::Zero(2)}, 5, 10), NumericError);
  }
}

TEST_CASE("constraint sets") {
  const ConstraintSet cs = box(2.0, 1.0, Vector::Constant(1, 2.0), 3);
  CHECK(cs.contains(cs.rest_point()));
  CHECK(cs.rest_point().isApprox((Vector(3) << 1.0, 0.0, 0.0).finished()));
  const Vector fixed = cs.restore_feasibility((Vector(3) << -2.0, 2.0, 5.0).finished());
  CHECK(cs.contains(fixed));
  const ConstraintSet b = ball(2.0, 2, 2);
  const Vector scaled = b.restore_feasibility((Vector(4) << 3.0, 4.0, 0.1, 0.0).finished());
  CHECK(scaled.head(2).norm() == doctest::Approx(std::sqrt(2.0)));
  CHECK(scaled[2] == doctest::Approx(0.1));
}

TEST_CASE("distance maximization") {
  SUBCASE("ties on a square go to the first vertex") {
    const std::vector<PairQuadratic> pairs{quadratic(Matrix::Identity(2, 2), Vector::Zero(2))};
    const DesignResult r = design_bd(pairs, box(1.0, 10.0, Vector::Zero(1), 2));
    CHECK(r.u_seq.isApprox((Vector(2) << -1.0, -1.0).finished()));
    CHECK(r.objective_value == doctest::Approx(-2.0));
  }
  SUBCASE("ball picks the top eigenvector") {
    const Matrix H = (Matrix(2, 2) << 1.0, 0.0, 0.0, 3.0).finished();
    const std::vector<PairQuadratic> pairs{quadratic(H, Vector::Zero(2))};
    const DesignResult r = design_bd(pairs, ball(2.0, 2, 1));
    CHECK(r.objective_value == doctest::Approx(-6.0).epsilon(1e-9));
    CHECK(std::abs(r.u_seq[1]) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-6));
  }
  SUBCASE("matches the exhaustive vertex optimum") {
    TestRng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<PairQuadratic> pairs{testing::random_pair(rng, 1, 4), testing::random_pair(rng, 1, 4)};
      pairs[1].i = 0;
      pairs[1].j = 2;
      const ConstraintSet cs = box(2.0, 1.0, Vector::Zero(1), 4);
      const Matrix V = enumerate_vertices(std::get<BoxRatePolytope>(cs.region), 4);
      double best = 1e300;
      for (Eigen::Index k = 0; k < V.cols(); ++k) {
        best = std::min(best, -bhatt_distance(pairs[0], V.col(k)) - bhatt_distance(pairs[1], V.col(k)));
      }
      CHECK(design_bd(pairs, cs).objective_value == doctest::Approx(best).epsilon(1e-12));
    }
  }
}

TEST_CASE("quadratic Taylor design") {
  SUBCASE("constant objective returns the origin") {
    const std::vector<PairQuadratic> pairs{quadratic(Matrix::Zero(2, 2), Vector::Zero(2), 0.4)};
    const DesignResult r = design_qta(pairs, belief(Vector::Constant(2, 0.5)), box(2.0, 1.0, Vector::Zero(1), 2));
    CHECK(r.u_seq.isZero(0.0));
  }
  SUBCASE("without linear term it follows the distance design on a ball") {
    const Matrix H = (Matrix(3, 3) << 2.0, 0.5, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 0.3).finished();
    const std::vector<PairQuadratic> pairs{quadratic(H, Vector::Zero(3), 0.1)};
    const ConstraintSet cs = ball(1.5, 3, 1);
    const Vector bd = design_bd(pairs, cs).u_seq;
    const Vector qta = design_qta(pairs, belief(Vector::Constant(2, 0.5)), cs).u_seq;
    CHECK(std::abs(bd.normalized().dot(qta.normalized())) == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("matches vertex and stationary-point oracle") {
    TestRng rng(23);
    for (int trial = 0; trial < 10; ++trial) {
      const std::vector<PairQuadratic> pairs{testing::random_pair(rng, 1, 3)};
      const BeliefState b = belief(Vector::Constant(2, 0.5));
      const ConstraintSet cs = box(2.0, 1.0, Vector::Zero(1), 3);
      const QuadraticForm t = taylor_form(pairs[0]);
      const Matrix V = enumerate_vertices(std::get<BoxRatePolytope>(cs.region), 3);
      double best = 1e300;
      for (Eigen::Index k = 0; k < V.cols(); ++k) best = std::min(best, 0.5 * t(V.col(k)));
      Eigen::SelfAdjointEigenSolver<Matrix> es(t.P);
      if (es.eigenvalues().minCoeff() > 0.0) {
        const Vector s = t.P.llt().solve(-0.5 * t.q);
        if (cs.contains(s)) best = std::min(best, 0.5 * t(s));
      }
      CHECK(design_qta(pairs, b, cs).objective_value == doctest::Approx(best).epsilon(1e-10));
    }
  }
}

TEST_CASE("bound design") {
  SUBCASE("identical models") {
    const std::vector<PairQuadratic> pairs{quadratic(Matrix::Zero(2, 2), Vector::Zero(2))};
    const DesignResult r = design_bc(pairs, belief(Vector::Constant(2, 0.5)), box(2.0, 1.0, Vector::Zero(1), 2));
    CHECK(r.u_seq.isZero(0.0));
    CHECK(r.objective_value == doctest::Approx(0.5));
  }
  SUBCASE("single certified pair maximizes the distance over vertices") {
    TestRng rng(29);
    int checked = 0;
    for (int trial = 0; trial < 20; ++trial) {
      const std::vector<PairQuadratic> pairs{testing::random_pair(rng, 1, 3, 2, 2, 20.0)};
      const ConstraintSet cs = box(1.0, 1.0, Vector::Zero(1), 3);
      const DesignResult bc = design_bc(pairs, belief(Vector::Constant(2, 0.5)), cs);
      if (bc.certified != Certificate::yes) continue;
      ++checked;
      CHECK(bc.u_seq.isApprox(design_bd(pairs, cs).u_seq));
    }
    CHECK(checked > 0);
  }
  SUBCASE("first step of the polytope scenario") {
    const ExperimentConfig cfg = build_scenario("uncontrolled-polytope");
    std::vector<LiftedModel> lifts;
    for (const auto& c : cfg.candidates) lifts.push_back(build_lifted(c.model, c.noise, cfg.horizon));
    const BeliefState b = cfg.initial_belief();
    const auto pairs = all_pairs(lifts, b.filters);
    const ConstraintSet cs = cfg.constraint_set(cfg.initial_input());
    const DesignResult r = design_bc(pairs, b, cs);
    const Matrix V = enumerate_vertices(std::get<BoxRatePolytope>(cs.region), cfg.horizon);
    CHECK(r.objective_value == doctest::Approx(exhaustive_bound(pairs, b, V)).epsilon(1e-14));
    CHECK(r.certified == Certificate::yes);
  }
  SUBCASE("ball design stays feasible and improves on the centre") {
    TestRng rng(31);
    const std::vector<PairQuadratic> pairs{testing::random_pair(rng, 2, 3), testing::random_pair(rng, 2, 3)};
    std::vector<PairQuadratic> p = pairs;
    p[1].j = 2;
    const BeliefState b = belief((Vector(3) << 0.2, 0.5, 0.3).finished());
    const ConstraintSet cs = ball(2.0, 2, 3);
    const DesignResult r = design_bc(p, b, cs);
    CHECK(cs.contains(r.u_seq));
    CHECK(r.objective_value <= weighted_bound(p, b, Vector::Zero(6)) + 1e-15);
  }
}

TEST_CASE("summed bound design") {
  TestRng rng(37);
  const StateSpaceModel m0 = testing::random_model(rng, 2, 1, 1);
  const StateSpaceModel m1 = testing::random_model(rng, 2, 1, 1);
  const NoiseModel n = testing::random_noise(rng, 2, 1);
  const FilterState f0{rng.normal_vector(2), rng.spd(2)};
  const FilterState f1{rng.normal_vector(2), rng.spd(2)};
  const BeliefState b = belief((Vector(2) << 0.4, 0.6).finished());
  const auto group = [&](int len) {
    return std::vector<PairQuadratic>{pair_quadratic(build_lifted(m0, n, len), build_lifted(m1, n, len), f0, f1)};
  };

  SUBCASE("horizon one equals the single bound") {
    const ConstraintSet cs = box(2.0, 1.0, Vector::Zero(1), 1);
    const auto g = group(1);
    CHECK(design_sbc({g}, b, cs).objective_value == doctest::Approx(design_bc(g, b, cs).objective_value));
  }
  SUBCASE("identical models") {
    const PrefixPairs same{{quadratic(Matrix::Zero(1, 1), Vector::Zero(1))},
                           {quadratic(Matrix::Zero(2, 2), Vector::Zero(2))}};
    CHECK(design_sbc(same, b, box(2.0, 1.0, Vector::Zero(1), 2)).u_seq.isZero(0.0));
  }
  SUBCASE("horizon three against exhaustive vertices") {
    const ConstraintSet cs = box(2.0, 1.0, Vector::Zero(1), 3);
    const PrefixPairs groups{group(1), group(2), group(3)};
    const Matrix V = enumerate_vertices(std::get<BoxRatePolytope>(cs.region), 3);
    double best = 1e300;
    for (Eigen::Index k = 0; k < V.cols(); ++k) {
      double total = 0.0;
      for (int g = 0; g < 3; ++g) total += weighted_bound(groups[static_cast<std::size_t>(g)], b, V.col(k).head(g + 1));
      best = std::min(best, total);
    }
    CHECK(design_sbc(groups, b, cs).objective_value == doctest::Approx(best).epsilon(1e-13));
  }
}

TEST_CASE("linearize-and-minimize") {
  SUBCASE("concave quadratic on a polytope ends at a vertex") {
    const ConstraintSet cs = box(2.0, 1.0, Vector::Zero(1), 3);
    const Matrix P = -Matrix::Identity(3, 3);
    const Vector q = (Vector(3) << 0.3, -0.2, 0.1).finished();
    const auto f = [&](const Vector& u) { return u.dot(P * u) + q.dot(u); };
    const auto g = [&](const Vector& u) -> Vector { return 2.0 * P * u + q; };
    const FwResult r = fw_concave_min(f, g, cs, {Vector::Zero(3)});
    const Matrix V = enumerate_vertices(std::get<BoxRatePolytope>(cs.region), 3);
    bool at_vertex = false;
    for (Eigen::Index k = 0; k < V.cols(); ++k) at_vertex = at_vertex || (V.col(k) - r.u).norm() < 1e-12;
    CHECK(at_vertex);
    for (std::size_t k = 1; k < r.trace.size(); ++k) CHECK(r.trace[k] <= r.trace[k - 1]);
  }
  SUBCASE("ball converges to the top eigenvector") {
    const Matrix H = (Matrix(3, 3) << 1.0, 0.2, 0.0, 0.2, 2.0, 0.1, 0.0, 0.1, 0.5).finished();
    const PairQuadratic pq = quadratic(H, Vector::Zero(3));
    const ConstraintSet cs = ball(0.5, 3, 1);
    const auto f = [&](const Vector& u) { return bhatt_coefficient(pq, u); };
    const auto g = [&](const Vector& u) -> Vector { return -bhatt_coefficient(pq, u) * 2.0 * H * u; };
    const FwResult r = fw_concave_min(f, g, cs, {(Vector(3) << 0.1, 0.05, 0.2).finished()}, 500);
    Eigen::SelfAdjointEigenSolver<Matrix> es(H);
    const Vector top = es.eigenvectors().col(2);
    CHECK(r.u.norm() == doctest::Approx(std::sqrt(0.5)).epsilon(1e-9));
    CHECK(std::abs(r.u.normalized().dot(top)) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("open-loop design") {
  const NoiseModel n{Matrix::Constant(1, 1, 0.1), Matrix::Constant(1, 1, 0.5), Matrix::Zero(1, 1)};
  const StateSpaceModel a{Matrix::Zero(1, 1), Matrix::Constant(1, 1, 1.0), Matrix::Ones(1, 1)};
  StateSpaceModel bmodel = a;
  bmodel.B(0, 0) = 0.4;
  const FilterState fs{Vector::Zero(1), Matrix::Constant(1, 1, 0.2)};
  OpenLoopOptions opts;
  opts.horizon = 3;
  opts.n_starts = 20;
  opts.seed = 3;
  const EnergyBallProduct region{0.8, Vector::Constant(1, 0.5)};
  const ConstraintSet cs{region, 3, 1};

  SUBCASE("identical models give the centre sequence") {
    const std::vector<StateSpaceModel> models{a, a};
    const std::vector<NoiseModel> noises{n, n};
    const OpenLoopPlan plan = design_ol(models, noises, BeliefState::from_probabilities(Vector::Constant(2, 0.5), {fs, fs}), cs, opts);
    CHECK(plan.u_seq.isApprox(Vector::Constant(3, 0.5)));
  }
  SUBCASE("single model") {
    const std::vector<StateSpaceModel> models{a};
    const std::vector<NoiseModel> noises{n};
    const OpenLoopPlan plan = design_ol(models, noises, BeliefState::from_probabilities(Vector::Ones(1), {fs}), cs, opts);
    CHECK(plan.u_seq.isApprox(Vector::Constant(3, 0.5)));
  }
  SUBCASE("static toy against random search") {
    const std::vector<StateSpaceModel> models{a, bmodel};
    const std::vector<NoiseModel> noises{n, n};
    const BeliefState b = BeliefState::from_probabilities(Vector::Constant(2, 0.5), {fs, fs});
    const OpenLoopPlan plan = design_ol(models, noises, b, cs, opts);
    CHECK(cs.contains(plan.u_seq));

    const PairQuadratic pq = pair_quadratic(build_lifted(a, n, 3), build_lifted(bmodel, n, 3), fs, fs);
    const std::vector<PairQuadratic> pairs{pq};
    TestRng rng(99);
    const double r = std::sqrt(0.8);
    double best = 1e300;
    for (int s = 0; s < 1'000'000; ++s) {
      const Vector u = (Vector(3) << 0.5 + rng.uniform(-r, r), 0.5 + rng.uniform(-r, r), 0.5 + rng.uniform(-r, r))
                           .finished();
      best = std::min(best, weighted_bound(pairs, b, u));
    }
    CHECK(plan.objective_value <= best + 1e-3);
    CHECK(plan.objective_value == doctest::Approx(weighted_bound(pairs, b, plan.u_seq)));
  }
}
