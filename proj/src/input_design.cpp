#include "clafd/input_design.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>

namespace clafd {

// ---------------------------------------------------------------------------
// Constraint sets

void ConstraintSet::validate() const {
  if (horizon < 1) throw DimensionError("constraint horizon must be at least 1");
  if (n_u < 1) throw DimensionError("constraint set needs n_u >= 1");
  if (const auto* p = std::get_if<BoxRatePolytope>(&region)) {
    if (!(p->amp_bound > 0.0) || !(p->rate_bound > 0.0)) throw NumericError("box-rate bounds must be positive");
    if (p->u_prev.size() != n_u) throw DimensionError("u_prev must have n_u entries");
  } else {
    const auto& b = std::get<EnergyBallProduct>(region);
    if (!(b.energy_bound > 0.0)) throw NumericError("energy bound must be positive");
    if (b.center.size() != n_u) throw DimensionError("ball centre must have n_u entries");
  }
}

double ConstraintSet::violation(const Vector& u) const {
  if (u.size() != dim()) throw DimensionError("input sequence has wrong length");
  double worst = 0.0;
  if (const auto* p = std::get_if<BoxRatePolytope>(&region)) {
    Vector prev = p->u_prev;
    for (int l = 0; l < horizon; ++l) {
      const Vector ul = u.segment(l * n_u, n_u);
      worst = std::max(worst, ul.cwiseAbs().maxCoeff() - p->amp_bound);
      worst = std::max(worst, (ul - prev).cwiseAbs().maxCoeff() - p->rate_bound);
      prev = ul;
    }
  } else {
    const auto& b = std::get<EnergyBallProduct>(region);
    for (int l = 0; l < horizon; ++l) {
      worst = std::max(worst, (u.segment(l * n_u, n_u) - b.center).squaredNorm() - b.energy_bound);
    }
  }
  return std::max(worst, 0.0);
}

Vector ConstraintSet::center_sequence() const {
  Vector out = Vector::Zero(dim());
  if (const auto* b = std::get_if<EnergyBallProduct>(&region)) {
    for (int l = 0; l < horizon; ++l) out.segment(l * n_u, n_u) = b->center;
  }
  return out;
}

Vector ConstraintSet::rest_point() const {
  if (is_polytope()) {
    // Walk each channel towards zero as fast as the rate bound allows.
    return restore_feasibility(Vector::Zero(dim()));
  }
  return center_sequence();
}

Vector ConstraintSet::restore_feasibility(const Vector& u) const {
  if (u.size() != dim()) throw DimensionError("input sequence has wrong length");
  Vector out = u;
  if (const auto* p = std::get_if<BoxRatePolytope>(&region)) {
    Vector prev = p->u_prev;
    for (int l = 0; l < horizon; ++l) {
      for (Eigen::Index ch = 0; ch < n_u; ++ch) {
        const double lo = std::max(prev[ch] - p->rate_bound, -p->amp_bound);
        const double hi = std::min(prev[ch] + p->rate_bound, p->amp_bound);
        double& x = out[l * n_u + ch];
        x = lo > hi ? std::clamp(x, -p->amp_bound, p->amp_bound) : std::clamp(x, lo, hi);
        prev[ch] = x;
      }
    }
  } else {
    const auto& b = std::get<EnergyBallProduct>(region);
    const double radius = std::sqrt(b.energy_bound);
    for (int l = 0; l < horizon; ++l) {
      auto seg = out.segment(l * n_u, n_u);
      const Vector offset = seg - b.center;
      const double n = offset.norm();
      if (n > radius) seg = b.center + offset * (radius / n);
    }
  }
  return out;
}

const char* to_string(Certificate c) {
  switch (c) {
    case Certificate::yes:
      return "yes";
    case Certificate::no:
      return "no";
    case Certificate::not_applicable:
      return "n/a";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Linearize-and-minimize

namespace {

Vector ball_lmo(const EnergyBallProduct& ball, Eigen::Index n_u, int horizon, const Vector& grad,
                const Vector& current) {
  const double radius = std::sqrt(ball.energy_bound);
  Vector s = current;
  for (int l = 0; l < horizon; ++l) {
    const auto g = grad.segment(l * n_u, n_u);
    const double n = g.norm();
    if (n > 0.0) s.segment(l * n_u, n_u) = ball.center - g * (radius / n);
  }
  return s;
}

Eigen::Index first_argmin(const Vector& values, double rel_tol) {
  const double best = values.minCoeff();
  const double slack = rel_tol * std::max(1.0, std::abs(best));
  for (Eigen::Index k = 0; k < values.size(); ++k) {
    if (values[k] <= best + slack) return k;
  }
  return 0;
}

}  // namespace

FwResult fw_concave_min(const std::function<double(const Vector&)>& value_fn,
                        const std::function<Vector(const Vector&)>& grad_fn, const ConstraintSet& cs,
                        const std::vector<Vector>& starts, int max_iterations, double tol) {
  cs.validate();
  if (starts.empty()) throw DimensionError("fw_concave_min needs at least one start");
  Matrix vertices;
  if (const auto* p = std::get_if<BoxRatePolytope>(&cs.region)) vertices = enumerate_vertices(*p, cs.horizon);

  auto lmo = [&](const Vector& g, const Vector& u) -> Vector {
    if (cs.is_polytope()) {
      const Vector scores = vertices.transpose() * g;
      return vertices.col(first_argmin(scores, 0.0));
    }
    return ball_lmo(std::get<EnergyBallProduct>(cs.region), cs.n_u, cs.horizon, g, u);
  };
  auto checked = [&](const Vector& u) {
    const double v = value_fn(u);
    if (!std::isfinite(v)) throw NumericError("objective is not finite");
    return v;
  };

  FwResult best;
  best.value = std::numeric_limits<double>::infinity();
  int total_iterations = 0;
  for (const Vector& start : starts) {
    Vector u = cs.restore_feasibility(start);
    double v = checked(u);
    std::vector<double> trace{v};
    for (int it = 0; it < max_iterations; ++it) {
      const Vector g = grad_fn(u);
      const Vector s = lmo(g, u);
      const Vector dir = s - u;
      if (!(g.dot(dir) < 0.0)) break;  // stationary: no descent direction in the set
      Vector cand = s;
      double fc = checked(cand);
      for (double gamma = 0.5; !(fc < v) && gamma > 1e-8; gamma *= 0.5) {
        cand = u + gamma * dir;
        fc = checked(cand);
      }
      if (!(fc < v)) break;
      const double decrease = v - fc;
      u = cand;
      v = fc;
      trace.push_back(v);
      ++total_iterations;
      if (decrease < tol) break;
    }
    if (v < best.value) {
      best.u = u;
      best.value = v;
      best.trace = std::move(trace);
    }
  }
  best.iterations = total_iterations;
  return best;
}

// ---------------------------------------------------------------------------
// Objectives

namespace {

struct BoundTerm {
  PairQuadratic pq;
  double weight = 0.0;
  Eigen::Index dim = 0;
};

/// sum_k w_k exp(-d_k(u_{1:dim_k})).
struct BoundObjective {
  std::vector<BoundTerm> terms;
  Eigen::Index m = 0;

  double value(const Vector& u) const {
    double total = 0.0;
    for (const auto& t : terms) total += t.weight * bhatt_coefficient(t.pq, u.head(t.dim));
    return total;
  }

  Vector grad(const Vector& u) const {
    Vector g = Vector::Zero(m);
    for (const auto& t : terms) {
      const Vector uh = u.head(t.dim);
      g.head(t.dim) -= t.weight * bhatt_coefficient(t.pq, uh) * (2.0 * t.pq.H * uh + t.pq.c);
    }
    return g;
  }

  Vector values(const Matrix& V) const {
    Vector total = Vector::Zero(V.cols());
    for (const auto& t : terms) {
      const auto Vh = V.topRows(t.dim);
      const Matrix HV = t.pq.H * Vh;
      const Vector d = (Vh.array() * HV.array()).colwise().sum().transpose().matrix() +
                       Vh.transpose() * t.pq.c + Vector::Constant(V.cols(), t.pq.h);
      total += t.weight * (-d.array()).exp().matrix();
    }
    return total;
  }

  bool constant() const {
    return std::all_of(terms.begin(), terms.end(), [](const BoundTerm& t) {
      return t.weight == 0.0 || (t.pq.H.isZero(0.0) && t.pq.c.isZero(0.0));
    });
  }
};

Vector quadratic_values(const QuadraticForm& q, const Matrix& V) {
  const Matrix PV = q.P * V;
  return (V.array() * PV.array()).colwise().sum().transpose().matrix() + V.transpose() * q.q +
         Vector::Constant(V.cols(), q.r);
}

bool quadratic_constant(const QuadraticForm& q) {
  const double scale = std::max(1.0, std::abs(q.r));
  return q.P.cwiseAbs().maxCoeff() <= 1e-14 * scale && q.q.cwiseAbs().maxCoeff() <= 1e-14 * scale;
}

/// The design problem expressed relative to the constraint-set centre.
struct LocalProblem {
  ConstraintSet cs;  // ball centres moved to the origin
  Vector offset;     // add back to obtain the applied inputs
};

LocalProblem localize(const ConstraintSet& cs) {
  cs.validate();
  LocalProblem lp{cs, cs.center_sequence()};
  if (auto* b = std::get_if<EnergyBallProduct>(&lp.cs.region)) b->center.setZero();
  return lp;
}

PairQuadratic localize_pair(const PairQuadratic& pq, const Vector& offset) {
  if (pq.dim() != offset.size()) {
    return offset.head(pq.dim()).isZero(0.0) ? pq : translated(pq, offset.head(pq.dim()));
  }
  return offset.isZero(0.0) ? pq : translated(pq, offset);
}

std::vector<Vector> ball_starts(const ConstraintSet& local, std::span<const PairQuadratic> pairs,
                                const DesignOptions& opts) {
  const auto& ball = std::get<EnergyBallProduct>(local.region);
  const double radius = std::sqrt(ball.energy_bound);
  const Eigen::Index m = local.dim();
  std::vector<Vector> starts{Vector::Zero(m)};
  for (const auto& pq : pairs) {
    if (pq.dim() != m || pq.c.isZero(0.0)) continue;
    Vector s = Vector::Zero(m);
    for (int l = 0; l < local.horizon; ++l) {
      const auto seg = pq.c.segment(l * local.n_u, local.n_u);
      const double n = seg.norm();
      if (n > 0.0) s.segment(l * local.n_u, local.n_u) = -seg * (radius / n);
    }
    starts.push_back(std::move(s));
  }
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;
  for (int k = 0; k < opts.random_starts; ++k) {
    Vector s(m);
    for (int l = 0; l < local.horizon; ++l) {
      Vector dir(local.n_u);
      for (Eigen::Index i = 0; i < local.n_u; ++i) dir[i] = normal(rng);
      const double scale = radius * std::pow(uniform(rng), 1.0 / static_cast<double>(local.n_u));
      s.segment(l * local.n_u, local.n_u) = dir.normalized() * scale;
    }
    starts.push_back(std::move(s));
  }
  return starts;
}

DesignResult finish(const LocalProblem& lp, const Vector& u_local, double value, Certificate cert,
                    int iterations) {
  DesignResult r;
  r.u_seq = u_local + lp.offset;
  r.first_input = r.u_seq.head(lp.cs.n_u);
  r.objective_value = value;
  r.certified = cert;
  r.iterations = iterations;
  return r;
}

/// Best vertex, with ties going to the lexicographically smallest one (the
/// vertex matrix is sorted).
std::pair<Eigen::Index, double> best_vertex(const Vector& values) {
  const Eigen::Index k = first_argmin(values, 1e-12);
  return {k, values[k]};
}

/// Minimizes a quadratic form: vertex search on the polytope, multi-start
/// linearize-and-minimize on ball products. If the form is convex its
/// stationary point is added as a candidate when feasible.
DesignResult minimize_quadratic(const LocalProblem& lp, const QuadraticForm& q,
                                std::span<const PairQuadratic> start_pairs, bool try_stationary,
                                const DesignOptions& opts) {
  if (quadratic_constant(q)) {
    const Vector u = lp.cs.rest_point();
    return finish(lp, u, q(u), Certificate::not_applicable, 0);
  }

  std::optional<Vector> stationary;
  if (try_stationary) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(q.P));
    const double scale = std::max(1e-300, es.eigenvalues().cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() >= -1e-12 * scale) {
      const Vector u = Eigen::CompleteOrthogonalDecomposition<Matrix>(2.0 * symmetrized(q.P)).solve(-q.q);
      if ((2.0 * q.P * u + q.q).norm() <= 1e-9 * std::max(1.0, q.q.norm()) && lp.cs.contains(u)) stationary = u;
    }
  }

  Vector best_u;
  double best_value = 0.0;
  int iterations = 0;
  if (const auto* p = std::get_if<BoxRatePolytope>(&lp.cs.region)) {
    const Matrix V = enumerate_vertices(*p, lp.cs.horizon, opts.vertex_cap);
    const auto [k, v] = best_vertex(quadratic_values(q, V));
    best_u = V.col(k);
    best_value = v;
    iterations = static_cast<int>(V.cols());
  } else {
    const Matrix Ps = symmetrized(q.P);
    const FwResult fw = fw_concave_min([&](const Vector& u) { return q(u); },
                                       [&](const Vector& u) -> Vector { return 2.0 * Ps * u + q.q; }, lp.cs,
                                       ball_starts(lp.cs, start_pairs, opts), opts.max_iterations);
    best_u = fw.u;
    best_value = fw.value;
    iterations = fw.iterations;
  }
  if (stationary && q(*stationary) < best_value) {
    best_u = *stationary;
    best_value = q(best_u);
  }
  return finish(lp, best_u, best_value, Certificate::not_applicable, iterations);
}

Certificate certify(const LocalProblem& lp, const BoundObjective& obj, const Matrix* vertices) {
  for (const auto& t : obj.terms) {
    const ConcavitySpectrum spec = spectrum(t.pq);
    Concavity verdict;
    if (vertices != nullptr) {
      verdict = check_polytope(t.pq, spec, vertices->topRows(t.dim));
    } else {
      const double eps = std::get<EnergyBallProduct>(lp.cs.region).energy_bound;
      verdict = check_energy_ball(t.pq, spec, eps, static_cast<int>(t.dim / lp.cs.n_u));
    }
    if (verdict != Concavity::concave) return Certificate::no;
  }
  return Certificate::yes;
}

DesignResult minimize_bound(const LocalProblem& lp, const BoundObjective& obj,
                            std::span<const PairQuadratic> start_pairs, const DesignOptions& opts) {
  if (const auto* p = std::get_if<BoxRatePolytope>(&lp.cs.region)) {
    const Matrix V = enumerate_vertices(*p, lp.cs.horizon, opts.vertex_cap);
    const Certificate cert = certify(lp, obj, &V);
    if (obj.constant()) {
      const Vector u = lp.cs.rest_point();
      return finish(lp, u, obj.value(u), cert, 0);
    }
    const auto [k, v] = best_vertex(obj.values(V));
    return finish(lp, V.col(k), v, cert, static_cast<int>(V.cols()));
  }
  const Certificate cert = certify(lp, obj, nullptr);
  if (obj.constant()) {
    const Vector u = Vector::Zero(lp.cs.dim());
    return finish(lp, u, obj.value(u), cert, 0);
  }
  const FwResult fw = fw_concave_min([&](const Vector& u) { return obj.value(u); },
                                     [&](const Vector& u) { return obj.grad(u); }, lp.cs,
                                     ball_starts(lp.cs, start_pairs, opts), opts.max_iterations);
  return finish(lp, fw.u, fw.value, cert, fw.iterations);
}

void check_pairs(std::span<const PairQuadratic> pairs, const ConstraintSet& cs) {
  for (const auto& pq : pairs) {
    if (pq.dim() != cs.dim()) throw DimensionError("pair dimension does not match the constraint set");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Designs

DesignResult design_bd(std::span<const PairQuadratic> pairs, const ConstraintSet& cs, const DesignOptions& opts) {
  check_pairs(pairs, cs);
  const LocalProblem lp = localize(cs);
  const Eigen::Index m = cs.dim();
  QuadraticForm q{Matrix::Zero(m, m), Vector::Zero(m), 0.0};
  std::vector<PairQuadratic> local;
  for (const auto& pq : pairs) {
    local.push_back(localize_pair(pq, lp.offset));
    q.P -= local.back().H;
    q.q -= local.back().c;
    q.r -= local.back().h;
  }
  return minimize_quadratic(lp, q, local, false, opts);
}

DesignResult design_qta(std::span<const PairQuadratic> pairs, const BeliefState& b, const ConstraintSet& cs,
                        const DesignOptions& opts) {
  check_pairs(pairs, cs);
  const LocalProblem lp = localize(cs);
  const Vector w = pair_weights(pairs, b);
  const Eigen::Index m = cs.dim();
  QuadraticForm q{Matrix::Zero(m, m), Vector::Zero(m), 0.0};
  std::vector<PairQuadratic> local;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    local.push_back(localize_pair(pairs[k], lp.offset));
    const QuadraticForm t = taylor_form(local.back());
    const double wk = w[static_cast<Eigen::Index>(k)];
    q.P += wk * t.P;
    q.q += wk * t.q;
    q.r += wk * t.r;
  }
  return minimize_quadratic(lp, q, local, true, opts);
}

DesignResult design_bc(std::span<const PairQuadratic> pairs, const BeliefState& b, const ConstraintSet& cs,
                       const DesignOptions& opts) {
  check_pairs(pairs, cs);
  const LocalProblem lp = localize(cs);
  const Vector w = pair_weights(pairs, b);
  BoundObjective obj;
  obj.m = cs.dim();
  std::vector<PairQuadratic> local;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    local.push_back(localize_pair(pairs[k], lp.offset));
    obj.terms.push_back({local.back(), w[static_cast<Eigen::Index>(k)], cs.dim()});
  }
  return minimize_bound(lp, obj, local, opts);
}

DesignResult design_sbc(const PrefixPairs& prefix_pairs, const BeliefState& b, const ConstraintSet& cs,
                        const DesignOptions& opts) {
  if (static_cast<int>(prefix_pairs.size()) != cs.horizon) {
    throw DimensionError("design_sbc needs one pair group per sub-horizon");
  }
  const LocalProblem lp = localize(cs);
  BoundObjective obj;
  obj.m = cs.dim();
  std::vector<PairQuadratic> full_horizon;
  for (std::size_t g = 0; g < prefix_pairs.size(); ++g) {
    const Eigen::Index dim = static_cast<Eigen::Index>(g + 1) * cs.n_u;
    const Vector w = pair_weights(prefix_pairs[g], b);
    for (std::size_t k = 0; k < prefix_pairs[g].size(); ++k) {
      const PairQuadratic& pq = prefix_pairs[g][k];
      if (pq.dim() != dim) throw DimensionError("prefix pair has the wrong dimension");
      PairQuadratic local = localize_pair(pq, lp.offset);
      if (dim == cs.dim()) full_horizon.push_back(local);
      obj.terms.push_back({std::move(local), w[static_cast<Eigen::Index>(k)], dim});
    }
  }
  return minimize_bound(lp, obj, full_horizon, opts);
}

}  // namespace clafd
