#include "clafd/open_loop.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace clafd {

Vector OpenLoopPlan::input_at(int k, const ConstraintSet& step_set) const {
  if (horizon < 1) throw DimensionError("open-loop plan is empty");
  const Vector u = u_seq.segment(static_cast<Eigen::Index>(k % horizon) * n_u, n_u);
  ConstraintSet one = step_set;
  one.horizon = 1;
  return one.restore_feasibility(u);
}

namespace {

struct LogBound {
  std::vector<PairQuadratic> pairs;
  Vector log_weights;

  // log sum_k w_k exp(-d_k(u)) and its gradient.
  double eval(const Vector& u, Vector* grad) const {
    const auto n = static_cast<Eigen::Index>(pairs.size());
    Vector a(n);
    std::vector<Vector> Hu(pairs.size());
    for (Eigen::Index k = 0; k < n; ++k) {
      const PairQuadratic& pq = pairs[static_cast<std::size_t>(k)];
      Hu[static_cast<std::size_t>(k)] = pq.H * u;
      a[k] = log_weights[k] - (u.dot(Hu[static_cast<std::size_t>(k)]) + pq.c.dot(u) + pq.h);
    }
    const double value = log_sum_exp(a);
    if (grad != nullptr) {
      grad->setZero(u.size());
      for (Eigen::Index k = 0; k < n; ++k) {
        const double share = std::exp(a[k] - value);
        if (share == 0.0) continue;
        *grad -= share * (2.0 * Hu[static_cast<std::size_t>(k)] + pairs[static_cast<std::size_t>(k)].c);
      }
    }
    return value;
  }
};

Vector random_feasible(const ConstraintSet& cs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uniform;
  std::normal_distribution<double> normal;
  Vector u(cs.dim());
  if (const auto* p = std::get_if<BoxRatePolytope>(&cs.region)) {
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = p->amp_bound * (2.0 * uniform(rng) - 1.0);
    return cs.restore_feasibility(u);
  }
  const auto& ball = std::get<EnergyBallProduct>(cs.region);
  const double radius = std::sqrt(ball.energy_bound);
  for (int l = 0; l < cs.horizon; ++l) {
    Vector dir(cs.n_u);
    for (Eigen::Index i = 0; i < cs.n_u; ++i) dir[i] = normal(rng);
    const double scale = radius * std::pow(uniform(rng), 1.0 / static_cast<double>(cs.n_u));
    u.segment(l * cs.n_u, cs.n_u) = ball.center + dir.normalized() * scale;
  }
  return u;
}

}  // namespace

OpenLoopPlan design_ol(std::span<const StateSpaceModel> models, std::span<const NoiseModel> noises,
                       const BeliefState& initial, const ConstraintSet& cs, const OpenLoopOptions& opts) {
  if (opts.horizon < 1) throw DimensionError("open-loop horizon must be at least 1");
  if (models.size() != noises.size() || models.size() != initial.filters.size()) {
    throw DimensionError("one noise model and filter per candidate is required");
  }
  ConstraintSet full = cs;
  full.horizon = opts.horizon;
  full.validate();

  OpenLoopPlan plan;
  plan.horizon = opts.horizon;
  plan.n_u = full.n_u;

  std::vector<LiftedModel> lifts;
  for (std::size_t k = 0; k < models.size(); ++k) lifts.push_back(build_lifted(models[k], noises[k], opts.horizon));

  LogBound obj;
  std::vector<double> lw;
  for (auto& pq : all_pairs(lifts, initial.filters)) {
    const double log_w = 0.5 * (initial.log_probs[pq.i] + initial.log_probs[pq.j]);
    if (!std::isfinite(log_w)) continue;  // zero-probability pair
    obj.pairs.push_back(std::move(pq));
    lw.push_back(log_w);
  }
  obj.log_weights = Eigen::Map<const Vector>(lw.data(), static_cast<Eigen::Index>(lw.size()));

  const bool constant = std::all_of(obj.pairs.begin(), obj.pairs.end(), [](const PairQuadratic& pq) {
    return pq.H.isZero(0.0) && pq.c.isZero(0.0);
  });
  if (obj.pairs.empty() || constant) {
    plan.u_seq = full.rest_point();
    plan.objective_value = obj.pairs.empty() ? 0.0 : std::exp(obj.eval(plan.u_seq, nullptr));
    return plan;
  }

  std::mt19937_64 rng(opts.seed);
  double best_value = std::numeric_limits<double>::infinity();
  Vector g;
  Vector g_new;
  for (int s = 0; s < opts.n_starts; ++s) {
    Vector u = random_feasible(full, rng);
    double value = obj.eval(u, &g);
    double step = 1.0;
    for (int it = 0; it < opts.max_iterations; ++it) {
      bool accepted = false;
      while (step > 1e-12) {
        const Vector cand = full.restore_feasibility(u - step * g);
        const Vector move = cand - u;
        if (move.squaredNorm() == 0.0) break;
        const double cand_value = obj.eval(cand, &g_new);
        if (cand_value <= value + 1e-4 * g.dot(move)) {
          const double decrease = value - cand_value;
          u = cand;
          value = cand_value;
          g.swap(g_new);
          step *= 2.0;
          accepted = true;
          ++plan.iterations;
          if (decrease < 1e-10 * std::max(1.0, std::abs(value))) it = opts.max_iterations;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;
    }
    ++plan.starts;
    if (value < best_value) {
      best_value = value;
      plan.u_seq = u;
    }
  }
  plan.objective_value = std::exp(best_value);
  return plan;
}

}  // namespace clafd
