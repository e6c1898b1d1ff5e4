#pragma once

#include "clafd/bayes.hpp"

#include <span>
#include <vector>

namespace clafd {

/// Bhattacharyya distance between the predicted output distributions of two
/// candidates, as a function of the stacked input u:
///
///   d(u) = u' H u + c' u + h
///
/// with H = Gamma' Omega^-1 Gamma / 4, c = Gamma' Omega^-1 zeta / 2 and
/// h = zeta' Omega^-1 zeta / 4 + log(|Omega/2| / sqrt(|Sigma_i||Sigma_j|)) / 2.
struct PairQuadratic {
  Matrix H;
  Vector c;
  double h = 0.0;
  Matrix Omega;
  Matrix Gamma;
  Vector zeta;
  int i = 0;
  int j = 1;

  Eigen::Index dim() const { return c.size(); }
};

PairQuadratic pair_quadratic(const LiftedModel& lifted_i, const LiftedModel& lifted_j, const FilterState& fs_i,
                             const FilterState& fs_j, int i = 0, int j = 1);

/// Every pair i < j in lexicographic order. Per-model output covariances are
/// computed once and shared.
std::vector<PairQuadratic> all_pairs(std::span<const LiftedModel> lifts, std::span<const FilterState> filters);

double bhatt_distance(const PairQuadratic& pq, const Vector& u);
double bhatt_coefficient(const PairQuadratic& pq, const Vector& u);

/// sqrt(P_i P_j) for every pair, in the order of `pairs`.
Vector pair_weights(std::span<const PairQuadratic> pairs, const BeliefState& b);

/// sum_{i<j} sqrt(P_i P_j) exp(-d_ij(u)): upper bound on the predicted error
/// probability.
double weighted_bound(std::span<const PairQuadratic> pairs, const BeliefState& b, const Vector& u);
Vector weighted_bound_grad(std::span<const PairQuadratic> pairs, const BeliefState& b, const Vector& u);

/// Quadratic u' P u + q' u + r.
struct QuadraticForm {
  Matrix P;
  Vector q;
  double r = 0.0;

  double operator()(const Vector& u) const { return u.dot(P * u) + q.dot(u) + r; }
};

/// Second-order Taylor expansion of exp(-d(u)) around u = 0.
QuadraticForm taylor_form(const PairQuadratic& pq);
double taylor_value(const PairQuadratic& pq, const Vector& u);

/// Re-expresses d in the shifted variable u' = u - center:
/// c' = c + 2 H center, h' = d(center).
PairQuadratic translated(const PairQuadratic& pq, const Vector& center);

}  // namespace clafd
