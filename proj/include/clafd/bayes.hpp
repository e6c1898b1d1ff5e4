#pragma once

#include "clafd/estimation.hpp"

#include <cmath>
#include <optional>
#include <vector>

namespace clafd {

/// Model probabilities (stored as logs) together with every candidate's
/// filter state.
struct BeliefState {
  Vector log_probs;
  std::vector<FilterState> filters;

  static BeliefState from_probabilities(const Vector& probs, std::vector<FilterState> filters);

  Vector probabilities() const {
    return log_probs.unaryExpr([](double v) { return std::exp(v); });
  }
  Eigen::Index size() const { return log_probs.size(); }
};

/// log N(y; mean, cov). Throws NumericError if cov is not positive definite.
double gaussian_loglik(const Vector& y, const Vector& mean, const Matrix& cov);

/// Bayes rule in the log domain. Filters are carried over untouched.
BeliefState update_beliefs(const BeliefState& b, const Vector& logliks);

/// 1 - max_i P(M_i).
double error_probability(const BeliefState& b);

/// Index of the most probable model if its probability exceeds threshold.
std::optional<int> decide(const BeliefState& b, double threshold);

double log_sum_exp(const Vector& v);

}  // namespace clafd
