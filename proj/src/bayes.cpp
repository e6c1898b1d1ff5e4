#include "clafd/bayes.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace clafd {

double log_sum_exp(const Vector& v) {
  const double m = v.maxCoeff();
  if (m == -std::numeric_limits<double>::infinity()) return m;
  return m + std::log((v.array() - m).exp().sum());
}

BeliefState BeliefState::from_probabilities(const Vector& probs, std::vector<FilterState> filters) {
  if (probs.size() != static_cast<Eigen::Index>(filters.size())) {
    throw DimensionError("one filter per model probability is required");
  }
  if ((probs.array() < 0.0).any() || std::abs(probs.sum() - 1.0) > 1e-9) {
    throw NumericError("prior probabilities must be non-negative and sum to 1");
  }
  BeliefState b;
  b.log_probs = probs.array().log().matrix();
  b.log_probs.array() -= log_sum_exp(b.log_probs);
  b.filters = std::move(filters);
  return b;
}

double gaussian_loglik(const Vector& y, const Vector& mean, const Matrix& cov) {
  if (y.size() != mean.size() || cov.rows() != y.size() || cov.cols() != y.size()) {
    throw DimensionError("gaussian_loglik: size mismatch");
  }
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericError("covariance is not positive definite");
  const Vector whitened = llt.matrixL().solve(y - mean);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double n = static_cast<double>(y.size());
  return -0.5 * (whitened.squaredNorm() + log_det + n * std::log(2.0 * std::numbers::pi));
}

BeliefState update_beliefs(const BeliefState& b, const Vector& logliks) {
  if (logliks.size() != b.size()) throw DimensionError("one likelihood per model is required");
  for (Eigen::Index i = 0; i < logliks.size(); ++i) {
    if (std::isnan(logliks[i]) || logliks[i] == std::numeric_limits<double>::infinity()) {
      throw NumericError("likelihoods must be finite or -inf");
    }
  }
  BeliefState out = b;
  const Vector joint = b.log_probs + logliks;
  const double norm = log_sum_exp(joint);
  if (!std::isfinite(norm)) throw NumericError("measurement has zero likelihood under every model");
  out.log_probs = joint.array() - norm;
  return out;
}

double error_probability(const BeliefState& b) { return 1.0 - std::exp(b.log_probs.maxCoeff()); }

std::optional<int> decide(const BeliefState& b, double threshold) {
  Eigen::Index best = 0;
  b.log_probs.maxCoeff(&best);  // first maximum wins ties
  if (std::exp(b.log_probs[best]) > threshold) return static_cast<int>(best);
  return std::nullopt;
}

}  // namespace clafd
