#include "clafd/bhattacharyya.hpp"

#include <cmath>

namespace clafd {

namespace {

struct ModelPrediction {
  Vector free_mean;  // bold_C bold_A x_pred
  Matrix sigma;
  double log_det = 0.0;
};

ModelPrediction predict(const LiftedModel& lifted, const FilterState& fs) {
  ModelPrediction p;
  p.free_mean = lifted.free_response * fs.x_pred;
  p.sigma = predicted_output_covariance(lifted, fs);
  p.log_det = log_det_spd(p.sigma, "predicted output covariance");
  return p;
}

PairQuadratic assemble(const LiftedModel& li, const LiftedModel& lj, const ModelPrediction& pi,
                       const ModelPrediction& pj, int i, int j) {
  if (li.horizon != lj.horizon || li.input_response.cols() != lj.input_response.cols() ||
      li.input_response.rows() != lj.input_response.rows()) {
    throw DimensionError("pair_quadratic: lifts must share horizon, nu and ny");
  }
  PairQuadratic pq;
  pq.i = i;
  pq.j = j;
  pq.Omega = pi.sigma + pj.sigma;
  pq.Gamma = li.input_response - lj.input_response;
  pq.zeta = pi.free_mean - pj.free_mean;

  Eigen::LLT<Matrix> llt(pq.Omega);
  if (llt.info() != Eigen::Success) throw NumericError("Omega is not positive definite");
  const Matrix L = llt.matrixL();
  const double log_det_omega = 2.0 * L.diagonal().array().log().sum();

  // Whitened quantities: Omega^-1 = L^-T L^-1.
  const Matrix wg = llt.matrixL().solve(pq.Gamma);
  const Vector wz = llt.matrixL().solve(pq.zeta);

  pq.H = symmetrized(0.25 * wg.transpose() * wg);
  pq.c = 0.5 * wg.transpose() * wz;
  const double n = static_cast<double>(pq.zeta.size());
  const double log_det_half_omega = log_det_omega - n * std::log(2.0);
  pq.h = 0.25 * wz.squaredNorm() + 0.5 * (log_det_half_omega - 0.5 * (pi.log_det + pj.log_det));
  return pq;
}

}  // namespace

PairQuadratic pair_quadratic(const LiftedModel& lifted_i, const LiftedModel& lifted_j, const FilterState& fs_i,
                             const FilterState& fs_j, int i, int j) {
  return assemble(lifted_i, lifted_j, predict(lifted_i, fs_i), predict(lifted_j, fs_j), i, j);
}

std::vector<PairQuadratic> all_pairs(std::span<const LiftedModel> lifts, std::span<const FilterState> filters) {
  if (lifts.size() != filters.size()) throw DimensionError("one lift per filter is required");
  std::vector<ModelPrediction> preds;
  preds.reserve(lifts.size());
  for (std::size_t k = 0; k < lifts.size(); ++k) preds.push_back(predict(lifts[k], filters[k]));
  std::vector<PairQuadratic> out;
  for (std::size_t i = 0; i < lifts.size(); ++i) {
    for (std::size_t j = i + 1; j < lifts.size(); ++j) {
      out.push_back(assemble(lifts[i], lifts[j], preds[i], preds[j], static_cast<int>(i), static_cast<int>(j)));
    }
  }
  return out;
}

double bhatt_distance(const PairQuadratic& pq, const Vector& u) {
  if (u.size() != pq.dim()) throw DimensionError("bhatt_distance: input has wrong length");
  return u.dot(pq.H * u) + pq.c.dot(u) + pq.h;
}

double bhatt_coefficient(const PairQuadratic& pq, const Vector& u) { return std::exp(-bhatt_distance(pq, u)); }

Vector pair_weights(std::span<const PairQuadratic> pairs, const BeliefState& b) {
  Vector w(static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    w[static_cast<Eigen::Index>(k)] = std::exp(0.5 * (b.log_probs[pairs[k].i] + b.log_probs[pairs[k].j]));
  }
  return w;
}

double weighted_bound(std::span<const PairQuadratic> pairs, const BeliefState& b, const Vector& u) {
  const Vector w = pair_weights(pairs, b);
  double total = 0.0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const double wk = w[static_cast<Eigen::Index>(k)];
    if (wk == 0.0) continue;
    total += wk * bhatt_coefficient(pairs[k], u);
  }
  return total;
}

Vector weighted_bound_grad(std::span<const PairQuadratic> pairs, const BeliefState& b, const Vector& u) {
  const Vector w = pair_weights(pairs, b);
  Vector g = Vector::Zero(u.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const double wk = w[static_cast<Eigen::Index>(k)];
    if (wk == 0.0) continue;
    const PairQuadratic& pq = pairs[k];
    g -= wk * bhatt_coefficient(pq, u) * (2.0 * pq.H * u + pq.c);
  }
  return g;
}

QuadraticForm taylor_form(const PairQuadratic& pq) {
  const double b0 = std::exp(-pq.h);
  QuadraticForm t;
  t.P = b0 * 0.5 * (pq.c * pq.c.transpose() - 2.0 * pq.H);
  t.q = -b0 * pq.c;
  t.r = b0;
  return t;
}

double taylor_value(const PairQuadratic& pq, const Vector& u) {
  if (u.size() != pq.dim()) throw DimensionError("taylor_value: input has wrong length");
  const double b0 = std::exp(-pq.h);
  const double cu = pq.c.dot(u);
  return b0 * (0.5 * (cu * cu - 2.0 * u.dot(pq.H * u)) - cu + 1.0);
}

PairQuadratic translated(const PairQuadratic& pq, const Vector& center) {
  if (center.size() != pq.dim()) throw DimensionError("translated: center has wrong length");
  PairQuadratic out = pq;
  out.h = bhatt_distance(pq, center);
  out.c = pq.c + 2.0 * pq.H * center;
  out.zeta = pq.zeta + pq.Gamma * center;
  return out;
}

}  // namespace clafd
