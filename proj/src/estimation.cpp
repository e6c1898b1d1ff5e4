#include "clafd/estimation.hpp"

namespace clafd {

KalmanStep kf_step(const FilterState& fs, const StateSpaceModel& model, const NoiseModel& noise,
                   const Vector& u, const Vector& y) {
  if (fs.x_pred.size() != model.nx() || fs.Xi_pred.rows() != model.nx()) {
    throw DimensionError("filter state does not match the model");
  }
  if (u.size() != model.nu()) throw DimensionError("input has wrong size");
  if (y.size() != model.ny()) throw DimensionError("measurement has wrong size");

  const Matrix& A = model.A;
  const Matrix& C = model.C;
  const Matrix& Xi = fs.Xi_pred;

  KalmanStep out;
  out.innovation_mean = C * fs.x_pred;
  out.innovation_cov = symmetrized(C * Xi * C.transpose() + noise.R);

  Eigen::LLT<Matrix> llt(out.innovation_cov);
  if (llt.info() != Eigen::Success) throw NumericError("innovation covariance is not positive definite");

  // K = (A Xi C' + S) W^-1, computed as (W^-1 (A Xi C' + S)')' since W is symmetric.
  const Matrix cross = A * Xi * C.transpose() + noise.S;
  const Matrix gain = llt.solve(cross.transpose()).transpose();

  out.next.x_pred = A * fs.x_pred + model.B * u + gain * (y - out.innovation_mean);
  out.next.Xi_pred = symmetrized(A * Xi * A.transpose() + noise.Q - gain * out.innovation_cov * gain.transpose());
  return out;
}

Matrix predicted_output_covariance(const LiftedModel& lifted, const FilterState& fs) {
  if (fs.Xi_pred.rows() != lifted.nx()) throw DimensionError("filter state does not match the lift");
  const Matrix& CA = lifted.free_response;
  const Matrix& CT = lifted.noise_response;
  const Matrix cross = CT * lifted.bold_S;
  Matrix sigma = CA * fs.Xi_pred * CA.transpose() + CT * lifted.bold_Q * CT.transpose() + cross +
                 cross.transpose() + lifted.bold_R;
  return symmetrized(sigma);
}

OutputPrediction predict_outputs(const LiftedModel& lifted, const FilterState& fs, const Vector& u_vec) {
  if (fs.x_pred.size() != lifted.nx()) throw DimensionError("filter state does not match the lift");
  if (u_vec.size() != lifted.input_response.cols()) throw DimensionError("input sequence has wrong length");
  OutputPrediction p;
  p.y_mean = lifted.free_response * fs.x_pred + lifted.input_response * u_vec;
  p.Sigma = predicted_output_covariance(lifted, fs);
  return p;
}

SteadyStateFilter steady_state_filter(const StateSpaceModel& model, const NoiseModel& noise, double tol,
                                      int max_iterations) {
  model.validate();
  noise.validate(model.nx(), model.ny());
  SteadyStateFilter ss;
  FilterState fs{Vector::Zero(model.nx()), noise.Q};
  const Vector u = Vector::Zero(model.nu());
  const Vector y = Vector::Zero(model.ny());
  for (int it = 1; it <= max_iterations; ++it) {
    const KalmanStep step = kf_step(fs, model, noise, u, y);
    const double change = (step.next.Xi_pred - fs.Xi_pred).norm();
    fs = step.next;
    ss.iterations = it;
    if (change < tol * std::max(1.0, fs.Xi_pred.norm())) break;
  }
  const Matrix& C = model.C;
  const Matrix W = symmetrized(C * fs.Xi_pred * C.transpose() + noise.R);
  const Matrix cross = model.A * fs.Xi_pred * C.transpose() + noise.S;
  ss.gain = W.llt().solve(cross.transpose()).transpose();
  ss.Xi = fs.Xi_pred;
  return ss;
}

}  // namespace clafd
