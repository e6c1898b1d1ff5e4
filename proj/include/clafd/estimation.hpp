#pragma once

#include "clafd/lin_models.hpp"

namespace clafd {

/// One-step-ahead prediction x_{k+1|k} with its error covariance.
struct FilterState {
  Vector x_pred;
  Matrix Xi_pred;
};

struct KalmanStep {
  FilterState next;
  Vector innovation_mean;  // C x_{k|k-1}: the predicted measurement
  Matrix innovation_cov;   // C Xi C' + R
};

/// Kalman filter in one-step predictor form with correlated process and
/// measurement noise. Consumes (u_k, y_k) and returns x_{k+1|k}.
KalmanStep kf_step(const FilterState& fs, const StateSpaceModel& model, const NoiseModel& noise,
                   const Vector& u, const Vector& y);

/// Mean and covariance of the stacked outputs over a lifted horizon.
struct OutputPrediction {
  Vector y_mean;
  Matrix Sigma;
};

OutputPrediction predict_outputs(const LiftedModel& lifted, const FilterState& fs, const Vector& u_vec);

/// The input-independent part of predict_outputs: Sigma alone.
Matrix predicted_output_covariance(const LiftedModel& lifted, const FilterState& fs);

struct SteadyStateFilter {
  Matrix gain;  // K in predictor form
  Matrix Xi;    // fixed point of the Riccati recursion
  int iterations = 0;
};

/// Iterates the predictor Riccati recursion from Xi = Q until the update
/// falls below tol (Frobenius norm).
SteadyStateFilter steady_state_filter(const StateSpaceModel& model, const NoiseModel& noise,
                                      double tol = 1e-13, int max_iterations = 100000);

}  // namespace clafd
