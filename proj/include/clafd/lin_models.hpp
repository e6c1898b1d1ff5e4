#pragma once

#include "clafd/common.hpp"

#include <span>

namespace clafd {

/// One candidate hypothesis x' = A x + B u + w, y = C x + v.
struct StateSpaceModel {
  Matrix A;
  Matrix B;
  Matrix C;

  Eigen::Index nx() const { return A.rows(); }
  Eigen::Index nu() const { return B.cols(); }
  Eigen::Index ny() const { return C.rows(); }

  /// Throws DimensionError on inconsistent shapes and NumericError on
  /// non-finite entries.
  void validate() const;
};

/// Joint noise statistics: E[v v'] = R, E[w w'] = Q, E[w v'] = S, all at the
/// same time index.
struct NoiseModel {
  Matrix Q;
  Matrix R;
  Matrix S;

  void validate(Eigen::Index nx, Eigen::Index ny) const;
  /// The joint covariance [[R, S'], [S, Q]] of (v, w).
  Matrix joint() const;
};

/// Horizon-N lifted description of a model.
///
/// Over a window of N steps starting at the predicted state x_0 the stacked
/// states, outputs and noises satisfy
///
///   xs = bold_A x_0 + toeplitz_A bold_B us + toeplitz_A ws
///   ys = bold_C xs + vs
///
/// with bold_Q = cov(ws), bold_R = cov(vs) and bold_S = E[ws vs'].
struct LiftedModel {
  int horizon = 0;
  Matrix bold_A;      // (N nx) x nx
  Matrix bold_B;      // I_N (x) B
  Matrix bold_C;      // I_N (x) C
  Matrix toeplitz_A;  // (N nx) x (N nx), strictly lower block triangular
  Matrix bold_Q;
  Matrix bold_R;
  Matrix bold_S;

  // Products used on every design step.
  Matrix free_response;  // bold_C bold_A
  Matrix input_response; // bold_C toeplitz_A bold_B
  Matrix noise_response; // bold_C toeplitz_A

  Eigen::Index nx() const { return bold_A.cols(); }
  Eigen::Index nu() const { return bold_B.cols() / horizon; }
  Eigen::Index ny() const { return bold_C.rows() / horizon; }
};

LiftedModel build_lifted(const StateSpaceModel& model, const NoiseModel& noise, int horizon);

/// Observer-based controller for the nominal model:
///   u~ = -F xhat + G u,   xhat' = A0 xhat + B0 u~ + K (y - C0 xhat).
struct ControllerGains {
  Matrix F;
  Matrix G;
  Matrix K;
};

struct ClosedLoopModel {
  StateSpaceModel model;
  NoiseModel noise;
};

/// Augments an open-loop candidate with the nominal observer/controller. The
/// closed-loop state is [x; xhat0] and the new input is the reference u.
ClosedLoopModel close_loop(const StateSpaceModel& open_model, const NoiseModel& open_noise,
                           const StateSpaceModel& nominal, const ControllerGains& gains);

/// State feedback F such that eig(A - B F) equals the requested real poles.
Matrix place_poles(const Matrix& A, const Matrix& B, std::span<const double> poles);

/// Feedforward G = [C (I - A + B F)^-1 B]^-1, giving unit DC gain from the
/// reference to the output of the nominal closed loop.
Matrix dc_feedforward_gain(const StateSpaceModel& nominal, const Matrix& F);

double spectral_radius(const Matrix& A);

/// P = A P A' + Q for a Schur-stable A.
Matrix stationary_covariance(const Matrix& A, const Matrix& Q);

}  // namespace clafd
