#include "clafd/lin_models.hpp"

#include <Eigen/Eigenvalues>

#include <sstream>
#include <vector>

namespace clafd {

double log_det_spd(const Matrix& m, const char* what) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw NumericError(std::string(what) + " is not positive definite");
  }
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

namespace {

std::string shape(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

Matrix kron_identity(int n, const Matrix& block) {
  Matrix out = Matrix::Zero(n * block.rows(), n * block.cols());
  for (int k = 0; k < n; ++k) {
    out.block(k * block.rows(), k * block.cols(), block.rows(), block.cols()) = block;
  }
  return out;
}

}  // namespace

void StateSpaceModel::validate() const {
  if (A.rows() != A.cols()) throw DimensionError("A must be square, got " + shape(A));
  if (B.rows() != A.rows()) throw DimensionError("B must have nx rows, got " + shape(B));
  if (C.cols() != A.rows()) throw DimensionError("C must have nx columns, got " + shape(C));
  if (!A.allFinite() || !B.allFinite() || !C.allFinite()) {
    throw NumericError("state-space matrices contain non-finite entries");
  }
}

void NoiseModel::validate(Eigen::Index nx, Eigen::Index ny) const {
  if (Q.rows() != nx || Q.cols() != nx) throw DimensionError("Q must be nx x nx, got " + shape(Q));
  if (R.rows() != ny || R.cols() != ny) throw DimensionError("R must be ny x ny, got " + shape(R));
  if (S.rows() != nx || S.cols() != ny) throw DimensionError("S must be nx x ny, got " + shape(S));
  if (!Q.allFinite() || !R.allFinite() || !S.allFinite()) {
    throw NumericError("noise covariances contain non-finite entries");
  }
}

Matrix NoiseModel::joint() const {
  const auto ny = R.rows();
  const auto nx = Q.rows();
  Matrix j(ny + nx, ny + nx);
  j.topLeftCorner(ny, ny) = R;
  j.topRightCorner(ny, nx) = S.transpose();
  j.bottomLeftCorner(nx, ny) = S;
  j.bottomRightCorner(nx, nx) = Q;
  return j;
}

LiftedModel build_lifted(const StateSpaceModel& model, const NoiseModel& noise, int horizon) {
  if (horizon < 1) throw DimensionError("horizon must be at least 1");
  model.validate();
  noise.validate(model.nx(), model.ny());

  const auto nx = model.nx();
  LiftedModel lm;
  lm.horizon = horizon;

  std::vector<Matrix> powers(horizon);
  powers[0] = Matrix::Identity(nx, nx);
  for (int p = 1; p < horizon; ++p) powers[p] = model.A * powers[p - 1];

  lm.bold_A.resize(horizon * nx, nx);
  for (int r = 0; r < horizon; ++r) lm.bold_A.middleRows(r * nx, nx) = powers[r];

  lm.toeplitz_A = Matrix::Zero(horizon * nx, horizon * nx);
  for (int r = 1; r < horizon; ++r) {
    for (int c = 0; c < r; ++c) {
      lm.toeplitz_A.block(r * nx, c * nx, nx, nx) = powers[r - c - 1];
    }
  }

  lm.bold_B = kron_identity(horizon, model.B);
  lm.bold_C = kron_identity(horizon, model.C);
  lm.bold_Q = kron_identity(horizon, noise.Q);
  lm.bold_R = kron_identity(horizon, noise.R);
  // w_l and v_l are correlated only at equal time indices.
  lm.bold_S = kron_identity(horizon, noise.S);

  lm.free_response = lm.bold_C * lm.bold_A;
  lm.noise_response = lm.bold_C * lm.toeplitz_A;
  lm.input_response = lm.noise_response * lm.bold_B;
  return lm;
}

ClosedLoopModel close_loop(const StateSpaceModel& open_model, const NoiseModel& open_noise,
                           const StateSpaceModel& nominal, const ControllerGains& gains) {
  open_model.validate();
  nominal.validate();
  open_noise.validate(open_model.nx(), open_model.ny());
  const auto nx = open_model.nx();
  const auto nu = open_model.nu();
  const auto ny = open_model.ny();
  if (nominal.nx() != nx || nominal.nu() != nu || nominal.ny() != ny) {
    throw DimensionError("candidate and nominal model dimensions differ");
  }
  if (gains.F.rows() != nu || gains.F.cols() != nx) throw DimensionError("F must be nu x nx");
  if (gains.G.rows() != nu || gains.G.cols() != nu) throw DimensionError("G must be nu x nu");
  if (gains.K.rows() != nx || gains.K.cols() != ny) throw DimensionError("K must be nx x ny");

  const Matrix& F = gains.F;
  const Matrix& K = gains.K;

  ClosedLoopModel cl;
  cl.model.A.resize(2 * nx, 2 * nx);
  cl.model.A << open_model.A, -open_model.B * F,
      K * open_model.C, nominal.A - nominal.B * F - K * nominal.C;
  cl.model.B.resize(2 * nx, nu);
  cl.model.B << open_model.B * gains.G, nominal.B * gains.G;
  cl.model.C = Matrix::Zero(ny, 2 * nx);
  cl.model.C.leftCols(nx) = open_model.C;

  cl.noise.Q.resize(2 * nx, 2 * nx);
  cl.noise.Q << open_noise.Q, open_noise.S * K.transpose(),
      K * open_noise.S.transpose(), K * open_noise.R * K.transpose();
  cl.noise.S.resize(2 * nx, ny);
  cl.noise.S << open_noise.S, K * open_noise.R;
  cl.noise.R = open_noise.R;
  return cl;
}

namespace {

Matrix characteristic_polynomial_at(const Matrix& A, std::span<const double> poles) {
  Matrix p = Matrix::Identity(A.rows(), A.cols());
  for (double pole : poles) p = p * (A - pole * Matrix::Identity(A.rows(), A.cols()));
  return p;
}

}  // namespace

Matrix place_poles(const Matrix& A, const Matrix& B, std::span<const double> poles) {
  const auto nx = A.rows();
  if (A.cols() != nx) throw DimensionError("A must be square");
  if (B.rows() != nx) throw DimensionError("B must have nx rows");
  if (static_cast<Eigen::Index>(poles.size()) != nx) {
    throw DimensionError("need exactly nx poles");
  }
  const auto nu = B.cols();
  Eigen::Map<const Vector> desired(poles.data(), nx);

  // Square, invertible B: assign the closed loop to diag(poles) directly.
  if (nu == nx) {
    Eigen::FullPivLU<Matrix> lu(B);
    if (lu.isInvertible() && lu.rcond() > 1e-10) {
      Matrix target = A;
      target -= Matrix(desired.asDiagonal());
      return lu.solve(target);
    }
  }

  // Otherwise drive the system through one fixed input combination v and use
  // Ackermann's formula on the single-input pair (A, B v).
  std::vector<Vector> directions;
  for (Eigen::Index k = 0; k < nu; ++k) directions.push_back(Vector::Unit(nu, k));
  directions.push_back(Vector::Ones(nu) / std::sqrt(static_cast<double>(nu)));

  for (const Vector& v : directions) {
    const Vector b = B * v;
    Matrix ctrb(nx, nx);
    Vector col = b;
    for (Eigen::Index k = 0; k < nx; ++k) {
      ctrb.col(k) = col;
      col = A * col;
    }
    Eigen::FullPivLU<Matrix> lu(ctrb);
    if (!lu.isInvertible() || lu.rcond() < 1e-12) continue;
    const Matrix last_row = lu.inverse().row(nx - 1);
    const Matrix f = last_row * characteristic_polynomial_at(A, poles);
    return v * f;
  }
  throw NumericError("place_poles: (A, B) is not controllable");
}

Matrix dc_feedforward_gain(const StateSpaceModel& nominal, const Matrix& F) {
  nominal.validate();
  if (F.rows() != nominal.nu() || F.cols() != nominal.nx()) throw DimensionError("F must be nu x nx");
  if (nominal.ny() != nominal.nu()) throw DimensionError("DC gain must be square (ny == nu)");
  const Matrix loop = Matrix::Identity(nominal.nx(), nominal.nx()) - nominal.A + nominal.B * F;
  Eigen::FullPivLU<Matrix> loop_lu(loop);
  if (!loop_lu.isInvertible()) throw NumericError("closed loop has a pole at 1");
  const Matrix dc = nominal.C * loop_lu.solve(nominal.B);
  Eigen::FullPivLU<Matrix> dc_lu(dc);
  if (!dc_lu.isInvertible() || dc_lu.rcond() < 1e-12) throw NumericError("singular DC gain");
  return dc_lu.inverse();
}

double spectral_radius(const Matrix& A) {
  Eigen::EigenSolver<Matrix> es(A, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

Matrix stationary_covariance(const Matrix& A, const Matrix& Q) {
  const auto n = A.rows();
  if (A.cols() != n || Q.rows() != n || Q.cols() != n) throw DimensionError("stationary_covariance: shape mismatch");
  if (spectral_radius(A) >= 1.0) throw NumericError("stationary_covariance: A is not stable");
  // vec(P) = (I - A (x) A)^-1 vec(Q)
  Matrix kron(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) kron.block(i * n, j * n, n, n) = A(i, j) * A;
  }
  const Matrix lhs = Matrix::Identity(n * n, n * n) - kron;
  const Vector vec_q = Eigen::Map<const Vector>(Q.data(), n * n);
  const Vector vec_p = lhs.fullPivLu().solve(vec_q);
  return symmetrized(Eigen::Map<const Matrix>(vec_p.data(), n, n));
}

}  // namespace clafd
