#include "clafd/concavity.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <vector>

namespace clafd {

const char* to_string(Concavity c) {
  switch (c) {
    case Concavity::concave:
      return "concave";
    case Concavity::not_concave:
      return "not_concave";
    case Concavity::not_certified:
      return "not_certified";
  }
  return "?";
}

ConcavitySpectrum spectrum(const PairQuadratic& pq, double relative_tol) {
  const auto m = pq.H.rows();
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(pq.H));
  if (es.info() != Eigen::Success) throw NumericError("eigendecomposition of H failed");
  const Vector& ev = es.eigenvalues();  // ascending
  const Matrix& vecs = es.eigenvectors();

  ConcavitySpectrum s;
  const double lambda_max = m > 0 ? ev[m - 1] : 0.0;
  s.rank_tol = relative_tol * lambda_max;
  std::vector<Eigen::Index> range;
  std::vector<Eigen::Index> null;
  for (Eigen::Index k = m - 1; k >= 0; --k) {
    if (lambda_max > 0.0 && ev[k] > s.rank_tol) {
      range.push_back(k);
    } else {
      null.push_back(k);
    }
  }
  const auto r = static_cast<Eigen::Index>(range.size());
  s.U1.resize(m, r);
  s.lambda1.resize(r);
  for (Eigen::Index k = 0; k < r; ++k) {
    s.U1.col(k) = vecs.col(range[k]);
    s.lambda1[k] = ev[range[k]];
  }
  s.U2.resize(m, m - r);
  for (Eigen::Index k = 0; k < m - r; ++k) s.U2.col(k) = vecs.col(null[k]);
  return s;
}

bool c_in_range(const PairQuadratic& pq, const ConcavitySpectrum& spec, double tol) {
  if (spec.U2.cols() == 0) return true;
  return (spec.U2.transpose() * pq.c).norm() <= tol * pq.c.norm();
}

double concavity_offset(const PairQuadratic& pq, const ConcavitySpectrum& spec) {
  if (spec.degenerate()) return 0.0;
  const Vector ct = spec.U1.transpose() * pq.c;
  return 0.25 * (ct.array().square() / spec.lambda1.array()).sum();
}

double concavity_level(const PairQuadratic& pq, const ConcavitySpectrum& spec, const Vector& u) {
  if (u.size() != pq.dim()) throw DimensionError("concavity_level: input has wrong length");
  return u.dot(pq.H * u) + pq.c.dot(u) + concavity_offset(pq, spec);
}

namespace {

// With H = 0 the coefficient is exp(-c'u - h): constant (hence concave) when
// c = 0, log-linear otherwise.
Concavity degenerate_verdict(const PairQuadratic& pq) {
  return pq.c.isZero(0.0) ? Concavity::concave : Concavity::not_certified;
}

}  // namespace

Concavity concave_at(const PairQuadratic& pq, const ConcavitySpectrum& spec, const Vector& u) {
  if (spec.degenerate()) return degenerate_verdict(pq);
  if (!c_in_range(pq, spec)) return Concavity::not_certified;
  return concavity_level(pq, spec, u) <= 0.5 ? Concavity::concave : Concavity::not_concave;
}

Concavity check_polytope(const PairQuadratic& pq, const ConcavitySpectrum& spec, const Matrix& vertices) {
  if (vertices.cols() == 0) throw DimensionError("check_polytope: no vertices");
  if (vertices.rows() != pq.dim()) throw DimensionError("check_polytope: vertex dimension mismatch");
  if (spec.degenerate()) return degenerate_verdict(pq);
  if (!c_in_range(pq, spec)) return Concavity::not_certified;
  const double offset = concavity_offset(pq, spec);
  const Matrix HV = pq.H * vertices;
  for (Eigen::Index k = 0; k < vertices.cols(); ++k) {
    const double level = vertices.col(k).dot(HV.col(k)) + pq.c.dot(vertices.col(k)) + offset;
    if (level > 0.5) return Concavity::not_concave;
  }
  return Concavity::concave;
}

double boundary_secular(const RootBracket& rb, double tau) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < rb.b.size(); ++i) {
    if (rb.b[i] == 0.0) continue;
    const double gap = tau - 1.0 / rb.lambda[i];
    if (gap == 0.0) return std::numeric_limits<double>::infinity();
    sum += rb.b[i] * rb.b[i] / (4.0 * gap * gap);
  }
  return sum - 0.5;
}

BoundarySolution min_norm_boundary(const ConcavitySpectrum& spec, const Vector& c) {
  if (spec.degenerate()) throw NumericError("min_norm_boundary: H has no curvature");
  const Eigen::Index r = spec.rank();
  const Vector ct = spec.U1.transpose() * c;
  const Vector& lambda = spec.lambda1;

  // In g = Lambda^1/2 U1' z + Lambda^-1/2 U1' c / 2 the problem reads
  //   min g' Lambda^-1 g + b' g  s.t.  g'g = 1/2,  b = -Lambda^-3/2 U1' c.
  // Flip signs so that b >= 0; the minimizer then lies in the negative orthant.
  Vector sign(r);
  BoundarySolution sol;
  RootBracket& rb = sol.bracket;
  rb.lambda = lambda;
  rb.b.resize(r);
  for (Eigen::Index i = 0; i < r; ++i) {
    const double raw = -ct[i] / (lambda[i] * std::sqrt(lambda[i]));
    sign[i] = raw < 0.0 ? -1.0 : 1.0;
    rb.b[i] = std::abs(raw);
  }

  const Vector inv = lambda.cwiseInverse();  // ascending
  const double tau_cap = inv[0];
  const double sqrt_half = std::sqrt(0.5);

  rb.tau_minus = std::numeric_limits<double>::infinity();
  rb.tau_plus = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < r; ++i) {
    if (rb.b[i] == 0.0) continue;
    rb.tau_minus = std::min(rb.tau_minus, inv[i] - std::sqrt(0.5 * static_cast<double>(r)) * rb.b[i]);
    rb.tau_plus = std::min(rb.tau_plus, inv[i] - sqrt_half * rb.b[i]);
  }

  Vector q = Vector::Zero(r);
  if (!std::isfinite(rb.tau_minus)) {
    // c = 0: the closest boundary point lies on the largest-curvature axis.
    sol.hard_case = true;
    sol.tau = tau_cap;
    q[0] = -sqrt_half;
  } else if (boundary_secular(rb, tau_cap) <= 0.0) {
    // The secular curve stays inside the sphere up to the first pole; the
    // remaining mass goes onto the unweighted largest-curvature axis.
    sol.hard_case = true;
    sol.tau = tau_cap;
    for (Eigen::Index i = 0; i < r; ++i) {
      if (rb.b[i] > 0.0) q[i] = rb.b[i] / (2.0 * (tau_cap - inv[i]));
    }
    q[0] = -std::sqrt(std::max(0.0, 0.5 - q.squaredNorm()));
  } else {
    double lo = rb.tau_minus;
    double hi = std::min(rb.tau_plus, tau_cap);
    const double eps = std::numeric_limits<double>::epsilon();
    for (int it = 0; it < 400 && hi - lo > 4.0 * eps * std::max(std::abs(lo), std::abs(hi)); ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (boundary_secular(rb, mid) < 0.0) {
        lo = mid;
      } else {
        hi = mid;
      }
      sol.iterations = it + 1;
    }
    sol.tau = 0.5 * (lo + hi);
    for (Eigen::Index i = 0; i < r; ++i) {
      if (rb.b[i] > 0.0) q[i] = rb.b[i] / (2.0 * (sol.tau - inv[i]));
    }
  }
  // Snap onto the sphere; removes the bisection residual.
  q *= sqrt_half / q.norm();

  const Vector g = sign.cwiseProduct(q);
  const Vector y = g.cwiseQuotient(lambda.cwiseSqrt()) - 0.5 * ct.cwiseQuotient(lambda);
  sol.z = spec.U1 * y;
  return sol;
}

Concavity check_energy_ball(const PairQuadratic& pq, const ConcavitySpectrum& spec, double energy_bound,
                            int horizon) {
  if (spec.degenerate()) return degenerate_verdict(pq);
  if (!c_in_range(pq, spec)) return Concavity::not_certified;
  if (concavity_offset(pq, spec) > 0.5) return Concavity::not_concave;
  const BoundarySolution sol = min_norm_boundary(spec, pq.c);
  return std::sqrt(energy_bound * horizon) <= sol.z.norm() ? Concavity::concave : Concavity::not_concave;
}

}  // namespace clafd
