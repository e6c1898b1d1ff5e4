#pragma once

#include "clafd/bhattacharyya.hpp"

namespace clafd {

/// Eigen-split of a pair's H into its range (U1, Lambda1, descending) and
/// null space (U2).
struct ConcavitySpectrum {
  Matrix U1;
  Matrix U2;
  Vector lambda1;
  double rank_tol = 0.0;  // absolute eigenvalue threshold used for the split

  Eigen::Index rank() const { return lambda1.size(); }
  bool degenerate() const { return lambda1.size() == 0; }
};

ConcavitySpectrum spectrum(const PairQuadratic& pq, double relative_tol = 1e-10);

/// Outcome of a concavity test. `not_certified` means the test does not
/// apply (c has a component outside range(H)), which is different from a
/// failed test.
enum class Concavity { concave, not_concave, not_certified };

const char* to_string(Concavity c);

/// ||U2' c|| <= tol ||c||.
bool c_in_range(const PairQuadratic& pq, const ConcavitySpectrum& spec, double tol = 1e-8);

/// c' U1 Lambda1^-1 U1' c / 4: the level of the concavity region at u = 0
/// relative to the quadratic part.
double concavity_offset(const PairQuadratic& pq, const ConcavitySpectrum& spec);

/// u' H u + c' u + concavity_offset. exp(-d) is concave wherever this is at
/// most 1/2.
double concavity_level(const PairQuadratic& pq, const ConcavitySpectrum& spec, const Vector& u);

Concavity concave_at(const PairQuadratic& pq, const ConcavitySpectrum& spec, const Vector& u);

/// Tests every vertex (one per column). The concave region is an ellipsoidal
/// cylinder, hence convex, so the vertex test covers the whole polytope.
Concavity check_polytope(const PairQuadratic& pq, const ConcavitySpectrum& spec, const Matrix& vertices);

/// Secular-equation data for the minimum-norm boundary point, in the sorted
/// and sign-normalized coordinates.
struct RootBracket {
  double tau_minus = 0.0;
  double tau_plus = 0.0;
  Vector lambda;  // descending
  Vector b;       // non-negative
};

struct BoundarySolution {
  Vector z;
  double tau = 0.0;
  RootBracket bracket;
  bool hard_case = false;  // multiplier sits on the largest-curvature pole
  int iterations = 0;
};

/// Secular function sum_i b_i^2 / (4 (tau - 1/lambda_i)^2) - 1/2 for b_i > 0.
double boundary_secular(const RootBracket& rb, double tau);

/// Closest point to the origin on the boundary of the concave region.
/// Requires rank >= 1; throws NumericError otherwise.
BoundarySolution min_norm_boundary(const ConcavitySpectrum& spec, const Vector& c);

/// Certificate for the product of N energy balls ||u_l||^2 <= energy_bound,
/// centred at the origin of the pair's coordinates.
Concavity check_energy_ball(const PairQuadratic& pq, const ConcavitySpectrum& spec, double energy_bound,
                            int horizon);

}  // namespace clafd
