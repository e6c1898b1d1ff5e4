#pragma once

#include "clafd/concavity.hpp"

#include <cstdint>
#include <functional>
#include <variant>
#include <vector>

namespace clafd {

/// ||u_l||_inf <= amp_bound and ||u_l - u_{l-1}||_inf <= rate_bound over the
/// horizon, with u_{-1} = u_prev (the last applied input).
struct BoxRatePolytope {
  double amp_bound = 0.0;
  double rate_bound = 0.0;
  Vector u_prev;
};

/// ||u_l - center||_2^2 <= energy_bound for every step of the horizon.
struct EnergyBallProduct {
  double energy_bound = 0.0;
  Vector center;
};

struct ConstraintSet {
  std::variant<BoxRatePolytope, EnergyBallProduct> region;
  int horizon = 1;
  Eigen::Index n_u = 1;

  void validate() const;
  bool is_polytope() const { return std::holds_alternative<BoxRatePolytope>(region); }
  Eigen::Index dim() const { return horizon * n_u; }

  /// Largest constraint violation of u (0 when feasible).
  double violation(const Vector& u) const;
  bool contains(const Vector& u, double tol = 1e-9) const { return violation(u) <= tol; }

  /// Feasible point used when the objective does not depend on u: the ball
  /// centres, or the minimum-norm sequence of the polytope.
  Vector rest_point() const;

  /// Maps u into the set: exact per-step scaling for balls, a forward
  /// per-channel clipping sweep for the box-rate polytope.
  Vector restore_feasibility(const Vector& u) const;

  /// The centre sequence of a ball product, zero for the polytope.
  Vector center_sequence() const;
};

/// All vertices of a box-rate polytope, one per column, sorted
/// lexicographically. Throws NumericError if there are more than `cap`.
Matrix enumerate_vertices(const BoxRatePolytope& poly, int horizon, std::size_t cap = 1'000'000);

/// Vertices of a single scalar channel (horizon x count).
Matrix enumerate_channel_vertices(double amp_bound, double rate_bound, double u_prev, int horizon);

enum class Certificate { yes, no, not_applicable };

const char* to_string(Certificate c);

struct DesignResult {
  Vector u_seq;
  Vector first_input;
  double objective_value = 0.0;
  Certificate certified = Certificate::not_applicable;
  int iterations = 0;
};

struct DesignOptions {
  std::uint64_t seed = 0;  // random multi-starts on ball products
  int random_starts = 3;
  int max_iterations = 200;
  std::size_t vertex_cap = 1'000'000;
};

/// Pairs grouped by sub-horizon: prefix_pairs[g] are built at horizon
/// (g + 1) and act on the leading (g + 1) n_u inputs.
using PrefixPairs = std::vector<std::vector<PairQuadratic>>;

/// Maximizes the summed Bhattacharyya distances.
DesignResult design_bd(std::span<const PairQuadratic> pairs, const ConstraintSet& cs,
                       const DesignOptions& opts = {});

/// Minimizes the weighted second-order expansion of the bound around the
/// constraint-set centre (the origin for the polytope).
DesignResult design_qta(std::span<const PairQuadratic> pairs, const BeliefState& b, const ConstraintSet& cs,
                        const DesignOptions& opts = {});

/// Minimizes the weighted Bhattacharyya bound over the full horizon.
DesignResult design_bc(std::span<const PairQuadratic> pairs, const BeliefState& b, const ConstraintSet& cs,
                       const DesignOptions& opts = {});

/// Minimizes the bound summed over all sub-horizons.
DesignResult design_sbc(const PrefixPairs& prefix_pairs, const BeliefState& b, const ConstraintSet& cs,
                        const DesignOptions& opts = {});

struct FwResult {
  Vector u;
  double value = 0.0;
  int iterations = 0;
  std::vector<double> trace;  // objective after every accepted iterate of the winning start
};

/// Linearize-and-minimize: each iterate moves to the minimizer of the
/// objective's tangent over the constraint set, falling back to a
/// backtracking search along the segment if the full step does not
/// decrease the objective. For concave objectives the full step is always
/// accepted. Returns the best point over all starts.
FwResult fw_concave_min(const std::function<double(const Vector&)>& value_fn,
                        const std::function<Vector(const Vector&)>& grad_fn, const ConstraintSet& cs,
                        const std::vector<Vector>& starts, int max_iterations = 200, double tol = 1e-12);

}  // namespace clafd
