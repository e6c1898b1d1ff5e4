#pragma once

#include "clafd/input_design.hpp"

namespace clafd {

/// Input sequence designed once, before the experiment starts.
struct OpenLoopPlan {
  Vector u_seq;  // horizon * n_u
  int horizon = 0;
  Eigen::Index n_u = 0;
  double objective_value = 0.0;  // weighted bound at u_seq
  int starts = 0;
  int iterations = 0;

  /// Input for step k. The sequence repeats once exhausted; the repeated
  /// input is clipped against the previously applied one when the set is a
  /// box-rate polytope.
  Vector input_at(int k, const ConstraintSet& step_set) const;
};

struct OpenLoopOptions {
  int horizon = 200;
  int n_starts = 20;
  int max_iterations = 400;
  std::uint64_t seed = 0;
};

/// Multi-start projected-gradient minimization of the full-horizon bound
/// built from the initial belief. `cs` supplies the region; its horizon is
/// replaced by opts.horizon.
OpenLoopPlan design_ol(std::span<const StateSpaceModel> models, std::span<const NoiseModel> noises,
                       const BeliefState& initial, const ConstraintSet& cs, const OpenLoopOptions& opts);

}  // namespace clafd
