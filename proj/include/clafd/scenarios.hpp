#pragma once

#include "clafd/simulation.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace clafd {

/// The two-state oscillator family: A(Delta), B(delta) with a shared C and
/// shared noise.
StateSpaceModel oscillator_model(double Delta, double delta);

/// "uncontrolled-polytope", "uncontrolled-ball" or "feedback-ball".
ExperimentConfig build_scenario(std::string_view name);
std::vector<std::string> scenario_names();

/// Controller for the feedback scenario, designed on the nominal model.
ControllerGains nominal_controller(const StateSpaceModel& nominal, const NoiseModel& noise,
                                   std::span<const double> poles);

struct SweepCell {
  double R = 0.0;      // measurement noise variance (R = R I)
  double scale = 1.0;  // C1 = scale * C0
  double gamma_fro = 0.0;
  double level = 0.0;  // left-hand side of the concavity condition
  bool pass = false;
};

/// Concavity of the pair (M0, M1 with C1 = scale C0) at u_fixed, for every R
/// and scale. M0, Q, the initial filter state and the horizon come from base
/// (first candidate).
std::vector<SweepCell> concavity_sweep(const ExperimentConfig& base, std::span<const double> R_values,
                                       std::span<const double> C_scales, const Vector& u_fixed);

/// [-1, -1, -1, -1, 1, 1, -1, -1, 0, 0]
Vector sweep_default_input();
std::vector<double> sweep_default_R();
std::vector<double> sweep_default_scales();

}  // namespace clafd
