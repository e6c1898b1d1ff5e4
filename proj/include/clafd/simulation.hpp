#pragma once

#include "clafd/open_loop.hpp"

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace clafd {

using Rng = std::mt19937_64;

/// Mixes a base seed with a list of keys (SplitMix64 finalizer chain). Used
/// to derive independent, order-free substreams per trial.
std::uint64_t substream_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys);

enum class Method { bd, qta, bc, sbc, ol, none };

const char* to_string(Method m);
Method parse_method(std::string_view name);

struct Candidate {
  StateSpaceModel model;
  NoiseModel noise;
};

struct PolytopeSpec {
  double amp_bound = 2.0;
  double rate_bound = 1.0;
};

struct BallSpec {
  double energy_bound = 2.0;
  Vector center;  // n_u; zero for an untranslated ball
};

using ConstraintSpec = std::variant<PolytopeSpec, BallSpec>;

struct ExperimentConfig {
  std::string name;
  std::vector<Candidate> candidates;
  int true_model = 0;
  ConstraintSpec constraints = PolytopeSpec{};
  int horizon = 5;
  double decision_threshold = 0.98;
  int max_steps = 400;
  bool stop_on_decision = true;  // otherwise run to max_steps, recording the first crossing
  Vector x0_mean;
  Matrix x0_cov;
  Vector prior;
  Method method = Method::bc;
  int ol_horizon = 200;
  int ol_starts = 20;
  std::uint64_t seed = 0;

  void validate() const;
  Eigen::Index n_u() const { return candidates.front().model.nu(); }
  /// Constraint set for a design step given the previously applied input.
  ConstraintSet constraint_set(const Vector& u_prev, int horizon_override = 0) const;
  /// Input in force before the first design (ball centre or zero).
  Vector initial_input() const;
  BeliefState initial_belief() const;
};

/// Draws (v, w) jointly from the noise model.
class NoiseSampler {
 public:
  explicit NoiseSampler(const NoiseModel& noise);
  /// Returns (v, w).
  std::pair<Vector, Vector> draw(Rng& rng) const;

 private:
  Matrix factor_;  // joint = factor * factor'
  Eigen::Index ny_ = 0;
  Eigen::Index nx_ = 0;
};

/// One step of the true system: returns (x_next, y) with y = C x + v and
/// x_next = A x + B u + w.
std::pair<Vector, Vector> simulate_step(const StateSpaceModel& model, const NoiseSampler& sampler, const Vector& x,
                                        const Vector& u, Rng& rng);
std::pair<Vector, Vector> simulate_step(const StateSpaceModel& model, const NoiseModel& noise, const Vector& x,
                                        const Vector& u, Rng& rng);

struct StepRecord {
  Vector u;
  Vector y;
  Vector probs;  // after the update with y
  Certificate certified = Certificate::not_applicable;
  double design_ms = 0.0;
};

struct TrialRecord {
  int trial_id = 0;
  Method method = Method::bc;
  int true_model = 0;
  std::uint64_t seed = 0;
  std::optional<int> decided;
  int steps_to_decision = 0;
  Vector final_probs;
  std::vector<StepRecord> steps;

  bool correct() const { return decided && *decided == true_model; }
  double mean_design_ms() const;
  /// Share of steps with a yes certificate among steps where one applies;
  /// NaN when none applies.
  double certified_fraction() const;
};

/// Runs one closed-loop experiment with cfg.method. For the open-loop method
/// a precomputed plan can be shared between trials.
TrialRecord run_trial(const ExperimentConfig& cfg, int true_index, std::uint64_t seed,
                      const OpenLoopPlan* plan = nullptr);

/// The open-loop design for cfg, seeded deterministically from `seed`.
OpenLoopPlan plan_open_loop(const ExperimentConfig& cfg, std::uint64_t seed);

}  // namespace clafd
