#pragma once

#include "clafd/simulation.hpp"

#include <span>
#include <vector>

namespace clafd {

struct MonteCarloOptions {
  int runs_per_model = 1;
  std::uint64_t base_seed = 0;
  int jobs = 0;                  // 0: hardware concurrency
  std::vector<int> true_models;  // empty: every candidate
};

struct MethodSummary {
  Method method = Method::bc;
  int trials = 0;
  double median_steps = 0.0;
  double decide_rate = 0.0;
  double undecided_fraction = 0.0;
  double accuracy = 0.0;  // correct / decided, NaN without decisions
  double mean_design_ms = 0.0;
  double certified_fraction = 0.0;  // pooled over applicable steps, NaN if none
};

struct MonteCarloResult {
  std::vector<TrialRecord> records;  // ordered by trial id
  std::vector<MethodSummary> summaries;
};

/// Trial seed for (method, true model, replicate).
std::uint64_t trial_seed(std::uint64_t base_seed, Method m, int true_model, int replicate);

MonteCarloResult run_monte_carlo(const ExperimentConfig& cfg, std::span<const Method> methods,
                                 const MonteCarloOptions& opts);

MethodSummary summarize(Method m, std::span<const TrialRecord> records);

double median(std::vector<double> values);

}  // namespace clafd
