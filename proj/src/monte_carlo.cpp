#include "clafd/monte_carlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

namespace clafd {

std::uint64_t trial_seed(std::uint64_t base_seed, Method m, int true_model, int replicate) {
  return substream_seed(base_seed, {static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(true_model),
                                    static_cast<std::uint64_t>(replicate)});
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

MethodSummary summarize(Method m, std::span<const TrialRecord> records) {
  MethodSummary s;
  s.method = m;
  std::vector<double> steps;
  int decided = 0;
  int correct = 0;
  int applicable = 0;
  int certified = 0;
  double design_ms = 0.0;
  int design_steps = 0;
  for (const auto& r : records) {
    if (r.method != m) continue;
    ++s.trials;
    steps.push_back(r.steps_to_decision);
    if (r.decided) ++decided;
    if (r.correct()) ++correct;
    for (const auto& st : r.steps) {
      design_ms += st.design_ms;
      ++design_steps;
      if (st.certified == Certificate::not_applicable) continue;
      ++applicable;
      if (st.certified == Certificate::yes) ++certified;
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  s.median_steps = median(std::move(steps));
  s.decide_rate = s.trials > 0 ? static_cast<double>(decided) / s.trials : nan;
  s.undecided_fraction = s.trials > 0 ? 1.0 - s.decide_rate : nan;
  s.accuracy = decided > 0 ? static_cast<double>(correct) / decided : nan;
  s.mean_design_ms = design_steps > 0 ? design_ms / design_steps : 0.0;
  s.certified_fraction = applicable > 0 ? static_cast<double>(certified) / applicable : nan;
  return s;
}

MonteCarloResult run_monte_carlo(const ExperimentConfig& cfg, std::span<const Method> methods,
                                 const MonteCarloOptions& opts) {
  cfg.validate();
  if (opts.runs_per_model < 1) throw std::invalid_argument("runs_per_model must be at least 1");
  std::vector<int> models = opts.true_models;
  if (models.empty()) {
    for (int i = 0; i < static_cast<int>(cfg.candidates.size()); ++i) models.push_back(i);
  }
  for (int i : models) {
    if (i < 0 || i >= static_cast<int>(cfg.candidates.size())) throw DimensionError("true model out of range");
  }

  struct Job {
    int id;
    std::size_t method_index;
    int true_model;
    std::uint64_t seed;
  };
  std::vector<ExperimentConfig> configs;
  std::map<std::size_t, OpenLoopPlan> plans;
  std::vector<Job> jobs;
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    ExperimentConfig c = cfg;
    c.method = methods[mi];
    configs.push_back(std::move(c));
    for (int i : models) {
      for (int r = 0; r < opts.runs_per_model; ++r) {
        jobs.push_back({static_cast<int>(jobs.size()), mi, i, trial_seed(opts.base_seed, methods[mi], i, r)});
      }
    }
  }
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    if (methods[mi] == Method::ol) {
      plans.emplace(mi, plan_open_loop(configs[mi], substream_seed(opts.base_seed, {0x0b})));
    }
  }

  MonteCarloResult out;
  out.records.resize(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      const Job& job = jobs[k];
      try {
        const auto it = plans.find(job.method_index);
        TrialRecord rec = run_trial(configs[job.method_index], job.true_model, job.seed,
                                    it == plans.end() ? nullptr : &it->second);
        rec.trial_id = job.id;
        out.records[k] = std::move(rec);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  int n_threads = opts.jobs > 0 ? opts.jobs : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  n_threads = std::min<int>(n_threads, static_cast<int>(std::max<std::size_t>(jobs.size(), 1)));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (Method m : methods) {
    const bool seen = std::any_of(out.summaries.begin(), out.summaries.end(),
                                  [m](const MethodSummary& s) { return s.method == m; });
    if (!seen) out.summaries.push_back(summarize(m, out.records));
  }
  return out;
}

}  // namespace clafd
