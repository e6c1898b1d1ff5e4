#include "clafd/results_io.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace clafd;

namespace {

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
  std::vector<Method> out;
  for (const auto& n : names) out.push_back(parse_method(n));
  return out;
}

template <class Writer>
void emit(const fs::path& path, Writer&& writer) {
  std::ostringstream os;
  writer(os);
  write_text_file(path, os.str());
}

void print_summary(const MethodSummary& s) {
  std::cout << to_string(s.method) << ": trials=" << s.trials << " median_steps=" << s.median_steps
            << " decide_rate=" << s.decide_rate << " accuracy=" << s.accuracy
            << " mean_design_ms=" << s.mean_design_ms;
  if (!std::isnan(s.certified_fraction)) std::cout << " certified_fraction=" << s.certified_fraction;
  std::cout << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop active fault diagnosis experiments"};
  app.require_subcommand(1);

  std::string scenario = "uncontrolled-polytope";
  std::vector<std::string> method_names{"bc"};
  int runs_per_model = 1;
  std::uint64_t seed = 0;
  int jobs = 0;
  std::string out_dir = "out";
  bool traces = false;

  auto* run = app.add_subcommand("run", "Monte-Carlo batch");
  run->add_option("--scenario", scenario, "built-in scenario name or JSON file");
  run->add_option("--method", method_names, "bd, qta, bc, sbc, ol or none (repeatable)")->delimiter(',');
  run->add_option("--runs-per-model", runs_per_model)->check(CLI::PositiveNumber);
  run->add_option("--seed", seed);
  run->add_option("--jobs", jobs, "worker threads (0: all cores)");
  run->add_option("--out", out_dir);
  run->add_flag("--traces", traces, "also write trace_<id>.csv for every trial");

  std::vector<double> r_values;
  std::vector<double> scales;
  auto* sweep = app.add_subcommand("sweep-concavity", "concavity grid over noise variance and model difference");
  sweep->add_option("--out", out_dir);
  sweep->add_option("--R", r_values, "noise variances")->delimiter(',');
  sweep->add_option("--scales", scales, "output-matrix scale factors")->delimiter(',');

  int true_model = -1;
  std::string method_name = "bc";
  bool trace = false;
  auto* trial = app.add_subcommand("trial", "single closed-loop experiment");
  trial->add_option("--scenario", scenario);
  trial->add_option("--method", method_name);
  trial->add_option("--true-model", true_model, "defaults to the scenario's");
  trial->add_option("--seed", seed);
  trial->add_option("--out", out_dir);
  trial->add_flag("--trace", trace, "write trace_<id>.csv");
  bool run_to_max = false;
  trial->add_flag("--run-to-max", run_to_max, "keep running after the decision threshold is crossed");

  std::string export_path;
  auto* exp = app.add_subcommand("export-scenario", "write a built-in scenario as JSON");
  exp->add_option("name", scenario)->required();
  exp->add_option("--out", export_path, "file (stdout if omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const ExperimentConfig cfg = load_scenario(scenario);
      const auto methods = parse_methods(method_names);
      MonteCarloOptions opts;
      opts.runs_per_model = runs_per_model;
      opts.base_seed = seed;
      opts.jobs = jobs;
      const MonteCarloResult res = run_monte_carlo(cfg, methods, opts);
      const fs::path dir(out_dir);
      emit(dir / "summary.csv", [&](std::ostream& os) { write_summary_csv(os, res.records); });
      emit(dir / "methods.csv", [&](std::ostream& os) { write_methods_csv(os, res.summaries); });
      if (traces) {
        for (const auto& r : res.records) {
          emit(dir / ("trace_" + std::to_string(r.trial_id) + ".csv"),
               [&](std::ostream& os) { write_trace_csv(os, r); });
        }
      }
      for (const auto& s : res.summaries) print_summary(s);
    } else if (*sweep) {
      const ExperimentConfig base = build_scenario("uncontrolled-polytope");
      if (r_values.empty()) r_values = sweep_default_R();
      if (scales.empty()) scales = sweep_default_scales();
      const auto cells = concavity_sweep(base, r_values, scales, sweep_default_input());
      emit(fs::path(out_dir) / "sweep.csv", [&](std::ostream& os) { write_sweep_csv(os, cells); });
      std::size_t passed = 0;
      for (const auto& c : cells) passed += c.pass ? 1 : 0;
      std::cout << passed << " of " << cells.size() << " cells satisfy the concavity condition\n";
    } else if (*trial) {
      ExperimentConfig cfg = load_scenario(scenario);
      cfg.method = parse_method(method_name);
      cfg.stop_on_decision = !run_to_max;
      const int index = true_model >= 0 ? true_model : cfg.true_model;
      TrialRecord rec = run_trial(cfg, index, seed);
      std::cout << "method=" << to_string(rec.method) << " true_model=" << rec.true_model
                << " decided=" << (rec.decided ? std::to_string(*rec.decided) : std::string("none"))
                << " steps=" << rec.steps_to_decision << '\n';
      if (trace) {
        emit(fs::path(out_dir) / ("trace_" + std::to_string(rec.trial_id) + ".csv"),
             [&](std::ostream& os) { write_trace_csv(os, rec); });
      }
    } else if (*exp) {
      const std::string text = scenario_to_json(build_scenario(scenario));
      if (export_path.empty()) {
        std::cout << text;
      } else {
        write_text_file(export_path, text);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
