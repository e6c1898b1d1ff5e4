#pragma once

#include "clafd/monte_carlo.hpp"
#include "clafd/scenarios.hpp"

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>

namespace clafd {

/// method,true_model,trial,decided,correct,steps,mean_design_ms,certified_fraction
void write_summary_csv(std::ostream& os, std::span<const TrialRecord> records);

/// step,u_0..,y_0..,P_0..,certified
void write_trace_csv(std::ostream& os, const TrialRecord& record);

/// R,scale,pass
void write_sweep_csv(std::ostream& os, std::span<const SweepCell> cells);

/// One row per method with the Monte-Carlo statistics.
void write_methods_csv(std::ostream& os, std::span<const MethodSummary> summaries);

/// Scenario files: see docs/scenario_format.md.
ExperimentConfig scenario_from_json(const std::string& text);
std::string scenario_to_json(const ExperimentConfig& cfg);

/// A built-in scenario name, or else a path to a JSON file.
ExperimentConfig load_scenario(const std::string& name_or_path);

void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace clafd
