#pragma once

#include "misspec/asymptotics.hpp"
#include "misspec/experiments.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace misspec {

/// Reads a JSON configuration. A "preset" key selects the starting point
/// (default or example1); every other key overrides it.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);

/// Header `method,n,alpha,rep,regret,w_1..w_dw`; failed samples are skipped.
void write_samples_csv(const std::string& path, const std::vector<RegretSample>& samples, int decision_dim);
std::vector<RegretSample> read_samples_csv(const std::string& path);

nlohmann::json summary_to_json(const SweepResult& result);
nlohmann::json cell_to_json(const CellResult& cell);
nlohmann::json report_to_json(const AsymptoticReport& report);

/// Long format: direction,regime,alpha,n,method,statistic,value.
void write_panel_csv(const std::string& path, const std::vector<const CellResult*>& cells);

/// Writes samples_<direction>.csv, panel_<direction>.csv and summary.json into `dir`.
/// Returns the written paths.
std::vector<std::string> emit(const SweepResult& result, const std::string& dir);

void write_json(const std::string& path, const nlohmann::json& j);

/// Direction label usable in a file name.
std::string file_stem(const std::string& label);

}  // namespace misspec
