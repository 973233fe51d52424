#pragma once

#include "tstokes/config.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace tstokes {

// Measurements plus named assertions of one scenario run. Soft assertions
// are reported but never fail the run.
class Report {
 public:
  explicit Report(const ScenarioConfig& config);

  nlohmann::json& measurements() { return data_["measurements"]; }
  const nlohmann::json& json() const { return data_; }

  bool at_most(const std::string& name, double value, double limit, bool soft = false);
  bool at_least(const std::string& name, double value, double limit, bool soft = false);
  bool holds(const std::string& name, bool condition, bool soft = false);

  // True when every hard assertion passed (and at least one was declared).
  bool passed() const;
  // Status of a named assertion; throws invalid_parameter when missing.
  bool assertion_passed(const std::string& name) const;
  void write(const std::filesystem::path& path) const;

 private:
  bool record(const std::string& name, double value, const char* relation, double limit,
              bool ok, bool soft);

  nlohmann::json data_;
};

Report scenario_simulate(const ScenarioConfig& config, const std::filesystem::path& out);
Report scenario_stability(const ScenarioConfig& config, const std::filesystem::path& out);
Report scenario_analyticity(const ScenarioConfig& config, const std::filesystem::path& out);
Report scenario_picard(const ScenarioConfig& config, const std::filesystem::path& out);
Report scenario_hadamard(const ScenarioConfig& config, const std::filesystem::path& out);
Report scenario_control(const ScenarioConfig& config, const std::filesystem::path& out);
Report scenario_bench(const ScenarioConfig& config, const std::filesystem::path& out);

// Dispatches on config.scenario, creates the output directory and writes
// report.json next to the scenario's own files.
Report run_scenario(const ScenarioConfig& config, const std::filesystem::path& out);

}  // namespace tstokes
