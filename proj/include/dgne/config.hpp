#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dgne/engine.hpp"
#include "dgne/steps.hpp"

namespace dgne {

struct TopologyConfig {
  std::string preset = "example";       // "example" or "custom"
  std::vector<int> cluster_sizes;     // custom only
  std::vector<Graph::Edge> edges;     // custom only, one-based agent numbers
};

struct DelayConfig {
  std::string kind = "none";  // none, constant, type1, type2, type3
  int t0 = 0;
  int t1 = 30;
  int t2 = 30;
};

struct ExperimentConfig {
  int horizon = 5000;
  TopologyConfig topology;
  std::string game = "example";
  DelayConfig delay;
  StepSpec steps;
  double init_decision = 10.0;
  double init_estimate = 10.0;
  double oracle_tolerance = 1e-9;
  int oracle_max_iterations = 100000;
  std::string output_path = "run.csv";
  int thinning = 0;  // 0 = automatic: 1 up to 10^4 rounds, else ceil(T / 10^4)
  KernelChoice kernel = KernelChoice::automatic;
  int bound_grid_points = 100;
};

/// Parses INI text ("[section]" headers, "key = value", "#" or ";" comments).
/// Each override is "section.key=value" and is applied before validation.
ExperimentConfig parse_config(const std::string& text,
                              const std::vector<std::string>& overrides = {});
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides = {});

/// Canonical INI form: every key, fixed order, 17 significant digits.
std::string serialize_config(const ExperimentConfig& config);

/// Throws ConfigError on the first invalid field.
void validate_config(const ExperimentConfig& config);

int effective_thinning(const ExperimentConfig& config);

TopologySpec topology_from_config(const TopologyConfig& config);

/// printf "%.17g": enough digits to round-trip any double.
std::string format_double(double v);

}  // namespace dgne
