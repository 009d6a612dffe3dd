#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "dgne/config.hpp"
#include "dgne/delay.hpp"
#include "dgne/game.hpp"
#include "dgne/metrics.hpp"
#include "dgne/topology.hpp"

namespace dgne {

/// The delay-independent parts of an experiment, built once and shared by sweeps.
struct ExperimentContext {
  std::shared_ptr<const Game> game;  // horizon T + 1 so the comparator reaches T + 1
  Network network;
  GameBounds bounds;
  Comparator comparator;  // y*(t) for t = 1..T + 1
};

ExperimentContext prepare_context(const ExperimentConfig& config);

std::shared_ptr<const DelaySchedule> delay_schedule_from_config(const DelayConfig& config);

struct RunReport {
  std::string label;
  int horizon = 0;
  double regret_over_t = 0.0;
  double cv_over_t = 0.0;
  std::vector<double> regret_agent_over_t;
  double consensus_error = 0.0;
  double estimation_error = 0.0;
  double max_mu_norm = 0.0;
  double sigma = 0.0;
  double path_variation = 0.0;
  CalendarStats calendar;
  double dual_bound_worst_margin = 0.0;  // max over rounds of dual norm - bound; <= 0 passes
  double wall_seconds = 0.0;
  std::string csv_path;  // empty when no CSV was written
  int csv_rows = 0;
  // Thinned series as written to the CSV.
  std::vector<int> series_t;
  std::vector<double> series_regret_over_t;
  std::vector<double> series_cv_over_t;
  std::vector<std::vector<double>> series_regret_agent_over_t;  // per row, per agent
};

/// CSV header for a layout: t, R_over_t, CV_over_t, R_<i><j>_over_t..., diagnostics.
std::vector<std::string> csv_header(const ClusterLayout& layout);

/// Runs one configuration and writes its CSV to config.output_path (skipped when empty).
RunReport run_experiment(const ExperimentConfig& config);
RunReport run_experiment(const ExperimentConfig& config, const ExperimentContext& context);

struct SweepResult {
  std::vector<RunReport> members;
  std::filesystem::path comparison_csv;
  std::filesystem::path summary_csv;
};

/// One run per t0 (members in parallel), each writing <dir>/t0_<value>.csv, plus
/// comparison.csv (R/t and CV/t per member) and summary.csv (terminal values).
SweepResult sweep_constant_delays(const ExperimentConfig& config, const std::vector<int>& t0_list,
                                  const std::filesystem::path& output_dir);

/// Empirical growth exponents over a horizon sweep and the resulting assumption flags.
struct DelayAssessment {
  std::string schedule;
  std::vector<int> horizons;
  std::vector<double> max_batch;  // c per horizon
  std::vector<double> miss_max;   // max_ij |U_ij,[T]| per horizon
  std::vector<double> delay_sum;  // max_ij T_ij,T per horizon
  std::vector<double> path_variation;
  double c_exponent = 0.0;
  double u = 0.0;
  double tau = 0.0;
  double phi = 0.0;
  bool feedback_ok = true;  // every agent receives feedback at every horizon
  bool bounded_batches = true;  // c does not grow
  bool sublinear = true;        // u < 1 and phi < 1
  bool delay_condition = true;  // max(1, tau) < 2 - phi
  bool ok() const { return feedback_ok && bounded_batches && sublinear && delay_condition; }
};

/// Least-squares slope of log(max(v, 1)) against log(horizon).
double growth_exponent(const std::vector<int>& horizons, const std::vector<double>& values);

DelayAssessment assess_delay(const DelaySchedule& schedule, const ClusterLayout& layout,
                             const Comparator& comparator, int horizon);

struct TypeSweepResult {
  SweepResult sweep;
  std::vector<DelayAssessment> assessments;  // types 1, 2, 3
};

/// Delay types 1, 2 and 3 with t1 and t2 from the config.
TypeSweepResult sweep_delay_types(const ExperimentConfig& config,
                                  const std::filesystem::path& output_dir);

struct VerificationReport {
  bool global_connected = false;
  bool clusters_connected = false;
  bool cluster_graph_connected = false;
  bool mixing_doubly_stochastic = false;
  bool laplacian_rows_zero = false;
  double consensus_contraction = 0.0;
  std::vector<int> agents_without_feedback;  // flat indices
  StepCheck steps;
  DelayAssessment delay;
  std::string error;  // construction failure, if any

  bool ok() const;
};

/// Report-only check of the standing assumptions for a configuration. A
/// schedule may be supplied to check instead of the configured one.
VerificationReport verify_assumptions(const ExperimentConfig& config,
                                      const StepSchedule* schedule_override = nullptr);

/// Writes `text` to `path` through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace dgne
