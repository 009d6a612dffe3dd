#pragma once

#include <span>
#include <vector>

#include "dgne/engine.hpp"
#include "dgne/game.hpp"
#include "dgne/steps.hpp"
#include "dgne/vgne.hpp"

namespace dgne {

/// Comparator y*(t) per round, index t - 1.
using Comparator = std::vector<std::vector<double>>;

Comparator comparator_from(const std::vector<VgneSolution>& series);

/// Neumaier compensated summation.
class CompensatedSum {
 public:
  void add(double v);
  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

/// Profile where every member of `cluster` plays `value` and every other cluster
/// plays its comparator value.
std::vector<double> deviation_profile(const ClusterLayout& layout, std::span<const double> y_star,
                                      int cluster, double value);

/// Cumulative per-agent regret R_ij(t) for t = 1..rounds. Sums all of cluster i's cost terms.
std::vector<double> regret_agent(const Trajectory& traj, const Game& game,
                                 const Comparator& comparator, AgentId agent);
/// Cumulative system regret R(t); each agent contributes only its own cost term.
std::vector<double> regret_system(const Trajectory& traj, const Game& game,
                                  const Comparator& comparator);
/// CV(t) = || sum_{s <= t} sum_ij [g_ij^s(x_ij,s)]_+ ||.
std::vector<double> constraint_violation(const Trajectory& traj, const Game& game);
/// Phi_t = sum_{s <= t} sum_i |y*_i(s+1) - y*_i(s)| for t = 1..size - 1.
std::vector<double> path_variation(const Comparator& comparator);

/// max_ij |x_ij - mean of cluster i|.
double consensus_error(const ClusterLayout& layout, std::span<const double> x);

struct DualBoundReport {
  bool ok = true;
  double worst_margin = 0.0;  // max over rounds and agents of norm - bound (bound includes 1e-9)
  int first_violation_round = 0;
  int agent = -1;
  bool on_z = false;
};

inline constexpr double kDualBoundSlack = 1e-9;

/// Checks ||mu_ij,t|| and ||z_ij,t|| against sigma_t (t - 1) K / Delta_{t-1} + 1e-9.
DualBoundReport dual_bound_check(const Trajectory& traj, const StepSchedule& schedule, double K);

struct MetricRow {
  int t = 0;
  double regret = 0.0;
  double cv = 0.0;
  std::vector<double> regret_agent;
  double path_variation = 0.0;
  double consensus_error = 0.0;
  double estimation_error = 0.0;
  double max_mu_norm = 0.0;
  double max_z_norm = 0.0;
  double sigma = 0.0;
  double dual_bound_margin = 0.0;  // this round's max of norm - bound
};

/// Streams the metric series one round at a time so long runs need not keep a Trajectory.
class MetricAccumulator {
 public:
  MetricAccumulator(const Game& game, const Comparator& comparator, const StepSchedule& schedule,
                    double K);

  /// Consumes the state played at round t (rounds must arrive in order 1, 2, ...).
  const MetricRow& add(int t, const EngineState& state);
  const MetricRow& last() const { return row_; }
  double worst_dual_bound_margin() const { return worst_margin_; }

 private:
  const Game& game_;
  const Comparator& comparator_;
  const StepSchedule& schedule_;
  double K_;
  std::vector<CompensatedSum> regret_agent_;
  CompensatedSum regret_;
  std::vector<CompensatedSum> cv_;
  CompensatedSum phi_;
  MetricRow row_;
  double worst_margin_;
  std::vector<double> profile_, g_;
};

}  // namespace dgne
