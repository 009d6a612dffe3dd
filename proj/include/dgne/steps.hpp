#pragma once

#include <functional>
#include <string>
#include <vector>

namespace dgne {

enum class StepKind {
  horizon_power,  // alpha = T^-a1, beta = T^-a2, gamma = T^-a3
  decaying,       // alpha = t^-0.98, beta = T^-0.02, gamma = T^-1.5
  tuned,          // a1 = 3/4, a2 = 1/4, a3 = 3/2
};

struct StepSpec {
  StepKind kind = StepKind::decaying;
  double a1 = 0.75;
  double a2 = 0.25;
  double a3 = 1.5;
};

StepKind parse_step_kind(const std::string& name);
std::string step_kind_name(StepKind kind);

/// Outcome of the step-size criteria check; `first_bad_round` is 0 when it passes.
struct StepCheck {
  bool monotone_ok = true;  // each sequence in (0, 1] and nonincreasing
  bool cross_ok = true;     // beta_t gamma_{t-1} <= beta_{t-1} gamma_t <= 1
  int first_bad_round = 0;
  std::string message;

  bool ok() const { return monotone_ok && cross_ok; }
};

/// Precomputed alpha, beta, gamma and sigma = 4^(t - T) for t in [1, T].
class StepSchedule {
 public:
  /// No validation; use check_step_conditions or make_step_schedule for that.
  StepSchedule(int horizon, const std::function<double(int)>& alpha,
               const std::function<double(int)>& beta, const std::function<double(int)>& gamma);

  int horizon() const { return horizon_; }
  double alpha(int t) const { return alpha_.at(t - 1); }
  double beta(int t) const { return beta_.at(t - 1); }
  double gamma(int t) const { return gamma_.at(t - 1); }
  double sigma(int t) const;
  /// beta_t / gamma_t.
  double delta(int t) const { return beta(t) / gamma(t); }
  /// sigma_t (t - 1) K / Delta_{t-1}; zero at t = 1.
  double dual_bound(int t, double K) const;

 private:
  int horizon_;
  std::vector<double> alpha_, beta_, gamma_;
};

StepCheck check_step_conditions(const StepSchedule& schedule);

/// Builds the schedule without checking it.
StepSchedule build_step_schedule(const StepSpec& spec, int horizon);

/// Builds the schedule and throws ConfigError naming the first offending round
/// when the step-size criteria fail.
StepSchedule make_step_schedule(const StepSpec& spec, int horizon);

}  // namespace dgne
