#include "dgne/steps.hpp"

#include <cmath>

#include "dgne/errors.hpp"

namespace dgne {

StepKind parse_step_kind(const std::string& name) {
  if (name == "horizon_power") return StepKind::horizon_power;
  if (name == "decaying") return StepKind::decaying;
  if (name == "tuned") return StepKind::tuned;
  throw ConfigError("unknown step schedule '" + name +
                    "' (expected horizon_power, decaying or tuned)");
}

std::string step_kind_name(StepKind kind) {
  switch (kind) {
    case StepKind::horizon_power: return "horizon_power";
    case StepKind::decaying: return "decaying";
    case StepKind::tuned: return "tuned";
  }
  return "unknown";
}

StepSchedule::StepSchedule(int horizon, const std::function<double(int)>& alpha,
                           const std::function<double(int)>& beta,
                           const std::function<double(int)>& gamma)
    : horizon_(horizon) {
  if (horizon < 1) throw ConfigError("step schedule horizon must be >= 1");
  alpha_.reserve(horizon);
  beta_.reserve(horizon);
  gamma_.reserve(horizon);
  for (int t = 1; t <= horizon; ++t) {
    alpha_.push_back(alpha(t));
    beta_.push_back(beta(t));
    gamma_.push_back(gamma(t));
  }
}

double StepSchedule::sigma(int t) const {
  // 4^(t - T) = 2^(2(t - T)); ldexp is exact and underflows cleanly to 0.
  return std::ldexp(1.0, 2 * (t - horizon_));
}

double StepSchedule::dual_bound(int t, double K) const {
  if (t <= 1) return 0.0;
  return sigma(t) * (t - 1) * K / delta(t - 1);
}

StepCheck check_step_conditions(const StepSchedule& s) {
  StepCheck check;
  auto fail = [&](bool& flag, int t, const std::string& what) {
    flag = false;
    check.first_bad_round = t;
    check.message = what + " fails at t = " + std::to_string(t);
  };
  for (int t = 1; t <= s.horizon(); ++t) {
    const double a = s.alpha(t), b = s.beta(t), g = s.gamma(t);
    if (!(a > 0.0 && a <= 1.0) || !(b > 0.0 && b <= 1.0) || !(g > 0.0 && g <= 1.0)) {
      fail(check.monotone_ok, t, "step sizes in (0, 1]");
      return check;
    }
    if (t == 1) continue;
    if (a > s.alpha(t - 1) || b > s.beta(t - 1) || g > s.gamma(t - 1)) {
      fail(check.monotone_ok, t, "nonincreasing step sizes");
      return check;
    }
    const double lhs = b * s.gamma(t - 1);
    const double mid = s.beta(t - 1) * g;
    if (!(lhs <= mid && mid <= 1.0)) {
      fail(check.cross_ok, t, "beta_t gamma_{t-1} <= beta_{t-1} gamma_t <= 1");
      return check;
    }
  }
  return check;
}

StepSchedule build_step_schedule(const StepSpec& spec, int horizon) {
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  const double T = horizon;
  auto constant = [](double v) { return [v](int) { return v; }; };
  switch (spec.kind) {
    case StepKind::decaying:
      return StepSchedule(
          horizon, [](int t) { return std::pow(static_cast<double>(t), -0.98); },
          constant(std::pow(T, -0.02)), constant(std::pow(T, -1.5)));
    case StepKind::tuned:
      return StepSchedule(horizon, constant(std::pow(T, -0.75)), constant(std::pow(T, -0.25)),
                          constant(std::pow(T, -1.5)));
    case StepKind::horizon_power:
      break;
  }
  return StepSchedule(horizon, constant(std::pow(T, -spec.a1)), constant(std::pow(T, -spec.a2)),
                      constant(std::pow(T, -spec.a3)));
}

StepSchedule make_step_schedule(const StepSpec& spec, int horizon) {
  StepSchedule schedule = build_step_schedule(spec, horizon);
  const StepCheck check = check_step_conditions(schedule);
  if (!check.ok())
    throw ConfigError(step_kind_name(spec.kind) + " step schedule: " + check.message);
  return schedule;
}

}  // namespace dgne
