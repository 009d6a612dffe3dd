#include "dgne/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dgne/errors.hpp"

namespace dgne {

Comparator comparator_from(const std::vector<VgneSolution>& series) {
  Comparator out;
  out.reserve(series.size());
  for (const auto& s : series) out.push_back(s.y_star);
  return out;
}

void CompensatedSum::add(double v) {
  const double t = sum_ + v;
  if (std::abs(sum_) >= std::abs(v))
    compensation_ += (sum_ - t) + v;
  else
    compensation_ += (v - t) + sum_;
  sum_ = t;
}

std::vector<double> deviation_profile(const ClusterLayout& layout, std::span<const double> y_star,
                                      int cluster, double value) {
  std::vector<double> profile(layout.agent_count());
  for (int a = 0; a < layout.agent_count(); ++a) {
    const int c = layout.cluster_of(a);
    profile[a] = c == cluster ? value : y_star[c];
  }
  return profile;
}

namespace {

void require_comparator(const Trajectory& traj, const Game& game, const Comparator& comparator) {
  if (static_cast<int>(comparator.size()) < traj.rounds)
    throw ContractViolation("comparator covers " + std::to_string(comparator.size()) +
                            " rounds, trajectory has " + std::to_string(traj.rounds));
  if (traj.n != game.layout().agent_count())
    throw ContractViolation("trajectory and game disagree on the agent count");
}

double norm(std::span<const double> v) {
  double sq = 0.0;
  for (double d : v) sq += d * d;
  return std::sqrt(sq);
}

}  // namespace

std::vector<double> regret_agent(const Trajectory& traj, const Game& game,
                                 const Comparator& comparator, AgentId agent) {
  require_comparator(traj, game, comparator);
  const auto& layout = game.layout();
  const int a = layout.flat(agent);
  std::vector<double> out(traj.rounds);
  CompensatedSum total;
  for (int t = 1; t <= traj.rounds; ++t) {
    const auto& ys = comparator[t - 1];
    const auto dev = deviation_profile(layout, ys, agent.cluster, traj.decisions(t)[a]);
    const auto star = consensus_profile(layout, ys);
    double d = 0.0;
    for (int k = 0; k < layout.cluster_size(agent.cluster); ++k)
      d += game.cost({agent.cluster, k}, t, dev) - game.cost({agent.cluster, k}, t, star);
    total.add(d);
    out[t - 1] = total.value();
  }
  return out;
}

std::vector<double> regret_system(const Trajectory& traj, const Game& game,
                                  const Comparator& comparator) {
  require_comparator(traj, game, comparator);
  const auto& layout = game.layout();
  std::vector<double> out(traj.rounds);
  CompensatedSum total;
  for (int t = 1; t <= traj.rounds; ++t) {
    const auto& ys = comparator[t - 1];
    const auto star = consensus_profile(layout, ys);
    for (int a = 0; a < layout.agent_count(); ++a) {
      const AgentId id = layout.agent(a);
      const auto dev = deviation_profile(layout, ys, id.cluster, traj.decisions(t)[a]);
      total.add(game.cost(id, t, dev) - game.cost(id, t, star));
    }
    out[t - 1] = total.value();
  }
  return out;
}

std::vector<double> constraint_violation(const Trajectory& traj, const Game& game) {
  const auto& layout = game.layout();
  const int m = game.constraint_dim();
  std::vector<CompensatedSum> sums(m);
  std::vector<double> g(m), current(m), out(traj.rounds);
  for (int t = 1; t <= traj.rounds; ++t) {
    const auto x = traj.decisions(t);
    for (int a = 0; a < layout.agent_count(); ++a) {
      game.constraint(layout.agent(a), t, x[a], g);
      for (int k = 0; k < m; ++k) sums[k].add(std::max(0.0, g[k]));
    }
    for (int k = 0; k < m; ++k) current[k] = sums[k].value();
    out[t - 1] = norm(current);
  }
  return out;
}

std::vector<double> path_variation(const Comparator& comparator) {
  if (comparator.size() < 2) throw ContractViolation("path variation needs at least two rounds");
  std::vector<double> out(comparator.size() - 1);
  CompensatedSum total;
  for (std::size_t t = 0; t + 1 < comparator.size(); ++t) {
    for (std::size_t i = 0; i < comparator[t].size(); ++i)
      total.add(std::abs(comparator[t + 1][i] - comparator[t][i]));
    out[t] = total.value();
  }
  return out;
}

double consensus_error(const ClusterLayout& layout, std::span<const double> x) {
  double worst = 0.0;
  for (int c = 0; c < layout.cluster_count(); ++c) {
    const int lo = layout.offset(c);
    const int size = layout.cluster_size(c);
    double mean = 0.0;
    for (int j = 0; j < size; ++j) mean += x[lo + j];
    mean /= size;
    for (int j = 0; j < size; ++j) worst = std::max(worst, std::abs(x[lo + j] - mean));
  }
  return worst;
}

DualBoundReport dual_bound_check(const Trajectory& traj, const StepSchedule& schedule, double K) {
  if (schedule.horizon() < traj.rounds)
    throw ContractViolation("step schedule shorter than the trajectory");
  if (traj.mu_norm.size() != static_cast<std::size_t>(traj.rounds) * traj.n)
    throw ContractViolation("trajectory was recorded without per-round dual norms");
  DualBoundReport report;
  report.worst_margin = -std::numeric_limits<double>::infinity();
  for (int t = 1; t <= traj.rounds; ++t) {
    const double bound = schedule.dual_bound(t, K) + kDualBoundSlack;
    for (int a = 0; a < traj.n; ++a) {
      for (bool z : {false, true}) {
        const double v = z ? traj.z_norm_at(t, a) : traj.mu_norm_at(t, a);
        const double margin = v - bound;
        report.worst_margin = std::max(report.worst_margin, margin);
        if (margin > 0.0 && report.ok) {
          report.ok = false;
          report.first_violation_round = t;
          report.agent = a;
          report.on_z = z;
        }
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Accumulator

MetricAccumulator::MetricAccumulator(const Game& game, const Comparator& comparator,
                                     const StepSchedule& schedule, double K)
    : game_(game),
      comparator_(comparator),
      schedule_(schedule),
      K_(K),
      regret_agent_(game.layout().agent_count()),
      cv_(game.constraint_dim()),
      worst_margin_(-std::numeric_limits<double>::infinity()),
      profile_(game.layout().agent_count()),
      g_(game.constraint_dim()) {
  row_.regret_agent.assign(game.layout().agent_count(), 0.0);
}

const MetricRow& MetricAccumulator::add(int t, const EngineState& state) {
  if (t != row_.t + 1)
    throw ContractViolation("metric rounds must arrive in order; expected " +
                            std::to_string(row_.t + 1) + ", got " + std::to_string(t));
  if (static_cast<int>(comparator_.size()) < t)
    throw ContractViolation("comparator does not cover round " + std::to_string(t));
  const auto& layout = game_.layout();
  const int n = layout.agent_count();
  const int m = game_.constraint_dim();
  const auto& ys = comparator_[t - 1];
  const auto star = consensus_profile(layout, ys);

  // Cost of every agent at the comparator, reused by all deviation terms.
  std::vector<double> star_cost(n);
  for (int a = 0; a < n; ++a) star_cost[a] = game_.cost(layout.agent(a), t, star);

  for (int a = 0; a < n; ++a) {
    const AgentId id = layout.agent(a);
    for (int b = 0; b < n; ++b) {
      const int c = layout.cluster_of(b);
      profile_[b] = c == id.cluster ? state.x[a] : ys[c];
    }
    double d = 0.0;
    for (int k = 0; k < layout.cluster_size(id.cluster); ++k) {
      const AgentId member{id.cluster, k};
      const double diff = game_.cost(member, t, profile_) - star_cost[layout.flat(member)];
      d += diff;
      if (k == id.index) regret_.add(diff);
    }
    regret_agent_[a].add(d);

    game_.constraint(id, t, state.x[a], g_);
    for (int k = 0; k < m; ++k) cv_[k].add(std::max(0.0, g_[k]));
  }

  row_.t = t;
  row_.regret = regret_.value();
  for (int a = 0; a < n; ++a) row_.regret_agent[a] = regret_agent_[a].value();
  double cv_sq = 0.0;
  for (int k = 0; k < m; ++k) cv_sq += cv_[k].value() * cv_[k].value();
  row_.cv = std::sqrt(cv_sq);

  if (static_cast<int>(comparator_.size()) > t) {
    const auto& next = comparator_[t];
    for (std::size_t i = 0; i < ys.size(); ++i) phi_.add(std::abs(next[i] - ys[i]));
    row_.path_variation = phi_.value();
  } else {
    row_.path_variation = std::numeric_limits<double>::quiet_NaN();
  }

  row_.consensus_error = consensus_error(layout, state.x);
  row_.estimation_error = estimation_error(state);
  row_.sigma = schedule_.sigma(t);

  const double bound = schedule_.dual_bound(t, K_) + kDualBoundSlack;
  double max_mu = 0.0, max_z = 0.0;
  for (int a = 0; a < n; ++a) {
    max_mu = std::max(max_mu, norm(state.mu_row(a)));
    max_z = std::max(max_z, norm(state.z_row(a)));
  }
  row_.max_mu_norm = max_mu;
  row_.max_z_norm = max_z;
  row_.dual_bound_margin = std::max(max_mu, max_z) - bound;
  worst_margin_ = std::max(worst_margin_, row_.dual_bound_margin);
  return row_;
}

}  // namespace dgne
