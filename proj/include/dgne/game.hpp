#pragma once

#include <memory>
#include <span>
#include <vector>

#include "dgne/topology.hpp"

namespace dgne {

struct Interval {
  double lo;
  double hi;
};

/// Uniform bounds on costs, constraints and their gradients over the feasible set.
struct GameBounds {
  double K;  // |f| and ||g||
  double G;  // own-gradient and constraint-gradient norms
  double R;  // |x| over every feasible interval
};

/// Time-varying multi-cluster game with scalar decisions.
///
/// Rounds are 1-based. `profile` is a flat length-n decision vector indexed
/// by ClusterLayout::flat. Implementations must be pure so that they can be
/// evaluated concurrently.
class Game {
 public:
  virtual ~Game() = default;

  virtual const ClusterLayout& layout() const = 0;
  /// Number m of coupled constraints per agent.
  virtual int constraint_dim() const = 0;
  virtual int horizon() const = 0;
  virtual Interval feasible_interval(int cluster) const = 0;

  virtual double cost(AgentId a, int t, std::span<const double> profile) const = 0;
  /// d cost(a) / d x_a.
  virtual double grad_own(AgentId a, int t, std::span<const double> profile) const = 0;
  virtual void constraint(AgentId a, int t, double x, std::span<double> out) const = 0;
  virtual void constraint_grad(AgentId a, int t, double x, std::span<double> out) const = 0;
};

std::vector<double> positive_part(std::span<const double> v);

/// Component k is g_grad[k] where g_val[k] >= 0 and zero elsewhere.
std::vector<double> clipped_constraint_grad(std::span<const double> g_val,
                                            std::span<const double> g_grad);

double project_interval(double x, Interval interval);

/// Throws ContractViolation unless 1 <= t <= game.horizon().
void require_round(const Game& game, int t);

/// Flat profile where every member of cluster p plays y[p].
std::vector<double> consensus_profile(const ClusterLayout& layout, std::span<const double> y);

/// Cluster-level pseudo-gradient at the consensual profile built from y.
std::vector<double> pseudo_gradient_reduced(const Game& game, int t, std::span<const double> y);

/// Sum over all agents of g at the consensual profile, and its per-cluster Jacobian
/// (row p holds d/dy_p, length m). Used by the vGNE oracle.
std::vector<double> constraint_sum(const Game& game, int t, std::span<const double> y);
Matrix constraint_sum_jacobian(const Game& game, int t, std::span<const double> y);

/// The three-cluster, seven-agent example game with six coupled constraints on [-10, 10].
std::shared_ptr<const Game> example_game(int horizon);

/// Any layout on [-5, 5]: f_a = w_a (x_a - c_a(t))^2 + x_a x_{a+1} / 2 with a ring
/// over flat indices, and two constraints |x_a| <= 1. Used for scaling tests and benchmarks.
std::shared_ptr<const Game> quadratic_ring_game(ClusterLayout layout, int horizon);

/// Grid maximization of |f|, ||g|| and gradient norms, inflated by 10% (R is exact).
GameBounds estimate_bounds(const Game& game, int grid_points);

}  // namespace dgne
