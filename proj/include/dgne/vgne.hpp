#pragma once

#include <span>
#include <vector>

#include "dgne/game.hpp"

namespace dgne {

struct VgneOptions {
  double tolerance = 1e-9;
  int max_iterations = 100000;
  bool record_history = false;  // keep the KKT residual of every iteration
  /// Every this many iterations (and at the start) try a Newton solve on the guessed
  /// active set; 0 disables it.
  int polish_interval = 100;
};

/// Cluster-level variational equilibrium y* with its shared multiplier mu*.
struct VgneSolution {
  std::vector<double> y_star;  // N
  std::vector<double> mu_star; // m
  double kkt_residual = 0.0;
  int iterations = 0;
  bool polished = false;  // finished by the active-set Newton step
  std::vector<double> history;
};

struct VgneStart {
  std::vector<double> y;
  std::vector<double> mu;
};

/// max(||y - P(y - F(y) - J(y) mu)||, ||[sum g(y)]_+||, |mu^T sum g(y)|) at the consensual profile.
double kkt_residual(const Game& game, int t, std::span<const double> y, std::span<const double> mu);

/// Throws OracleError(slater_violation) when no point of the box is strictly feasible
/// for the summed coupled constraints at round t.
void check_slater(const Game& game, int t);

/// Projected extragradient on the augmented operator (F + J mu, -sum g), with periodic
/// active-set Newton polishing (see VgneOptions::polish_interval). Starts from
/// `start` when given, else from the box center with mu = 0.
VgneSolution solve_vgne(const Game& game, int t, const VgneOptions& options = {},
                        const VgneStart* start = nullptr);

/// Solutions for t = 1..horizon. Warm starts chain rounds sequentially; cold starts
/// solve rounds independently across OpenMP threads. Errors carry the round index.
std::vector<VgneSolution> vgne_series(const Game& game, int horizon, const VgneOptions& options = {},
                                      bool warm_start = true);

}  // namespace dgne
