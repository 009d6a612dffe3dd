#pragma once

#include <functional>
#include <span>
#include <vector>

#include "dgne/delay.hpp"
#include "dgne/game.hpp"
#include "dgne/steps.hpp"
#include "dgne/topology.hpp"

namespace dgne {

/// Joint state of all agents at one round, structure-of-arrays, flat agent order.
struct EngineState {
  int n = 0;
  int m = 0;
  std::vector<double> x;          // n decisions
  std::vector<double> estimates;  // n x n, row a is agent a's estimate vector
  std::vector<double> z;          // n x m auxiliary variables
  std::vector<double> mu;         // n x m dual variables

  EngineState() = default;
  EngineState(int agents, int dim);

  std::span<const double> estimate_row(int a) const { return {estimates.data() + a * n, std::size_t(n)}; }
  std::span<double> estimate_row(int a) { return {estimates.data() + a * n, std::size_t(n)}; }
  std::span<const double> z_row(int a) const { return {z.data() + a * m, std::size_t(m)}; }
  std::span<const double> mu_row(int a) const { return {mu.data() + a * m, std::size_t(m)}; }
};

/// Every agent plays `decision` and holds `estimate` for all entries except its own,
/// which is pinned to its decision. z = mu = 0.
EngineState initial_state(const Game& game, double decision, double estimate);

/// Read-only inputs of one round.
struct RoundInputs {
  const Game& game;
  const Network& network;
  const FeedbackCalendar& calendar;
  int t;
  double alpha;
  double beta;
  double gamma;
  double sigma;
};

/// Per-round buffers reused across rounds.
struct RoundScratch {
  std::vector<double> agg;       // n aggregated gradients
  std::vector<double> gpos;      // n x m summed positive constraint parts
  std::vector<double> adjusted;  // n gradient-adjusted iterates x - alpha * agg

  void resize(int n, int m);
};

// ---------------------------------------------------------------------------
// Per-agent operations. Each reads round-t state only.

/// Sum over delivered timestamps s of grad_own(s) + mu^T clipped grad g(s), evaluated at
/// the current decision and estimates. Adds the positive constraint parts to `gpos` (length m).
/// `profile` and `g`/`dg` (length n and m) are scratch.
double aggregated_gradient(const Game& game, const FeedbackCalendar& calendar,
                           const EngineState& state, int agent, int t, std::span<double> gpos,
                           std::span<double> profile, std::span<double> g, std::span<double> dg);

/// Row `agent` of W times the estimate matrix, with the own entry replaced by `own_decision`.
void estimate_update(const MixingMatrix& w, const EngineState& state, int agent,
                     double own_decision, std::span<double> out);

/// Projection onto the cluster interval of the W_i-weighted average of adjusted iterates.
double primal_update(const Network& network, const Game& game, int agent,
                     std::span<const double> adjusted);

/// z' = z - beta (L mu) and mu' = [mu + gamma (L z - sigma gpos)]_+ for one agent.
void dual_update(const LaplacianMatrix& laplacian, const EngineState& state, int agent,
                 double beta, double gamma, double sigma, std::span<const double> gpos,
                 std::span<double> z_out, std::span<double> mu_out);

// ---------------------------------------------------------------------------
// Whole-network operations for a single round.

/// Applies estimate consensus to every agent; own entries come from `new_x`.
void step_estimates(const MixingMatrix& w, const EngineState& state, std::span<const double> new_x,
                    std::vector<double>& out);
std::vector<double> step_primal(const Network& network, const Game& game,
                                std::span<const double> x, std::span<const double> agg,
                                double alpha);
void step_dual(const LaplacianMatrix& laplacian, const EngineState& state, double beta,
               double gamma, double sigma, std::span<const double> gpos, std::vector<double>& z_out,
               std::vector<double>& mu_out);

namespace kernels {

/// One synchronous round, agents processed in ascending order on the calling thread.
void round_reference(const RoundInputs& in, const EngineState& cur, EngineState& next,
                     RoundScratch& scratch);
/// Same arithmetic as round_reference with agents split across OpenMP threads.
/// Results are bit-identical to the reference for any thread count.
void round_parallel(const RoundInputs& in, const EngineState& cur, EngineState& next,
                    RoundScratch& scratch);

}  // namespace kernels

enum class KernelChoice { automatic, serial, parallel };

KernelChoice parse_kernel_choice(const std::string& name);

/// Per-round record. Rounds are 1-based; round t holds the state played at t.
struct Trajectory {
  int n = 0;
  int m = 0;
  int rounds = 0;
  std::vector<double> x;                 // rounds x n
  std::vector<double> agg;               // rounds x n
  std::vector<double> mu_norm;           // rounds x n
  std::vector<double> z_norm;            // rounds x n
  std::vector<double> estimation_error;  // rounds
  EngineState final_state;               // state at T + 1

  std::span<const double> decisions(int t) const { return {x.data() + (t - 1) * n, std::size_t(n)}; }
  double mu_norm_at(int t, int a) const { return mu_norm[(t - 1) * n + a]; }
  double z_norm_at(int t, int a) const { return z_norm[(t - 1) * n + a]; }
};

/// Called once per round with the state played at t and its aggregated gradients.
using RoundObserver =
    std::function<void(int t, const EngineState& state, std::span<const double> agg)>;

struct RunOptions {
  KernelChoice kernel = KernelChoice::automatic;
  bool record = true;  // keep per-round data in the Trajectory
  RoundObserver observer;
};

/// max over agents a and entries b of |estimates[a][b] - x[b]|.
double estimation_error(const EngineState& state);

/// Runs the algorithm for `horizon` rounds from `init`. Throws DivergenceError on
/// the first round that produces a non-finite value.
Trajectory run(const Game& game, const Network& network, const FeedbackCalendar& calendar,
               const StepSchedule& schedule, EngineState init, int horizon,
               const RunOptions& options = {});

}  // namespace dgne
