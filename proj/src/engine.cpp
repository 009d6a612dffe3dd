#include "dgne/engine.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <string>

#include "dgne/errors.hpp"

namespace dgne {

EngineState::EngineState(int agents, int dim)
    : n(agents),
      m(dim),
      x(agents, 0.0),
      estimates(static_cast<std::size_t>(agents) * agents, 0.0),
      z(static_cast<std::size_t>(agents) * dim, 0.0),
      mu(static_cast<std::size_t>(agents) * dim, 0.0) {}

EngineState initial_state(const Game& game, double decision, double estimate) {
  const int n = game.layout().agent_count();
  EngineState state(n, game.constraint_dim());
  std::fill(state.x.begin(), state.x.end(), decision);
  std::fill(state.estimates.begin(), state.estimates.end(), estimate);
  for (int a = 0; a < n; ++a) state.estimate_row(a)[a] = decision;
  return state;
}

void RoundScratch::resize(int n, int m) {
  agg.assign(n, 0.0);
  gpos.assign(static_cast<std::size_t>(n) * m, 0.0);
  adjusted.assign(n, 0.0);
}

KernelChoice parse_kernel_choice(const std::string& name) {
  if (name == "auto") return KernelChoice::automatic;
  if (name == "serial") return KernelChoice::serial;
  if (name == "parallel") return KernelChoice::parallel;
  throw ConfigError("unknown engine kernel '" + name + "' (expected auto, serial or parallel)");
}

// ---------------------------------------------------------------------------
// Per-agent operations

double aggregated_gradient(const Game& game, const FeedbackCalendar& calendar,
                           const EngineState& state, int agent, int t, std::span<double> gpos,
                           std::span<double> profile, std::span<double> g, std::span<double> dg) {
  const int m = state.m;
  const AgentId id = game.layout().agent(agent);
  const double x = state.x[agent];
  const auto row = state.estimate_row(agent);
  std::copy(row.begin(), row.end(), profile.begin());
  profile[agent] = x;
  const auto mu = state.mu_row(agent);

  double total = 0.0;
  for (int s : calendar.timestamps(agent, t)) {
    if (s < 1 || s > t)
      throw CalendarError("agent " + std::to_string(agent) + " got timestamp " + std::to_string(s) +
                          " at round " + std::to_string(t));
    double y = game.grad_own(id, s, profile);
    game.constraint(id, s, x, g);
    game.constraint_grad(id, s, x, dg);
    for (int k = 0; k < m; ++k) {
      if (g[k] >= 0.0) {
        y += mu[k] * dg[k];
        gpos[k] += g[k];
      }
    }
    total += y;
  }
  return total;
}

void estimate_update(const MixingMatrix& w, const EngineState& state, int agent,
                     double own_decision, std::span<double> out) {
  const int n = state.n;
  std::fill(out.begin(), out.end(), 0.0);
  for (const Weight& wc : w.row(agent)) {
    const double* src = state.estimates.data() + static_cast<std::size_t>(wc.col) * n;
    for (int b = 0; b < n; ++b) out[b] += wc.value * src[b];
  }
  out[agent] = own_decision;
}

double primal_update(const Network& network, const Game& game, int agent,
                     std::span<const double> adjusted) {
  const auto& layout = network.layout;
  const AgentId id = layout.agent(agent);
  const int base = layout.offset(id.cluster);
  double mixed = 0.0;
  for (const Weight& wk : network.cluster_mixing[id.cluster].row(id.index))
    mixed += wk.value * adjusted[base + wk.col];
  return project_interval(mixed, game.feasible_interval(id.cluster));
}

void dual_update(const LaplacianMatrix& laplacian, const EngineState& state, int agent,
                 double beta, double gamma, double sigma, std::span<const double> gpos,
                 std::span<double> z_out, std::span<double> mu_out) {
  const int m = state.m;
  const auto row = laplacian.row(agent);
  const auto z = state.z_row(agent);
  const auto mu = state.mu_row(agent);
  for (int k = 0; k < m; ++k) {
    double l_mu = 0.0;
    double l_z = 0.0;
    for (const Weight& lc : row) {
      l_mu += lc.value * state.mu[static_cast<std::size_t>(lc.col) * m + k];
      l_z += lc.value * state.z[static_cast<std::size_t>(lc.col) * m + k];
    }
    z_out[k] = z[k] - beta * l_mu;
    mu_out[k] = std::max(0.0, mu[k] + gamma * (l_z - sigma * gpos[k]));
  }
}

// ---------------------------------------------------------------------------
// Whole-network operations

void step_estimates(const MixingMatrix& w, const EngineState& state, std::span<const double> new_x,
                    std::vector<double>& out) {
  const int n = state.n;
  out.resize(static_cast<std::size_t>(n) * n);
  for (int a = 0; a < n; ++a)
    estimate_update(w, state, a, new_x[a], {out.data() + static_cast<std::size_t>(a) * n, std::size_t(n)});
}

std::vector<double> step_primal(const Network& network, const Game& game,
                                std::span<const double> x, std::span<const double> agg,
                                double alpha) {
  const int n = static_cast<int>(x.size());
  std::vector<double> adjusted(n);
  for (int a = 0; a < n; ++a) adjusted[a] = x[a] - alpha * agg[a];
  std::vector<double> out(n);
  for (int a = 0; a < n; ++a) out[a] = primal_update(network, game, a, adjusted);
  return out;
}

void step_dual(const LaplacianMatrix& laplacian, const EngineState& state, double beta,
               double gamma, double sigma, std::span<const double> gpos, std::vector<double>& z_out,
               std::vector<double>& mu_out) {
  const int n = state.n;
  const int m = state.m;
  z_out.resize(static_cast<std::size_t>(n) * m);
  mu_out.resize(static_cast<std::size_t>(n) * m);
  for (int a = 0; a < n; ++a) {
    const std::size_t off = static_cast<std::size_t>(a) * m;
    dual_update(laplacian, state, a, beta, gamma, sigma, gpos.subspan(off, m),
                {z_out.data() + off, std::size_t(m)}, {mu_out.data() + off, std::size_t(m)});
  }
}

// ---------------------------------------------------------------------------
// Kernels

namespace kernels {

namespace {

void agent_gradient(const RoundInputs& in, const EngineState& cur, RoundScratch& scratch, int a,
                    std::vector<double>& profile, std::vector<double>& g, std::vector<double>& dg) {
  const int m = cur.m;
  std::span<double> gpos(scratch.gpos.data() + static_cast<std::size_t>(a) * m, std::size_t(m));
  std::fill(gpos.begin(), gpos.end(), 0.0);
  scratch.agg[a] = aggregated_gradient(in.game, in.calendar, cur, a, in.t, gpos, profile, g, dg);
  scratch.adjusted[a] = cur.x[a] - in.alpha * scratch.agg[a];
}

void agent_consensus(const RoundInputs& in, const EngineState& cur, EngineState& next,
                     const RoundScratch& scratch, int a) {
  const int n = cur.n;
  const int m = cur.m;
  const std::size_t off = static_cast<std::size_t>(a) * m;
  estimate_update(in.network.mixing, cur, a, next.x[a],
                  {next.estimates.data() + static_cast<std::size_t>(a) * n, std::size_t(n)});
  dual_update(in.network.laplacian, cur, a, in.beta, in.gamma, in.sigma,
              {scratch.gpos.data() + off, std::size_t(m)}, {next.z.data() + off, std::size_t(m)},
              {next.mu.data() + off, std::size_t(m)});
}

void prepare(const EngineState& cur, EngineState& next, RoundScratch& scratch) {
  if (next.n != cur.n || next.m != cur.m) next = EngineState(cur.n, cur.m);
  if (static_cast<int>(scratch.agg.size()) != cur.n ||
      scratch.gpos.size() != static_cast<std::size_t>(cur.n) * cur.m)
    scratch.resize(cur.n, cur.m);
}

}  // namespace

void round_reference(const RoundInputs& in, const EngineState& cur, EngineState& next,
                     RoundScratch& scratch) {
  prepare(cur, next, scratch);
  const int n = cur.n;
  std::vector<double> profile(n), g(cur.m), dg(cur.m);
  for (int a = 0; a < n; ++a) agent_gradient(in, cur, scratch, a, profile, g, dg);
  for (int a = 0; a < n; ++a) next.x[a] = primal_update(in.network, in.game, a, scratch.adjusted);
  for (int a = 0; a < n; ++a) agent_consensus(in, cur, next, scratch, a);
}

void round_parallel(const RoundInputs& in, const EngineState& cur, EngineState& next,
                    RoundScratch& scratch) {
  prepare(cur, next, scratch);
  const int n = cur.n;
  // Exceptions may not cross the parallel region; keep the lowest-agent one.
  std::exception_ptr error;
  int error_agent = n;
#pragma omp parallel
  {
    std::vector<double> profile(n), g(cur.m), dg(cur.m);
    auto guarded = [&](int a, auto&& body) {
      try {
        body();
      } catch (...) {
#pragma omp critical(dgne_round_error)
        if (a < error_agent) {
          error_agent = a;
          error = std::current_exception();
        }
      }
    };
#pragma omp for schedule(static)
    for (int a = 0; a < n; ++a)
      guarded(a, [&] { agent_gradient(in, cur, scratch, a, profile, g, dg); });
#pragma omp for schedule(static)
    for (int a = 0; a < n; ++a)
      guarded(a, [&] { next.x[a] = primal_update(in.network, in.game, a, scratch.adjusted); });
#pragma omp for schedule(static)
    for (int a = 0; a < n; ++a) guarded(a, [&] { agent_consensus(in, cur, next, scratch, a); });
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace kernels

// ---------------------------------------------------------------------------
// Driver

double estimation_error(const EngineState& state) {
  double worst = 0.0;
  for (int a = 0; a < state.n; ++a) {
    const auto row = state.estimate_row(a);
    for (int b = 0; b < state.n; ++b) worst = std::max(worst, std::abs(row[b] - state.x[b]));
  }
  return worst;
}

namespace {

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double d) { return std::isfinite(d); });
}

double norm(std::span<const double> v) {
  double sq = 0.0;
  for (double d : v) sq += d * d;
  return std::sqrt(sq);
}

void check_inputs(const Game& game, const Network& network, const FeedbackCalendar& calendar,
                  const StepSchedule& schedule, const EngineState& init, int horizon) {
  const int n = game.layout().agent_count();
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  if (!(network.layout == game.layout()))
    throw ContractViolation("network layout does not match the game layout");
  if (calendar.agent_count() != n)
    throw ContractViolation("calendar covers " + std::to_string(calendar.agent_count()) +
                            " agents, game has " + std::to_string(n));
  if (calendar.horizon() < horizon || schedule.horizon() < horizon || game.horizon() < horizon)
    throw ContractViolation("calendar, step schedule and game must cover the run horizon " +
                            std::to_string(horizon));
  if (init.n != n || init.m != game.constraint_dim() ||
      init.estimates.size() != static_cast<std::size_t>(n) * n)
    throw ContractViolation("initial state has the wrong shape");
  for (int a = 0; a < n; ++a) {
    const Interval in = game.feasible_interval(network.layout.cluster_of(a));
    if (!(init.x[a] >= in.lo && init.x[a] <= in.hi))
      throw ConfigError("initial decision of agent " + std::to_string(a + 1) +
                        " lies outside its feasible interval");
  }
  if (!std::all_of(init.mu.begin(), init.mu.end(), [](double v) { return v >= 0.0; }))
    throw ContractViolation("initial dual variables must be nonnegative");
  if (!all_finite(init.estimates) || !all_finite(init.z))
    throw ContractViolation("initial state must be finite");
}

}  // namespace

Trajectory run(const Game& game, const Network& network, const FeedbackCalendar& calendar,
               const StepSchedule& schedule, EngineState init, int horizon,
               const RunOptions& options) {
  check_inputs(game, network, calendar, schedule, init, horizon);
  const int n = init.n;
  const int m = init.m;

  bool parallel = options.kernel == KernelChoice::parallel ||
                  (options.kernel == KernelChoice::automatic && n >= 64);
  auto step = parallel ? kernels::round_parallel : kernels::round_reference;

  Trajectory traj;
  traj.n = n;
  traj.m = m;
  if (options.record) {
    traj.x.reserve(static_cast<std::size_t>(horizon) * n);
    traj.agg.reserve(static_cast<std::size_t>(horizon) * n);
    traj.mu_norm.reserve(static_cast<std::size_t>(horizon) * n);
    traj.z_norm.reserve(static_cast<std::size_t>(horizon) * n);
    traj.estimation_error.reserve(horizon);
  }

  EngineState cur = std::move(init);
  EngineState next(n, m);
  RoundScratch scratch;
  scratch.resize(n, m);

  for (int t = 1; t <= horizon; ++t) {
    const RoundInputs in{game,
                         network,
                         calendar,
                         t,
                         schedule.alpha(t),
                         schedule.beta(t),
                         schedule.gamma(t),
                         schedule.sigma(t)};
    step(in, cur, next, scratch);

    if (!all_finite(scratch.agg) || !all_finite(next.x) || !all_finite(next.estimates) ||
        !all_finite(next.z) || !all_finite(next.mu))
      throw DivergenceError(t, "non-finite state produced at round " + std::to_string(t));

    if (options.record) {
      traj.x.insert(traj.x.end(), cur.x.begin(), cur.x.end());
      traj.agg.insert(traj.agg.end(), scratch.agg.begin(), scratch.agg.end());
      for (int a = 0; a < n; ++a) {
        traj.mu_norm.push_back(norm(cur.mu_row(a)));
        traj.z_norm.push_back(norm(cur.z_row(a)));
      }
      traj.estimation_error.push_back(estimation_error(cur));
    }
    if (options.observer) options.observer(t, cur, scratch.agg);
    traj.rounds = t;
    std::swap(cur, next);
  }
  traj.final_state = std::move(cur);
  return traj;
}

}  // namespace dgne
