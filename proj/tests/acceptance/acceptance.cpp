// Acceptance checks. Each criterion prints one PASS/FAIL line with the measured
// values; the process exits nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include <fmt/format.h>

#include "dgne/errors.hpp"
#include "dgne/experiment.hpp"
#include "dgne/vgne.hpp"
#include "reference_round.hpp"

using namespace dgne;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / fmt::format("dgne_acceptance_{}", ::getpid())) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

ExperimentConfig base_config(int horizon) {
  ExperimentConfig c;
  c.horizon = horizon;
  c.output_path.clear();
  return c;
}

// ---------------------------------------------------------------------------

Outcome oracle_matches_closed_form() {
  const auto start = Clock::now();
  const int T = 5000;
  const auto game = example_game(T);
  const auto series = vgne_series(*game, T);
  double worst = 0.0, worst_late = 0.0;
  int worst_t = 0;
  for (int t = 1; t <= T; ++t) {
    for (double y : series[t - 1].y_star) {
      const double d = std::abs(y - 5.0 / t);
      if (d > worst) {
        worst = d;
        worst_t = t;
      }
      if (t >= 2) worst_late = std::max(worst_late, d);
    }
  }
  const double secs = seconds_since(start);
  const auto& y1 = series[0].y_star;
  return {worst <= 1e-6 && secs <= 60.0,
          fmt::format("max |y* - 5/t| = {:.3e} at t = {} (t >= 2: {:.3e}); y*(1) = ({:.6f}, {:.6f}, "
                      "{:.6f}); {:.1f} s",
                      worst, worst_t, worst_late, y1[0], y1[1], y1[2], secs)};
}

Outcome dual_bound_holds() {
  const auto start = Clock::now();
  const int T = 2000;
  ExperimentConfig c = base_config(T);
  c.steps.kind = StepKind::tuned;
  const ExperimentContext ctx = prepare_context(c);
  const StepSchedule steps = make_step_schedule(c.steps, T);
  const auto cal = build_calendar(*constant_delay_schedule(0), ctx.network.layout, T);
  const Trajectory traj =
      run(*ctx.game, ctx.network, cal, steps, initial_state(*ctx.game, 10.0, 10.0), T);
  const DualBoundReport r = dual_bound_check(traj, steps, ctx.bounds.K);
  double max_mu = 0.0;
  for (double v : traj.mu_norm) max_mu = std::max(max_mu, v);
  const double secs = seconds_since(start);
  std::string where = r.ok ? "" : fmt::format(", first violation t = {} agent {} ({})",
                                              r.first_violation_round, r.agent, r.on_z ? "z" : "mu");
  return {r.ok && secs <= 30.0,
          fmt::format("worst margin {:.3e}, max ||mu|| {:.3e}, K = {:.4g}{}; {:.1f} s", r.worst_margin,
                      max_mu, ctx.bounds.K, where, secs)};
}

Outcome regret_is_sublinear() {
  const RunReport r500 = run_experiment(base_config(500));
  const RunReport r5000 = run_experiment(base_config(5000));
  bool agents_ok = true;
  std::string per_agent;
  for (std::size_t a = 0; a < r500.regret_agent_over_t.size(); ++a) {
    const double lo = std::abs(r5000.regret_agent_over_t[a]);
    const double hi = std::abs(r500.regret_agent_over_t[a]);
    if (!(lo < hi)) agents_ok = false;
    per_agent += fmt::format("{}{:.3g}->{:.3g}", a ? ", " : "", hi, lo);
  }
  const bool system_ok = r5000.regret_over_t <= 0.5 * r500.regret_over_t;
  return {system_ok && agents_ok,
          fmt::format("R/T {:.4g} (T=500) -> {:.4g} (T=5000), ratio {:.3f}; |R_ij/T|: {}",
                      r500.regret_over_t, r5000.regret_over_t,
                      r5000.regret_over_t / r500.regret_over_t, per_agent)};
}

Outcome delay_monotonicity(const fs::path& dir) {
  const std::vector<int> t0s{0, 10, 20, 40, 60, 80};
  const SweepResult s = sweep_constant_delays(base_config(5000), t0s, dir / "constant");
  bool ok = true;
  std::string r_list, cv_list;
  for (std::size_t k = 0; k < s.members.size(); ++k) {
    if (k > 0 && (s.members[k].regret_over_t < s.members[k - 1].regret_over_t ||
                  s.members[k].cv_over_t < s.members[k - 1].cv_over_t))
      ok = false;
    r_list += fmt::format("{}{:.4g}", k ? ", " : "", s.members[k].regret_over_t);
    cv_list += fmt::format("{}{:.4g}", k ? ", " : "", s.members[k].cv_over_t);
  }
  return {ok, fmt::format("t0 = 0..80: R/T [{}], CV/T [{}]", r_list, cv_list)};
}

Outcome delay_types_discriminate(const fs::path& dir) {
  const auto start = Clock::now();
  ExperimentConfig c = base_config(5000);
  c.delay.t1 = 30;
  c.delay.t2 = 30;
  c.thinning = 1;
  const TypeSweepResult s = sweep_delay_types(c, dir / "types");
  const double secs = seconds_since(start);
  const RunReport& t1 = s.sweep.members[0];
  const RunReport& t2 = s.sweep.members[1];
  const RunReport& t3 = s.sweep.members[2];

  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t k = 0; k < t2.series_t.size(); ++k) {
    if (t2.series_t[k] < 0.8 * c.horizon) continue;
    lo = std::min(lo, t2.series_cv_over_t[k]);
    hi = std::max(hi, t2.series_cv_over_t[k]);
  }
  const double spread = (hi - lo) / hi;
  const double limit = 0.2 * t2.cv_over_t;
  const bool ok = t1.cv_over_t < limit && t3.cv_over_t < limit && spread < 0.2 && secs <= 120.0;
  return {ok, fmt::format("CV/T type1 {:.4g}, type3 {:.4g}, limit 0.2 x type2 = {:.4g}; type2 "
                          "spread over last 20% {:.2f}%; {:.1f} s",
                          t1.cv_over_t, t3.cv_over_t, limit, 100.0 * spread, secs)};
}

Outcome assumption_validation() {
  ExperimentConfig c = base_config(5000);
  c.delay.t1 = 30;
  c.delay.t2 = 30;
  std::vector<VerificationReport> reports;
  for (const char* kind : {"type1", "type2", "type3"}) {
    c.delay.kind = kind;
    reports.push_back(verify_assumptions(c));
  }
  const auto& t2 = reports[1].delay;
  const bool flags_type2 = !t2.delay_condition;
  const bool ok = reports[0].ok() && reports[2].ok() && flags_type2;
  return {ok, fmt::format("type1 ok={}, type3 ok={}; type2: tau = {:.3f}, phi = {:.3f}, "
                          "delay condition {}, batch exponent {:.3f} (bounded={})",
                          reports[0].ok(), reports[2].ok(), t2.tau, t2.phi,
                          t2.delay_condition ? "holds" : "violated", t2.c_exponent,
                          t2.bounded_batches)};
}

// Structural invariants: each sub-check returns an empty string on success.

std::string check_network(const Network& net) {
  if (!validate_doubly_stochastic(net.mixing.entries())) return "global mixing not doubly stochastic";
  for (const auto& w : net.cluster_mixing)
    if (!validate_doubly_stochastic(w.entries())) return "cluster mixing not doubly stochastic";
  const Eigen::VectorXd rows = net.laplacian.entries().rowwise().sum();
  if (rows.cwiseAbs().maxCoeff() > 1e-12) return "L 1 != 0";
  return "";
}

std::string check_calendars(const ClusterLayout& layout) {
  const int T = 1000;
  std::vector<std::shared_ptr<const DelaySchedule>> schedules{
      constant_delay_schedule(0), constant_delay_schedule(10), constant_delay_schedule(80),
      type1_schedule(30),         type2_schedule(30),          type3_schedule()};
  for (const auto& sched : schedules) {
    const FeedbackCalendar cal = make_calendar(*sched, layout, T);
    for (int a = 0; a < cal.agent_count(); ++a) {
      std::vector<int> seen(T + 1, 0);
      for (int t = 1; t <= T; ++t) {
        for (int s : cal.timestamps(a, t)) {
          if (s < 1 || s > t) return fmt::format("{}: S_{{{},{}}} holds {}", sched->describe(), a, t, s);
          if (seen[s]++) return fmt::format("{}: {} delivered twice to agent {}", sched->describe(), s, a);
          if (cal.arrival(a, s) != t) return fmt::format("{}: arrival mismatch", sched->describe());
        }
      }
      int delivered = 0;
      for (int s = 1; s <= T; ++s) {
        delivered += seen[s];
        if (!seen[s] && cal.arrival(a, s) != 0) return "undelivered round has an arrival";
        if (sched->kind() == DelaySchedule::Kind::delay_given) {
          const int land = s + sched->delay(layout.agent(a), s) - 1;
          if ((land <= T ? land : 0) != cal.arrival(a, s))
            return fmt::format("{}: round {} arrives off its delay", sched->describe(), s);
        }
      }
      const CalendarStats st = calendar_stats(cal);
      if (st.delivered[a] != delivered || st.delivered[a] + st.undelivered[a] != T)
        return fmt::format("{}: conservation fails for agent {}", sched->describe(), a);
    }
  }
  return "";
}

std::string check_run_invariants(const ExperimentContext& ctx) {
  const int T = 1000;
  const Game& game = *ctx.game;
  for (const auto& sched : {constant_delay_schedule(0), type3_schedule()}) {
    const auto cal = build_calendar(*sched, ctx.network.layout, T);
    const StepSchedule steps = make_step_schedule({StepKind::tuned}, T);
    std::string err;
    RunOptions opt;
    opt.record = false;
    opt.observer = [&](int t, const EngineState& s, std::span<const double>) {
      if (!err.empty()) return;
      for (double m : s.mu)
        if (!(m >= 0.0)) err = fmt::format("mu < 0 at t = {}", t);
      for (int a = 0; a < s.n; ++a) {
        const Interval box = game.feasible_interval(game.layout().agent(a).cluster);
        if (!(s.x[a] >= box.lo && s.x[a] <= box.hi)) err = fmt::format("x outside box at t = {}", t);
      }
    };
    run(game, ctx.network, cal, steps, initial_state(game, 10.0, 10.0), T, opt);
    if (!err.empty()) return sched->describe() + ": " + err;
  }
  return "";
}

std::string check_gradients(const Game& game) {
  std::mt19937 rng(100);
  std::uniform_real_distribution<double> box(-10.0, 10.0);
  std::uniform_int_distribution<int> round(1, game.horizon());
  const int n = game.layout().agent_count(), m = game.constraint_dim();
  const double h = 1e-5;
  double worst = 0.0;
  std::vector<double> gp(m), gm(m), dg(m);
  for (int k = 0; k < 100; ++k) {
    const int t = round(rng);
    std::vector<double> x(n);
    for (double& v : x) v = box(rng);
    for (int a = 0; a < n; ++a) {
      const AgentId id = game.layout().agent(a);
      std::vector<double> xp = x, xm = x;
      xp[a] += h;
      xm[a] -= h;
      const double fd = (game.cost(id, t, xp) - game.cost(id, t, xm)) / (2 * h);
      worst = std::max(worst, std::abs(fd - game.grad_own(id, t, x)));
      game.constraint(id, t, x[a] + h, gp);
      game.constraint(id, t, x[a] - h, gm);
      game.constraint_grad(id, t, x[a], dg);
      for (int q = 0; q < m; ++q) worst = std::max(worst, std::abs((gp[q] - gm[q]) / (2 * h) - dg[q]));
    }
  }
  return worst <= 1e-6 ? "" : fmt::format("finite-difference gap {:.3e}", worst);
}

std::string check_straight_line(const ExperimentContext& ctx) {
  const int T = 50;
  const Game& game = *ctx.game;
  const auto cal = build_calendar(*constant_delay_schedule(0), ctx.network.layout, T);
  const StepSchedule steps = make_step_schedule({StepKind::tuned}, T);
  std::mt19937 rng(50);
  std::uniform_real_distribution<double> box(-10.0, 10.0), pos(0.0, 0.5), any(-0.5, 0.5);
  EngineState ref = initial_state(game, 0.0, 0.0);
  for (double& v : ref.x) v = box(rng);
  for (double& v : ref.estimates) v = box(rng);
  for (int a = 0; a < ref.n; ++a) ref.estimate_row(a)[a] = ref.x[a];
  for (double& v : ref.mu) v = pos(rng);
  for (double& v : ref.z) v = any(rng);

  std::string err;
  RunOptions opt;
  opt.kernel = KernelChoice::serial;
  opt.observer = [&](int t, const EngineState& cur, std::span<const double>) {
    if (err.empty() && (cur.x != ref.x || cur.estimates != ref.estimates || cur.z != ref.z ||
                        cur.mu != ref.mu))
      err = fmt::format("straight-line mismatch at t = {}", t);
    ref = testing::straight_line_round(game, ctx.network, ref, t, steps.alpha(t), steps.beta(t),
                                       steps.gamma(t), steps.sigma(t));
  };
  const Trajectory traj = run(game, ctx.network, cal, steps, ref, T, opt);
  if (err.empty() && traj.final_state.x != ref.x) err = "straight-line mismatch after round 50";
  return err;
}

std::string check_reruns(const ExperimentContext& ctx) {
  ExperimentConfig c = base_config(800);
  c.delay.kind = "type3";
  std::vector<RunReport> reports;
  for (KernelChoice k : {KernelChoice::serial, KernelChoice::serial, KernelChoice::parallel}) {
    c.kernel = k;
    reports.push_back(run_experiment(c, ctx));
  }
  for (std::size_t k = 1; k < reports.size(); ++k) {
    if (reports[k].series_regret_over_t != reports[0].series_regret_over_t ||
        reports[k].series_cv_over_t != reports[0].series_cv_over_t ||
        reports[k].series_regret_agent_over_t != reports[0].series_regret_agent_over_t)
      return "reruns differ";
  }
  return "";
}

Outcome structural_invariants() {
  const auto start = Clock::now();
  const ExperimentContext ctx = prepare_context(base_config(1000));
  const std::vector<std::pair<std::string, std::function<std::string()>>> checks{
      {"mixing", [&] { return check_network(ctx.network); }},
      {"calendars", [&] { return check_calendars(ctx.network.layout); }},
      {"run invariants", [&] { return check_run_invariants(ctx); }},
      {"gradients", [&] { return check_gradients(*ctx.game); }},
      {"straight-line", [&] { return check_straight_line(ctx); }},
      {"reruns", [&] { return check_reruns(ctx); }},
  };
  std::vector<std::string> failures;
  for (const auto& [name, check] : checks) {
    const std::string err = check();
    if (!err.empty()) failures.push_back(name + ": " + err);
  }
  const double secs = seconds_since(start);
  std::string detail = fmt::format("{} groups clean", checks.size());
  if (!failures.empty()) {
    detail.clear();
    for (const auto& f : failures) detail += (detail.empty() ? "" : "; ") + f;
  }
  return {failures.empty() && secs < 10.0, fmt::format("{}; {:.1f} s", detail, secs)};
}

Outcome violation_order() {
  std::vector<double> scaled;
  std::string list;
  for (int T : {500, 1000, 2000, 4000}) {
    ExperimentConfig c = base_config(T);
    c.steps.kind = StepKind::tuned;
    const RunReport r = run_experiment(c);
    const double cv = r.cv_over_t * T;  // cumulative CV(T)
    scaled.push_back(cv * T);
    list += fmt::format("{}T={}: CV={:.4g}, CV*T={:.4g}", list.empty() ? "" : "; ", T, cv, cv * T);
  }
  const double lo = *std::min_element(scaled.begin(), scaled.end());
  const double hi = *std::max_element(scaled.begin(), scaled.end());
  const double growth = hi / lo;
  return {growth <= 2.0, fmt::format("{}; growth {:.2f}x", list, growth)};
}

}  // namespace

int main() {
  TempDir dir;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"equilibrium oracle matches 5/t on [1, 5000]", oracle_matches_closed_form},
      {"dual and auxiliary norms stay under the bound", dual_bound_holds},
      {"delay-free regret averages fall from T=500 to T=5000", regret_is_sublinear},
      {"terminal averages increase with constant delay", [&] { return delay_monotonicity(dir.path()); }},
      {"delay types 1 and 3 separate from type 2", [&] { return delay_types_discriminate(dir.path()); }},
      {"verification flags type 2 and passes types 1 and 3", assumption_validation},
      {"structural invariants", structural_invariants},
      {"CV(T)*T stays within 2x over T=500..4000", violation_order},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s [%zu] %s: %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
