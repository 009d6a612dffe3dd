#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "doctest.h"

#include "dgne/engine.hpp"
#include "dgne/errors.hpp"
#include "reference_round.hpp"

using namespace dgne;
using dgne::testing::straight_line_round;

namespace {

struct Setup {
  explicit Setup(int horizon, int t0 = 0, StepKind kind = StepKind::decaying)
      : game(example_game(horizon)),
        network(build_network(default_topology())),
        calendar(build_calendar(*constant_delay_schedule(t0), network.layout, horizon)),
        steps(make_step_schedule({kind}, horizon)) {}

  std::shared_ptr<const Game> game;
  Network network;
  FeedbackCalendar calendar;
  StepSchedule steps;
};

EngineState random_state(const Game& game, std::mt19937& rng) {
  EngineState s = initial_state(game, 0.0, 0.0);
  std::uniform_real_distribution<double> box(-10.0, 10.0), pos(0.0, 0.5), any(-0.5, 0.5);
  for (double& v : s.x) v = box(rng);
  for (double& v : s.estimates) v = box(rng);
  for (int a = 0; a < s.n; ++a) s.estimate_row(a)[a] = s.x[a];
  for (double& v : s.mu) v = pos(rng);
  for (double& v : s.z) v = any(rng);
  return s;
}

void check_identical(const EngineState& a, const EngineState& b) {
  CHECK(a.x == b.x);
  CHECK(a.estimates == b.estimates);
  CHECK(a.z == b.z);
  CHECK(a.mu == b.mu);
}

// Game that turns non-finite at a chosen round.
class BrokenGame final : public Game {
 public:
  BrokenGame(std::shared_ptr<const Game> inner, int bad_round)
      : inner_(std::move(inner)), bad_(bad_round) {}
  const ClusterLayout& layout() const override { return inner_->layout(); }
  int constraint_dim() const override { return inner_->constraint_dim(); }
  int horizon() const override { return inner_->horizon(); }
  Interval feasible_interval(int c) const override { return inner_->feasible_interval(c); }
  double cost(AgentId a, int t, std::span<const double> x) const override {
    return inner_->cost(a, t, x);
  }
  double grad_own(AgentId a, int t, std::span<const double> x) const override {
    return t == bad_ ? std::numeric_limits<double>::quiet_NaN() : inner_->grad_own(a, t, x);
  }
  void constraint(AgentId a, int t, double x, std::span<double> out) const override {
    inner_->constraint(a, t, x, out);
  }
  void constraint_grad(AgentId a, int t, double x, std::span<double> out) const override {
    inner_->constraint_grad(a, t, x, out);
  }

 private:
  std::shared_ptr<const Game> inner_;
  int bad_;
};

}  // namespace

TEST_CASE("estimate consensus") {
  SUBCASE("identical estimates are a fixed point") {
    const Setup s(10);
    EngineState st = initial_state(*s.game, 3.0, 3.0);
    std::vector<double> out;
    step_estimates(s.network.mixing, st, st.x, out);
    for (double v : out) CHECK(v == doctest::Approx(3.0).epsilon(1e-15));
  }
  SUBCASE("two agents average a third coordinate") {
    const auto w = build_metropolis(Graph(2, {{0, 1}}));
    EngineState st(3, 1);
    st.x = {1.0, 1.0, 0.0};
    st.estimates = {1.0, 0.0, 0.0,  //
                    0.0, 1.0, 4.0,  //
                    0.0, 0.0, 0.0};
    std::vector<double> out(3);
    estimate_update(w, st, 0, 1.0, out);
    CHECK(out[2] == 2.0);
    estimate_update(w, st, 1, 1.0, out);
    CHECK(out[2] == 2.0);
  }
  SUBCASE("estimation error does not grow while decisions are frozen") {
    const Setup s(2000);
    std::mt19937 rng(11);
    EngineState st = random_state(*s.game, rng);
    for (int c = 0; c < 3; ++c)
      for (int j = 0; j < s.network.layout.cluster_size(c); ++j)
        st.x[s.network.layout.flat({c, j})] = 1.5 * c - 2.0;
    for (int a = 0; a < st.n; ++a) st.estimate_row(a)[a] = st.x[a];
    const StepSchedule frozen(
        2000, [](int) { return 0.0; }, [](int) { return 0.1; }, [](int) { return 0.1; });
    double prev = estimation_error(st);
    RunOptions opt;
    opt.observer = [&](int, const EngineState& cur, std::span<const double>) {
      const double e = estimation_error(cur);
      CHECK(e <= prev + 1e-12);
      prev = e;
    };
    const auto traj = run(*s.game, s.network, s.calendar, frozen, st, 2000, opt);
    CHECK(traj.final_state.x == st.x);
    CHECK(estimation_error(traj.final_state) < 1e-9);
  }
}

TEST_CASE("aggregated gradient") {
  const Setup s(100);
  std::mt19937 rng(5);
  const EngineState st = random_state(*s.game, rng);
  std::vector<double> gpos(6, 0.0), profile(7), g(6), dg(6);

  SUBCASE("no feedback gives zero") {
    const auto cal = make_calendar(*constant_delay_schedule(10), s.network.layout, 100);
    CHECK(aggregated_gradient(*s.game, cal, st, 0, 5, gpos, profile, g, dg) == 0.0);
    for (double v : gpos) CHECK(v == 0.0);
  }
  SUBCASE("delay-free with zero duals is the own gradient") {
    EngineState zero_mu = st;
    std::fill(zero_mu.mu.begin(), zero_mu.mu.end(), 0.0);
    std::vector<double> prof(zero_mu.estimate_row(2).begin(), zero_mu.estimate_row(2).end());
    prof[2] = zero_mu.x[2];
    CHECK(aggregated_gradient(*s.game, s.calendar, zero_mu, 2, 17, gpos, profile, g, dg) ==
          s.game->grad_own({0, 2}, 17, prof));
  }
  SUBCASE("batches sum their per-timestamp terms") {
    using Sets = std::vector<std::vector<std::vector<int>>>;
    Sets sets(7, std::vector<std::vector<int>>(20));
    sets[4][19] = {3, 11};
    const FeedbackCalendar cal(20, sets);
    EngineState big = st;
    big.x[4] = 9.5;  // far enough out that some constraints are active
    const double got = aggregated_gradient(*s.game, cal, big, 4, 20, gpos, profile, g, dg);

    std::vector<double> prof(big.estimate_row(4).begin(), big.estimate_row(4).end());
    prof[4] = big.x[4];
    double expect = 0.0;
    std::vector<double> gp(6, 0.0);
    for (int ts : {3, 11}) {
      std::vector<double> gv(6), gd(6);
      s.game->constraint({1, 1}, ts, big.x[4], gv);
      s.game->constraint_grad({1, 1}, ts, big.x[4], gd);
      const auto clipped = clipped_constraint_grad(gv, gd);
      double term = s.game->grad_own({1, 1}, ts, prof);
      for (int k = 0; k < 6; ++k) term += big.mu[4 * 6 + k] * clipped[k];
      expect += term;
      const auto pp = positive_part(gv);
      for (int k = 0; k < 6; ++k) gp[k] += pp[k];
    }
    CHECK(got == doctest::Approx(expect).epsilon(1e-14));
    for (int k = 0; k < 6; ++k) CHECK(gpos[k] == doctest::Approx(gp[k]).epsilon(1e-14));
    CHECK(std::any_of(gp.begin(), gp.end(), [](double v) { return v > 0.0; }));
  }
}

TEST_CASE("primal step") {
  const Setup s(10);
  const std::vector<double> same(7, 2.5), zero(7, 0.0);
  SUBCASE("zero step keeps a consensual cluster in place") {
    CHECK(step_primal(s.network, *s.game, same, zero, 0.0) == same);
  }
  SUBCASE("single-agent cluster is projected gradient") {
    std::vector<double> x(7, 1.0), agg(7, 0.0);
    agg[6] = 4.0;
    const auto out = step_primal(s.network, *s.game, x, agg, 0.5);
    CHECK(out[6] == -1.0);
    agg[6] = -100.0;
    CHECK(step_primal(s.network, *s.game, x, agg, 0.5)[6] == 10.0);
  }
  SUBCASE("averages outside the box are clamped") {
    const std::vector<double> agg(7, -100.0);
    for (double v : step_primal(s.network, *s.game, same, agg, 1.0)) CHECK(v == 10.0);
  }
}

TEST_CASE("dual step") {
  SUBCASE("equal duals are a Laplacian fixed point") {
    const Setup s(10);
    EngineState st = initial_state(*s.game, 0.0, 0.0);
    std::fill(st.mu.begin(), st.mu.end(), 0.7);
    std::fill(st.z.begin(), st.z.end(), -0.3);
    const std::vector<double> gpos(st.mu.size(), 0.0);
    std::vector<double> z, mu;
    step_dual(s.network.laplacian, st, 0.5, 0.5, 1.0, gpos, z, mu);
    for (double v : z) CHECK(v == doctest::Approx(-0.3).epsilon(1e-15));
    for (double v : mu) CHECK(v == doctest::Approx(0.7).epsilon(1e-15));
  }
  SUBCASE("two-agent line by hand") {
    const auto L = laplacian_from_mixing(build_metropolis(Graph(2, {{0, 1}})));
    EngineState st(2, 2);
    st.mu = {1.0, 0.2, 0.0, 0.6};
    st.z = {0.5, -1.0, 1.5, 1.0};
    const std::vector<double> gpos{0.4, 0.0, 0.0, 2.0};
    const double beta = 0.3, gamma = 0.2, sigma = 0.5;
    std::vector<double> z, mu;
    step_dual(L, st, beta, gamma, sigma, gpos, z, mu);
    // L = [[1/2, -1/2], [-1/2, 1/2]].
    const double expect_z[] = {0.5 - 0.3 * 0.5, -1.0 - 0.3 * -0.2, 1.5 - 0.3 * -0.5,
                               1.0 - 0.3 * 0.2};
    const double expect_mu[] = {std::max(0.0, 1.0 + 0.2 * (-0.5 - 0.5 * 0.4)),
                                std::max(0.0, 0.2 + 0.2 * (-1.0 - 0.0)),
                                std::max(0.0, 0.0 + 0.2 * (0.5 - 0.0)),
                                std::max(0.0, 0.6 + 0.2 * (1.0 - 0.5 * 2.0))};
    for (int k = 0; k < 4; ++k) {
      CHECK(std::abs(z[k] - expect_z[k]) <= 1e-14);
      CHECK(std::abs(mu[k] - expect_mu[k]) <= 1e-14);
    }
  }
}

TEST_CASE("delay-free rounds match a straight-line implementation exactly") {
  const int T = 50;
  const Setup s(T, 0, StepKind::tuned);
  std::mt19937 rng(2024);
  EngineState ref = random_state(*s.game, rng);
  RunOptions opt;
  opt.kernel = KernelChoice::serial;
  int checked = 0;
  opt.observer = [&](int t, const EngineState& cur, std::span<const double>) {
    check_identical(cur, ref);
    ref = straight_line_round(*s.game, s.network, ref, t, s.steps.alpha(t), s.steps.beta(t),
                              s.steps.gamma(t), s.steps.sigma(t));
    ++checked;
  };
  const auto traj = run(*s.game, s.network, s.calendar, s.steps, ref, T, opt);
  check_identical(traj.final_state, ref);
  CHECK(checked == T);
}

TEST_CASE("serial and parallel kernels are bit-identical") {
  SUBCASE("example game with delays") {
    const Setup s(300, 0);
    const auto cal = build_calendar(*type3_schedule(), s.network.layout, 300);
    std::mt19937 rng(1);
    const EngineState init = random_state(*s.game, rng);
    RunOptions serial, parallel;
    serial.kernel = KernelChoice::serial;
    parallel.kernel = KernelChoice::parallel;
    const auto a = run(*s.game, s.network, cal, s.steps, init, 300, serial);
    const auto b = run(*s.game, s.network, cal, s.steps, init, 300, parallel);
    CHECK(a.x == b.x);
    CHECK(a.agg == b.agg);
    check_identical(a.final_state, b.final_state);
  }
  SUBCASE("larger ring game") {
    std::vector<Graph::Edge> edges;
    const int clusters = 8, size = 12, n = clusters * size;
    for (int c = 0; c < clusters; ++c) {
      for (int j = 0; j + 1 < size; ++j) edges.push_back({c * size + j, c * size + j + 1});
      if (c + 1 < clusters) edges.push_back({c * size + size - 1, (c + 1) * size});
    }
    const ClusterLayout layout(std::vector<int>(clusters, size));
    const Graph global(n, edges);
    std::vector<Graph> local;
    for (int c = 0; c < clusters; ++c) local.push_back(induced_cluster_graph(layout, global, c));
    const Network net = build_network({layout, global, local});
    const auto game = quadratic_ring_game(layout, 150);
    const auto cal = build_calendar(*type1_schedule(4), layout, 150);
    const auto steps = make_step_schedule({StepKind::tuned}, 150);
    const EngineState init = initial_state(*game, 4.0, -4.0);
    RunOptions serial, parallel;
    serial.kernel = KernelChoice::serial;
    parallel.kernel = KernelChoice::parallel;
    const auto a = run(*game, net, cal, steps, init, 150, serial);
    const auto b = run(*game, net, cal, steps, init, 150, parallel);
    CHECK(a.x == b.x);
    check_identical(a.final_state, b.final_state);
  }
}

TEST_CASE("agent order within a round does not matter") {
  const Setup s(40, 3);
  std::mt19937 rng(31);
  const EngineState cur = random_state(*s.game, rng);
  const RoundInputs in{*s.game, s.network, s.calendar, 20, 0.1, 0.4, 0.3, 0.8};
  EngineState next;
  RoundScratch scratch;
  kernels::round_reference(in, cur, next, scratch);

  std::vector<int> order(7);
  std::iota(order.begin(), order.end(), 0);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(order.begin(), order.end(), rng);
    EngineState out(7, 6);
    std::vector<double> agg(7), gpos(42, 0.0), adjusted(7), profile(7), g(6), dg(6);
    for (int a : order) {
      agg[a] = aggregated_gradient(*s.game, s.calendar, cur, a, 20, {gpos.data() + a * 6, 6},
                                   profile, g, dg);
      adjusted[a] = cur.x[a] - in.alpha * agg[a];
    }
    for (int a : order) out.x[a] = primal_update(s.network, *s.game, a, adjusted);
    for (int a : order) {
      estimate_update(s.network.mixing, cur, a, out.x[a], {out.estimates.data() + a * 7, 7});
      dual_update(s.network.laplacian, cur, a, in.beta, in.gamma, in.sigma,
                  {gpos.data() + a * 6, 6}, {out.z.data() + a * 6, 6},
                  {out.mu.data() + a * 6, 6});
    }
    check_identical(out, next);
  }
}

TEST_CASE("run invariants") {
  const int T = 400;
  const Setup s(T, 10, StepKind::tuned);
  std::mt19937 rng(17);
  const EngineState init = random_state(*s.game, rng);
  double z_total = std::accumulate(init.z.begin(), init.z.end(), 0.0);
  RunOptions opt;
  opt.observer = [&](int, const EngineState& cur, std::span<const double>) {
    for (double v : cur.mu) REQUIRE(v >= 0.0);
    for (double v : cur.x) {
      REQUIRE(v >= -10.0);
      REQUIRE(v <= 10.0);
    }
    for (int a = 0; a < cur.n; ++a) REQUIRE(cur.estimate_row(a)[a] == cur.x[a]);
    const double total = std::accumulate(cur.z.begin(), cur.z.end(), 0.0);
    CHECK(std::abs(total - z_total) <= 1e-10);
    z_total = total;
  };
  const auto traj = run(*s.game, s.network, s.calendar, s.steps, init, T, opt);
  CHECK(traj.rounds == T);
  CHECK(traj.x.size() == static_cast<std::size_t>(T) * 7);
  CHECK(traj.decisions(1)[3] == init.x[3]);
}

TEST_CASE("duals stay at zero from a zero start") {
  const Setup s(100);
  RunOptions opt;
  opt.observer = [&](int t, const EngineState& cur, std::span<const double>) {
    if (s.steps.sigma(t) == 0.0)
      for (double v : cur.mu) CHECK(v == 0.0);
  };
  run(*s.game, s.network, s.calendar, s.steps, initial_state(*s.game, 10.0, 10.0), 100, opt);
}

TEST_CASE("single-round run") {
  const Setup s(1);
  const auto traj =
      run(*s.game, s.network, s.calendar, s.steps, initial_state(*s.game, 10.0, 10.0), 1);
  CHECK(traj.rounds == 1);
  for (double v : traj.decisions(1)) CHECK(v == 10.0);
  CHECK(std::any_of(traj.final_state.x.begin(), traj.final_state.x.end(),
                    [](double v) { return v != 10.0; }));
}

TEST_CASE("delay-free example run tracks the moving equilibrium") {
  const int T = 5000;
  const Setup s(T);
  const auto traj =
      run(*s.game, s.network, s.calendar, s.steps, initial_state(*s.game, 10.0, 10.0), T);
  const auto x = traj.decisions(T);
  const auto& layout = s.network.layout;
  for (int c = 0; c < 3; ++c) {
    double mean = 0.0;
    for (int j = 0; j < layout.cluster_size(c); ++j) mean += x[layout.flat({c, j})];
    mean /= layout.cluster_size(c);
    CHECK(std::abs(mean - 5.0 / T) < 0.5);
  }
}

TEST_CASE("runs are deterministic") {
  const Setup s(500, 20);
  const auto a = run(*s.game, s.network, s.calendar, s.steps, initial_state(*s.game, 10, 10), 500);
  const auto b = run(*s.game, s.network, s.calendar, s.steps, initial_state(*s.game, 10, 10), 500);
  CHECK(a.x == b.x);
  CHECK(a.agg == b.agg);
  CHECK(a.mu_norm == b.mu_norm);
  CHECK(a.z_norm == b.z_norm);
}

TEST_CASE("run rejects bad inputs and reports divergence") {
  const Setup s(50);
  SUBCASE("initial decision outside the box") {
    CHECK_THROWS_AS(run(*s.game, s.network, s.calendar, s.steps,
                        initial_state(*s.game, 11.0, 0.0), 50),
                    ConfigError);
  }
  SUBCASE("negative initial duals") {
    EngineState st = initial_state(*s.game, 0.0, 0.0);
    st.mu[0] = -1.0;
    CHECK_THROWS_AS(run(*s.game, s.network, s.calendar, s.steps, st, 50), ContractViolation);
  }
  SUBCASE("horizon beyond the calendar") {
    CHECK_THROWS_AS(run(*s.game, s.network, s.calendar, s.steps,
                        initial_state(*s.game, 0.0, 0.0), 60),
                    ContractViolation);
  }
  SUBCASE("non-finite gradient") {
    const BrokenGame broken(s.game, 23);
    for (KernelChoice k : {KernelChoice::serial, KernelChoice::parallel}) {
      RunOptions opt;
      opt.kernel = k;
      try {
        run(broken, s.network, s.calendar, s.steps, initial_state(broken, 1.0, 1.0), 50, opt);
        FAIL("expected divergence");
      } catch (const DivergenceError& e) {
        CHECK(e.round() == 23);
      }
    }
  }
  SUBCASE("kernel names") {
    CHECK(parse_kernel_choice("auto") == KernelChoice::automatic);
    CHECK(parse_kernel_choice("serial") == KernelChoice::serial);
    CHECK(parse_kernel_choice("parallel") == KernelChoice::parallel);
    CHECK_THROWS_AS(parse_kernel_choice("gpu"), ConfigError);
  }
}
