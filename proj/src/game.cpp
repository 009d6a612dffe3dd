#include "dgne/game.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>
#include <utility>

#include <fmt/format.h>

#include "dgne/errors.hpp"

namespace dgne {

std::vector<double> positive_part(std::span<const double> v) {
  std::vector<double> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](double x) { return std::max(0.0, x); });
  return out;
}

std::vector<double> clipped_constraint_grad(std::span<const double> g_val,
                                            std::span<const double> g_grad) {
  if (g_val.size() != g_grad.size())
    throw ContractViolation("constraint value has length " + std::to_string(g_val.size()) +
                            " but its gradient has length " + std::to_string(g_grad.size()));
  std::vector<double> out(g_val.size());
  for (std::size_t k = 0; k < g_val.size(); ++k) out[k] = g_val[k] >= 0.0 ? g_grad[k] : 0.0;
  return out;
}

double project_interval(double x, Interval interval) {
  if (!(interval.lo <= interval.hi))
    throw ConfigError(fmt::format("empty interval [{:g}, {:g}]", interval.lo, interval.hi));
  return std::clamp(x, interval.lo, interval.hi);
}

void require_round(const Game& game, int t) {
  if (t < 1 || t > game.horizon())
    throw ContractViolation("round " + std::to_string(t) + " outside [1, " +
                            std::to_string(game.horizon()) + "]");
}

std::vector<double> consensus_profile(const ClusterLayout& layout, std::span<const double> y) {
  if (static_cast<int>(y.size()) != layout.cluster_count())
    throw ContractViolation("cluster vector has wrong length");
  std::vector<double> profile(layout.agent_count());
  for (int a = 0; a < layout.agent_count(); ++a) profile[a] = y[layout.cluster_of(a)];
  return profile;
}

std::vector<double> pseudo_gradient_reduced(const Game& game, int t, std::span<const double> y) {
  require_round(game, t);
  const auto& layout = game.layout();
  const auto profile = consensus_profile(layout, y);
  std::vector<double> out(layout.cluster_count(), 0.0);
  for (int p = 0; p < layout.cluster_count(); ++p)
    for (int j = 0; j < layout.cluster_size(p); ++j) out[p] += game.grad_own({p, j}, t, profile);
  return out;
}

std::vector<double> constraint_sum(const Game& game, int t, std::span<const double> y) {
  require_round(game, t);
  const auto& layout = game.layout();
  const int m = game.constraint_dim();
  std::vector<double> total(m, 0.0);
  std::vector<double> g(m);
  for (int p = 0; p < layout.cluster_count(); ++p) {
    for (int j = 0; j < layout.cluster_size(p); ++j) {
      game.constraint({p, j}, t, y[p], g);
      for (int k = 0; k < m; ++k) total[k] += g[k];
    }
  }
  return total;
}

Matrix constraint_sum_jacobian(const Game& game, int t, std::span<const double> y) {
  require_round(game, t);
  const auto& layout = game.layout();
  const int m = game.constraint_dim();
  Matrix jac = Matrix::Zero(layout.cluster_count(), m);
  std::vector<double> dg(m);
  for (int p = 0; p < layout.cluster_count(); ++p) {
    for (int j = 0; j < layout.cluster_size(p); ++j) {
      game.constraint_grad({p, j}, t, y[p], dg);
      for (int k = 0; k < m; ++k) jac(p, k) += dg[k];
    }
  }
  return jac;
}

// ---------------------------------------------------------------------------
// Example game

namespace {

class ExampleGame final : public Game {
 public:
  explicit ExampleGame(int horizon) : layout_({3, 3, 1}), horizon_(horizon) {
    if (horizon < 1) throw ConfigError("game horizon must be >= 1");
    for (int a = 0; a < layout_.agent_count(); ++a) {
      const AgentId id = layout_.agent(a);
      // e^{-(i + j - 1)} with one-based (i, j).
      offset_[a] = 100.0 * std::exp(-static_cast<double>(id.cluster + id.index + 1));
    }
  }

  const ClusterLayout& layout() const override { return layout_; }
  int constraint_dim() const override { return kDim; }
  int horizon() const override { return horizon_; }
  Interval feasible_interval(int) const override { return {-10.0, 10.0}; }

  double cost(AgentId a, int t, std::span<const double> x) const override {
    const double h = h1(t);
    const double c = 5.0 / t;
    auto sq = [](double v) { return v * v; };
    // Flat order: x11 x12 x13 x21 x22 x23 x31.
    const double x11 = x[0], x12 = x[1], x13 = x[2], x21 = x[3], x22 = x[4], x23 = x[5],
                 x31 = x[6];
    switch (layout_.flat(a)) {
      case 0: return 20 * h * sq(x11 - c) + x31;
      case 1: return 20 * h * sq(x12 - c) - x21 + x22 * x22;
      case 2: return 15 * h * sq(x13 - c) + x22 * (x22 - x21);
      case 3: return 20 * h * sq(x21 - c) + x11;
      case 4: return 10 * h * sq(x22 - c) + x31 * (x12 + x13);
      case 5: return 20 * h * sq(x23 - c);
      case 6: return 20 * h * sq(x31 - c) + (x11 + x23);
    }
    return 0.0;
  }

  double grad_own(AgentId a, int t, std::span<const double> x) const override {
    const int flat = layout_.flat(a);
    return 2.0 * kWeight[flat] * h1(t) * (x[flat] - 5.0 / t);
  }

  void constraint(AgentId a, int t, double x, std::span<double> out) const override {
    const double off = offset_[layout_.flat(a)];
    const double h = h2(t);
    for (int k = 0; k < kDim; ++k) out[k] = 0.5 * (x * x - (k + 1) * h) - off;
  }

  void constraint_grad(AgentId, int, double x, std::span<double> out) const override {
    for (int k = 0; k < kDim; ++k) out[k] = x;
  }

 private:
  static constexpr int kDim = 6;
  static constexpr std::array<double, 7> kWeight{20, 20, 15, 20, 10, 20, 20};

  static double h1(int t) { return std::abs(std::sin(0.005 * t)); }
  static double h2(int t) {
    const double s = std::sin(1e-3 * t);
    return s * s;
  }

  ClusterLayout layout_;
  int horizon_;
  std::array<double, 7> offset_{};
};

}  // namespace

std::shared_ptr<const Game> example_game(int horizon) {
  return std::make_shared<ExampleGame>(horizon);
}

// ---------------------------------------------------------------------------
// Scalable quadratic game

namespace {

class QuadraticRingGame final : public Game {
 public:
  QuadraticRingGame(ClusterLayout layout, int horizon)
      : layout_(std::move(layout)), horizon_(horizon) {
    if (horizon < 1) throw ConfigError("game horizon must be >= 1");
  }

  const ClusterLayout& layout() const override { return layout_; }
  int constraint_dim() const override { return 2; }
  int horizon() const override { return horizon_; }
  Interval feasible_interval(int) const override { return {-5.0, 5.0}; }

  double cost(AgentId a, int t, std::span<const double> x) const override {
    const int i = layout_.flat(a);
    const double d = x[i] - target(i, t);
    return weight(i) * d * d + 0.5 * x[i] * x[next(i)];
  }

  double grad_own(AgentId a, int t, std::span<const double> x) const override {
    const int i = layout_.flat(a);
    return 2.0 * weight(i) * (x[i] - target(i, t)) + 0.5 * x[next(i)];
  }

  void constraint(AgentId, int, double x, std::span<double> out) const override {
    out[0] = x - 1.0;
    out[1] = -x - 1.0;
  }

  void constraint_grad(AgentId, int, double, std::span<double> out) const override {
    out[0] = 1.0;
    out[1] = -1.0;
  }

 private:
  int next(int i) const { return (i + 1) % layout_.agent_count(); }
  static double weight(int i) { return 1.0 + i % 3; }
  static double target(int i, int t) { return 2.0 * std::sin(0.01 * t + i); }

  ClusterLayout layout_;
  int horizon_;
};

}  // namespace

std::shared_ptr<const Game> quadratic_ring_game(ClusterLayout layout, int horizon) {
  return std::make_shared<QuadraticRingGame>(std::move(layout), horizon);
}

// ---------------------------------------------------------------------------
// Bounds

namespace {

std::vector<int> time_sample(int horizon, int count) {
  count = std::min(count, horizon);
  std::vector<int> ts;
  if (count == 1) return {1};
  for (int k = 0; k < count; ++k)
    ts.push_back(1 + static_cast<int>(std::llround(static_cast<double>(k) * (horizon - 1) /
                                                   (count - 1))));
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  return ts;
}

std::vector<double> uniform_grid(Interval in, int points) {
  std::vector<double> g(points);
  for (int k = 0; k < points; ++k)
    g[k] = in.lo + (in.hi - in.lo) * static_cast<double>(k) / (points - 1);
  return g;
}

void check_finite(double v, const char* what, AgentId a, int t) {
  if (!std::isfinite(v))
    throw GameDefinitionError(std::string("non-finite ") + what + " for agent (" +
                              std::to_string(a.cluster + 1) + ", " + std::to_string(a.index + 1) +
                              ") at round " + std::to_string(t));
}

}  // namespace

GameBounds estimate_bounds(const Game& game, int grid_points) {
  if (grid_points < 100) throw ContractViolation("estimate_bounds needs grid_points >= 100");
  const auto& layout = game.layout();
  const int n = layout.agent_count();
  const int m = game.constraint_dim();
  const auto times = time_sample(game.horizon(), grid_points);

  double R = 0.0;
  for (int p = 0; p < layout.cluster_count(); ++p) {
    const Interval in = game.feasible_interval(p);
    if (!(in.lo <= in.hi) || !std::isfinite(in.lo) || !std::isfinite(in.hi))
      throw GameDefinitionError("feasible interval of cluster " + std::to_string(p + 1) +
                                " is empty or unbounded");
    R = std::max({R, std::abs(in.lo), std::abs(in.hi)});
  }

  // Vertices of the box for the non-own coordinates; all of them when few, else a fixed sample.
  const int others = n - 1;
  const bool enumerate = others <= 12;
  const long vertex_count = enumerate ? (1L << others) : 4096L;
  std::mt19937_64 rng(0x5eed);

  double K = 0.0;
  double G = 0.0;
  std::vector<double> profile(n);
  std::vector<double> g(m), dg(m);

  for (int a = 0; a < n; ++a) {
    const AgentId id = layout.agent(a);
    const auto own_grid = uniform_grid(game.feasible_interval(id.cluster), grid_points);
    for (int t : times) {
      for (double x : own_grid) {
        game.constraint(id, t, x, g);
        game.constraint_grad(id, t, x, dg);
        double gn = 0.0, dgn = 0.0;
        for (int k = 0; k < m; ++k) {
          gn += g[k] * g[k];
          dgn += dg[k] * dg[k];
        }
        check_finite(gn, "constraint", id, t);
        check_finite(dgn, "constraint gradient", id, t);
        K = std::max(K, std::sqrt(gn));
        G = std::max(G, std::sqrt(dgn));
      }
      for (long v = 0; v <= vertex_count; ++v) {
        // v == vertex_count is the box midpoint.
        std::uint64_t bits = enumerate ? static_cast<std::uint64_t>(v) : rng();
        int slot = 0;
        for (int b = 0; b < n; ++b) {
          if (b == a) continue;
          const Interval in = game.feasible_interval(layout.cluster_of(b));
          if (v == vertex_count)
            profile[b] = 0.5 * (in.lo + in.hi);
          else
            profile[b] = ((bits >> (slot % 64)) & 1U) ? in.hi : in.lo;
          ++slot;
        }
        for (double x : own_grid) {
          profile[a] = x;
          const double f = game.cost(id, t, profile);
          const double df = game.grad_own(id, t, profile);
          check_finite(f, "cost", id, t);
          check_finite(df, "cost gradient", id, t);
          K = std::max(K, std::abs(f));
          G = std::max(G, std::abs(df));
        }
      }
    }
  }
  return {1.1 * K, 1.1 * G, R};
}

}  // namespace dgne
