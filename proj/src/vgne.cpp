#include "dgne/vgne.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <string>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "dgne/errors.hpp"

namespace dgne {

namespace {

/// Evaluates the pieces of the augmented operator at one round with reusable buffers.
class Evaluator {
 public:
  Evaluator(const Game& game, int t)
      : game_(game),
        layout_(game.layout()),
        t_(t),
        N_(layout_.cluster_count()),
        m_(game.constraint_dim()),
        profile_(layout_.agent_count()),
        g_(m_),
        dg_(m_),
        F_(N_),
        sum_g_(m_),
        jac_(static_cast<std::size_t>(N_) * m_) {
    for (int p = 0; p < N_; ++p) box_.push_back(game.feasible_interval(p));
  }

  int clusters() const { return N_; }
  int dim() const { return m_; }
  const std::vector<Interval>& box() const { return box_; }

  /// Fills F(y), sum g(y) and the Jacobian of sum g (row p = d/dy_p).
  void evaluate(std::span<const double> y) {
    for (int a = 0; a < layout_.agent_count(); ++a) profile_[a] = y[layout_.cluster_of(a)];
    std::fill(F_.begin(), F_.end(), 0.0);
    std::fill(sum_g_.begin(), sum_g_.end(), 0.0);
    std::fill(jac_.begin(), jac_.end(), 0.0);
    for (int p = 0; p < N_; ++p) {
      for (int j = 0; j < layout_.cluster_size(p); ++j) {
        const AgentId id{p, j};
        F_[p] += game_.grad_own(id, t_, profile_);
        game_.constraint(id, t_, y[p], g_);
        game_.constraint_grad(id, t_, y[p], dg_);
        for (int k = 0; k < m_; ++k) {
          sum_g_[k] += g_[k];
          jac_[static_cast<std::size_t>(p) * m_ + k] += dg_[k];
        }
      }
    }
  }

  /// Psi(w) for w = (y, mu), written to out (length N + m). Leaves F, sum g, J of y cached.
  void psi(std::span<const double> w, std::span<double> out) {
    const auto y = w.first(N_);
    const auto mu = w.subspan(N_, m_);
    evaluate(y);
    for (int p = 0; p < N_; ++p) {
      double v = F_[p];
      for (int k = 0; k < m_; ++k) v += jac_[static_cast<std::size_t>(p) * m_ + k] * mu[k];
      out[p] = v;
    }
    for (int k = 0; k < m_; ++k) out[N_ + k] = -sum_g_[k];
  }

  /// Residual at w given psi(w) was the last evaluation.
  double residual(std::span<const double> w, std::span<const double> psi_w) const {
    double stat = 0.0;
    for (int p = 0; p < N_; ++p) {
      const double step = w[p] - std::clamp(w[p] - psi_w[p], box_[p].lo, box_[p].hi);
      stat += step * step;
    }
    double feas = 0.0, comp = 0.0;
    for (int k = 0; k < m_; ++k) {
      const double pos = std::max(0.0, sum_g_[k]);
      feas += pos * pos;
      comp += w[N_ + k] * sum_g_[k];
    }
    return std::max({std::sqrt(stat), std::sqrt(feas), std::abs(comp)});
  }

  void project(std::span<double> w) const {
    for (int p = 0; p < N_; ++p) w[p] = std::clamp(w[p], box_[p].lo, box_[p].hi);
    for (int k = 0; k < m_; ++k) w[N_ + k] = std::max(0.0, w[N_ + k]);
  }

  const std::vector<double>& sum_g() const { return sum_g_; }
  double jac(int p, int k) const { return jac_[static_cast<std::size_t>(p) * m_ + k]; }

 private:
  const Game& game_;
  const ClusterLayout& layout_;
  int t_;
  int N_;
  int m_;
  std::vector<Interval> box_;
  std::vector<double> profile_, g_, dg_, F_, sum_g_, jac_;
};

/// Frobenius norm of a forward-difference Jacobian of Psi, maximized over the
/// current point and the box corners (with the current multiplier).
double lipschitz_estimate(Evaluator& ev, std::span<const double> w0) {
  const int N = ev.clusters();
  const int dim = N + ev.dim();
  std::vector<std::vector<double>> points{{w0.begin(), w0.end()}};
  const int corners = N <= 10 ? (1 << N) : 1024;
  for (int c = 0; c < corners; ++c) {
    std::vector<double> p(w0.begin(), w0.end());
    for (int i = 0; i < N; ++i) {
      const bool high = N <= 10 ? ((c >> i) & 1) : (((c * 2654435761u) >> (i % 32)) & 1);
      p[i] = high ? ev.box()[i].hi : ev.box()[i].lo;
    }
    points.push_back(std::move(p));
  }

  std::vector<double> base(dim), bumped(dim), w(dim);
  double best = 0.0;
  for (const auto& p : points) {
    ev.psi(p, base);
    double frob = 0.0;
    for (int k = 0; k < dim; ++k) {
      w = p;
      const double h = 1e-6 * std::max(1.0, std::abs(p[k]));
      w[k] += h;
      ev.psi(w, bumped);
      for (int r = 0; r < dim; ++r) {
        const double d = (bumped[r] - base[r]) / h;
        frob += d * d;
      }
    }
    best = std::max(best, std::sqrt(frob));
  }
  return best > 0.0 && std::isfinite(best) ? best : 1.0;
}

/// Newton solve of the KKT equations on a guessed active set, accepted only when
/// the full KKT residual of the result is within tolerance. Nearly parallel
/// constraints make first-order dual updates crawl; this finishes them exactly.
bool polish(Evaluator& ev, std::vector<double>& w, double tolerance, double hint,
            double& residual_out) {
  const int N = ev.clusters();
  const int m = ev.dim();
  const int dim = N + m;
  std::vector<double> psi_w(dim);
  ev.psi(w, psi_w);
  const std::vector<double> sum_g = ev.sum_g();

  // Bound-active coordinates are those the natural map sends onto a bound.
  std::vector<int> free;
  std::vector<double> base = w;
  for (int p = 0; p < N; ++p) {
    const double v = w[p] - psi_w[p];
    const Interval box = ev.box()[p];
    if (v <= box.lo)
      base[p] = box.lo;
    else if (v >= box.hi)
      base[p] = box.hi;
    else
      free.push_back(p);
  }

  // Candidate constraints, most violated first; keep those with independent gradients.
  const double near = std::max(10.0 * hint, tolerance);
  std::vector<int> order;
  for (int k = 0; k < m; ++k)
    if (sum_g[k] >= -near || w[N + k] > 0.0) order.push_back(k);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return sum_g[a] > sum_g[b]; });
  std::vector<int> active;
  const int f = static_cast<int>(free.size());
  for (int k : order) {
    if (static_cast<int>(active.size()) >= f) break;
    Eigen::MatrixXd cols(f, active.size() + 1);
    for (std::size_t c = 0; c <= active.size(); ++c) {
      const int kk = c < active.size() ? active[c] : k;
      for (int r = 0; r < f; ++r) cols(r, c) = ev.jac(free[r], kk);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(cols);
    lu.setThreshold(1e-8);
    if (lu.rank() == static_cast<Eigen::Index>(active.size()) + 1) active.push_back(k);
  }
  const int a = static_cast<int>(active.size());
  for (int k = 0; k < m; ++k) base[N + k] = 0.0;

  auto assemble = [&](const Eigen::VectorXd& u) {
    std::vector<double> x = base;
    for (int r = 0; r < f; ++r) x[free[r]] = u(r);
    for (int c = 0; c < a; ++c) x[N + active[c]] = u(f + c);
    return x;
  };
  std::vector<double> psi_x(dim);
  auto equations = [&](const Eigen::VectorXd& u) {
    const auto x = assemble(u);
    ev.psi(x, psi_x);
    Eigen::VectorXd r(f + a);
    for (int i = 0; i < f; ++i) r(i) = psi_x[free[i]];
    for (int c = 0; c < a; ++c) r(f + c) = ev.sum_g()[active[c]];
    return r;
  };

  Eigen::VectorXd u(f + a);
  for (int r = 0; r < f; ++r) u(r) = w[free[r]];
  for (int c = 0; c < a; ++c) u(f + c) = w[N + active[c]];

  if (f + a > 0) {
    Eigen::MatrixXd jac(f + a, f + a);
    for (int it = 0; it < 30; ++it) {
      const Eigen::VectorXd r0 = equations(u);
      if (!r0.allFinite()) return false;
      for (int c = 0; c < f + a; ++c) {
        const double h = 1e-6 * std::max(1.0, std::abs(u(c)));
        Eigen::VectorXd up = u, dn = u;
        up(c) += h;
        dn(c) -= h;
        jac.col(c) = (equations(up) - equations(dn)) / (2.0 * h);
      }
      const Eigen::VectorXd step = jac.colPivHouseholderQr().solve(-r0);
      if (!step.allFinite()) return false;
      u += step;
      if (step.norm() <= 1e-15 * std::max(1.0, u.norm())) break;
    }
  }

  std::vector<double> candidate = assemble(u);
  ev.project(candidate);
  ev.psi(candidate, psi_w);
  const double residual = ev.residual(candidate, psi_w);
  if (!(residual <= tolerance)) return false;
  w = std::move(candidate);
  residual_out = residual;
  return true;
}

double max_component(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }

}  // namespace

double kkt_residual(const Game& game, int t, std::span<const double> y, std::span<const double> mu) {
  require_round(game, t);
  Evaluator ev(game, t);
  if (static_cast<int>(y.size()) != ev.clusters() || static_cast<int>(mu.size()) != ev.dim())
    throw ContractViolation("kkt_residual: y or mu has the wrong length");
  std::vector<double> w(y.begin(), y.end());
  w.insert(w.end(), mu.begin(), mu.end());
  std::vector<double> psi_w(w.size());
  ev.psi(w, psi_w);
  return ev.residual(w, psi_w);
}

void check_slater(const Game& game, int t) {
  require_round(game, t);
  Evaluator ev(game, t);
  const int N = ev.clusters();
  const auto& box = ev.box();

  std::vector<std::vector<double>> candidates;
  std::vector<double> center(N), zero(N);
  for (int p = 0; p < N; ++p) {
    center[p] = 0.5 * (box[p].lo + box[p].hi);
    zero[p] = std::clamp(0.0, box[p].lo, box[p].hi);
  }
  candidates.push_back(center);
  candidates.push_back(zero);

  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_y = center;
  for (const auto& y : candidates) {
    ev.evaluate(y);
    const double v = max_component(ev.sum_g());
    if (v < 0.0) return;
    if (v < best) {
      best = v;
      best_y = y;
    }
  }

  // Projected subgradient descent on max_k sum g_k(y).
  std::vector<double> y = best_y;
  for (int it = 0; it < 2000; ++it) {
    ev.evaluate(y);
    const auto& sg = ev.sum_g();
    const int k = static_cast<int>(std::max_element(sg.begin(), sg.end()) - sg.begin());
    if (sg[k] < 0.0) return;
    best = std::min(best, sg[k]);
    double gn = 0.0;
    for (int p = 0; p < N; ++p) gn += ev.jac(p, k) * ev.jac(p, k);
    gn = std::sqrt(gn);
    if (gn == 0.0) break;
    double width = 0.0;
    for (int p = 0; p < N; ++p) width = std::max(width, box[p].hi - box[p].lo);
    const double step = width / (gn * std::sqrt(it + 1.0));
    for (int p = 0; p < N; ++p) y[p] = std::clamp(y[p] - step * ev.jac(p, k), box[p].lo, box[p].hi);
  }
  throw OracleError(OracleError::Reason::slater_violation, t, best,
                    fmt::format("no strictly feasible point for the coupled constraints at round "
                                "{} (best max_k sum g_k = {:g})",
                                t, best));
}

VgneSolution solve_vgne(const Game& game, int t, const VgneOptions& options,
                        const VgneStart* start) {
  require_round(game, t);
  if (!(options.tolerance > 0.0)) throw ConfigError("oracle tolerance must be > 0");
  if (options.max_iterations < 1) throw ConfigError("oracle max_iterations must be >= 1");
  check_slater(game, t);

  Evaluator ev(game, t);
  const int N = ev.clusters();
  const int m = ev.dim();
  const int dim = N + m;

  std::vector<double> w(dim, 0.0);
  if (start) {
    if (static_cast<int>(start->y.size()) != N || static_cast<int>(start->mu.size()) != m)
      throw ContractViolation("warm start has the wrong shape");
    std::copy(start->y.begin(), start->y.end(), w.begin());
    std::copy(start->mu.begin(), start->mu.end(), w.begin() + N);
  } else {
    for (int p = 0; p < N; ++p) w[p] = 0.5 * (ev.box()[p].lo + ev.box()[p].hi);
  }
  ev.project(w);

  double eta = 0.5 / lipschitz_estimate(ev, w);

  VgneSolution sol;
  std::vector<double> psi_w(dim), w_hat(dim), psi_hat(dim);
  double residual = std::numeric_limits<double>::infinity();
  int it = 0;
  for (;; ++it) {
    ev.psi(w, psi_w);
    residual = ev.residual(w, psi_w);
    if (!std::isfinite(residual))
      throw OracleError(OracleError::Reason::non_convergence, t, residual,
                        "vGNE solver produced a non-finite residual at round " + std::to_string(t));
    if (options.record_history) sol.history.push_back(residual);
    if (residual <= options.tolerance || it >= options.max_iterations) break;
    if (options.polish_interval > 0 && it % options.polish_interval == 0 &&
        polish(ev, w, options.tolerance, residual, residual)) {
      sol.polished = true;
      if (options.record_history) sol.history.push_back(residual);
      break;
    }

    for (;;) {
      for (int k = 0; k < dim; ++k) w_hat[k] = w[k] - eta * psi_w[k];
      ev.project(w_hat);
      ev.psi(w_hat, psi_hat);
      double dpsi = 0.0, dw = 0.0;
      for (int k = 0; k < dim; ++k) {
        dpsi += (psi_w[k] - psi_hat[k]) * (psi_w[k] - psi_hat[k]);
        dw += (w[k] - w_hat[k]) * (w[k] - w_hat[k]);
      }
      if (eta * std::sqrt(dpsi) <= 0.9 * std::sqrt(dw) || eta < 1e-300) break;
      eta *= 0.5;
    }
    for (int k = 0; k < dim; ++k) w[k] -= eta * psi_hat[k];
    ev.project(w);
  }

  if (residual > options.tolerance)
    throw OracleError(OracleError::Reason::non_convergence, t, residual,
                      fmt::format("vGNE solver did not reach tolerance {:g} at round {} within {} "
                                "iterations (residual {:g})",
                                options.tolerance, t, options.max_iterations, residual));

  sol.y_star.assign(w.begin(), w.begin() + N);
  sol.mu_star.assign(w.begin() + N, w.end());
  sol.kkt_residual = residual;
  sol.iterations = it;
  return sol;
}

std::vector<VgneSolution> vgne_series(const Game& game, int horizon, const VgneOptions& options,
                                      bool warm_start) {
  if (horizon < 1 || horizon > game.horizon())
    throw ContractViolation("vgne_series horizon outside the game horizon");
  std::vector<VgneSolution> out(horizon);

  if (warm_start) {
    for (int t = 1; t <= horizon; ++t) {
      if (t == 1) {
        out[0] = solve_vgne(game, 1, options);
      } else {
        const VgneStart start{out[t - 2].y_star, out[t - 2].mu_star};
        out[t - 1] = solve_vgne(game, t, options, &start);
      }
    }
    return out;
  }

  std::vector<std::exception_ptr> errors(horizon);
#pragma omp parallel for schedule(dynamic, 16)
  for (int t = 1; t <= horizon; ++t) {
    try {
      out[t - 1] = solve_vgne(game, t, options);
    } catch (...) {
      errors[t - 1] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace dgne
