#include "dgne/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <sstream>

#include "dgne/errors.hpp"
#include "dgne/vgne.hpp"

namespace dgne {

namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw ConfigError("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

ExperimentContext prepare_context(const ExperimentConfig& config) {
  validate_config(config);
  ExperimentContext ctx{example_game(config.horizon + 1),
                        build_network(topology_from_config(config.topology)),
                        {},
                        {}};
  if (!(ctx.network.layout == ctx.game->layout()))
    throw ConfigError("topology layout does not match the game's cluster sizes");
  ctx.bounds = estimate_bounds(*ctx.game, config.bound_grid_points);
  VgneOptions options;
  options.tolerance = config.oracle_tolerance;
  options.max_iterations = config.oracle_max_iterations;
  ctx.comparator = comparator_from(vgne_series(*ctx.game, config.horizon + 1, options));
  return ctx;
}

std::shared_ptr<const DelaySchedule> delay_schedule_from_config(const DelayConfig& config) {
  if (config.kind == "none") return constant_delay_schedule(0);
  if (config.kind == "constant") return constant_delay_schedule(config.t0);
  if (config.kind == "type1") return type1_schedule(config.t1);
  if (config.kind == "type2") return type2_schedule(config.t2);
  if (config.kind == "type3") return type3_schedule();
  throw ConfigError("unknown delay.kind '" + config.kind + "'");
}

std::vector<std::string> csv_header(const ClusterLayout& layout) {
  std::vector<std::string> cols{"t", "R_over_t", "CV_over_t"};
  for (int a = 0; a < layout.agent_count(); ++a) {
    const AgentId id = layout.agent(a);
    cols.push_back("R_" + std::to_string(id.cluster + 1) + "_" + std::to_string(id.index + 1) +
                   "_over_t");
  }
  for (const char* c : {"consensus_error", "estimation_error", "max_mu_norm", "sigma_t"})
    cols.emplace_back(c);
  return cols;
}

namespace {

std::string join(const std::vector<std::string>& cols) {
  std::string out;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) out += ',';
    out += cols[i];
  }
  return out;
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& config) {
  return run_experiment(config, prepare_context(config));
}

RunReport run_experiment(const ExperimentConfig& config, const ExperimentContext& ctx) {
  validate_config(config);
  const auto started = std::chrono::steady_clock::now();
  const int T = config.horizon;
  const Game& game = *ctx.game;
  if (static_cast<int>(ctx.comparator.size()) < T + 1 || game.horizon() < T)
    throw ContractViolation("experiment context was prepared for a shorter horizon");

  const auto schedule = delay_schedule_from_config(config.delay);
  const FeedbackCalendar calendar = build_calendar(*schedule, ctx.network.layout, T);
  const StepSchedule steps = make_step_schedule(config.steps, T);
  const int thin = effective_thinning(config);

  RunReport report;
  report.label = schedule->describe();
  report.horizon = T;
  report.calendar = calendar_stats(calendar);

  MetricAccumulator acc(game, ctx.comparator, steps, ctx.bounds.K);
  std::ostringstream csv;
  csv << join(csv_header(game.layout())) << '\n';

  RunOptions options;
  options.kernel = config.kernel;
  options.record = false;
  options.observer = [&](int t, const EngineState& state, std::span<const double>) {
    const MetricRow& row = acc.add(t, state);
    if ((T - t) % thin != 0) return;
    const double inv = static_cast<double>(t);
    std::vector<double> agents(row.regret_agent.size());
    for (std::size_t a = 0; a < agents.size(); ++a) agents[a] = row.regret_agent[a] / inv;
    const double r = row.regret / inv;
    const double cv = row.cv / inv;
    csv << t << ',' << format_double(r) << ',' << format_double(cv);
    for (double v : agents) csv << ',' << format_double(v);
    csv << ',' << format_double(row.consensus_error) << ',' << format_double(row.estimation_error)
        << ',' << format_double(row.max_mu_norm) << ',' << format_double(row.sigma) << '\n';
    report.series_t.push_back(t);
    report.series_regret_over_t.push_back(r);
    report.series_cv_over_t.push_back(cv);
    report.series_regret_agent_over_t.push_back(std::move(agents));
  };
  run(game, ctx.network, calendar, steps, initial_state(game, config.init_decision, config.init_estimate),
      T, options);

  const MetricRow& last = acc.last();
  report.regret_over_t = report.series_regret_over_t.back();
  report.cv_over_t = report.series_cv_over_t.back();
  report.regret_agent_over_t = report.series_regret_agent_over_t.back();
  report.consensus_error = last.consensus_error;
  report.estimation_error = last.estimation_error;
  report.max_mu_norm = last.max_mu_norm;
  report.sigma = last.sigma;
  report.path_variation = last.path_variation;
  report.dual_bound_worst_margin = acc.worst_dual_bound_margin();
  report.csv_rows = static_cast<int>(report.series_t.size());

  if (!config.output_path.empty()) {
    write_file_atomic(config.output_path, csv.str());
    report.csv_path = config.output_path;
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

// ---------------------------------------------------------------------------
// Sweeps

namespace {

std::vector<RunReport> run_members(const std::vector<ExperimentConfig>& members,
                                   const ExperimentContext& ctx) {
  const int count = static_cast<int>(members.size());
  std::vector<RunReport> reports(count);
  std::vector<std::exception_ptr> errors(count);
#pragma omp parallel for schedule(dynamic, 1)
  for (int k = 0; k < count; ++k) {
    try {
      reports[k] = run_experiment(members[k], ctx);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return reports;
}

SweepResult write_sweep(std::vector<RunReport> reports, const std::vector<std::string>& tags,
                        const fs::path& dir) {
  SweepResult result;
  result.comparison_csv = dir / "comparison.csv";
  result.summary_csv = dir / "summary.csv";

  std::ostringstream cmp;
  cmp << "t";
  for (const auto& tag : tags) cmp << ",R_over_t_" << tag << ",CV_over_t_" << tag;
  cmp << '\n';
  const std::size_t rows = reports.empty() ? 0 : reports.front().series_t.size();
  for (std::size_t r = 0; r < rows; ++r) {
    cmp << reports.front().series_t[r];
    for (const auto& rep : reports)
      cmp << ',' << format_double(rep.series_regret_over_t[r]) << ','
          << format_double(rep.series_cv_over_t[r]);
    cmp << '\n';
  }
  write_file_atomic(result.comparison_csv, cmp.str());

  std::ostringstream sum;
  sum << "member,schedule,R_over_T,CV_over_T,max_batch,max_miss,max_delay_sum,dual_bound_worst_margin\n";
  for (std::size_t k = 0; k < reports.size(); ++k) {
    const auto& rep = reports[k];
    const auto& st = rep.calendar;
    sum << tags[k] << ',' << rep.label << ',' << format_double(rep.regret_over_t) << ','
        << format_double(rep.cv_over_t) << ',' << st.max_batch << ','
        << *std::max_element(st.miss_max.begin(), st.miss_max.end()) << ','
        << *std::max_element(st.delay_sum.begin(), st.delay_sum.end()) << ','
        << format_double(rep.dual_bound_worst_margin) << '\n';
  }
  write_file_atomic(result.summary_csv, sum.str());
  result.members = std::move(reports);
  return result;
}

}  // namespace

SweepResult sweep_constant_delays(const ExperimentConfig& config, const std::vector<int>& t0_list,
                                  const fs::path& output_dir) {
  if (t0_list.empty()) throw ConfigError("sweep needs at least one t0");
  const ExperimentContext ctx = prepare_context(config);
  std::vector<ExperimentConfig> members;
  std::vector<std::string> tags;
  for (int t0 : t0_list) {
    ExperimentConfig c = config;
    c.delay.kind = "constant";
    c.delay.t0 = t0;
    tags.push_back("t0_" + std::to_string(t0));
    c.output_path = (output_dir / (tags.back() + ".csv")).string();
    members.push_back(std::move(c));
  }
  return write_sweep(run_members(members, ctx), tags, output_dir);
}

double growth_exponent(const std::vector<int>& horizons, const std::vector<double>& values) {
  const std::size_t k = horizons.size();
  if (k < 2) return 0.0;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    mx += std::log(static_cast<double>(horizons[i]));
    my += std::log(std::max(values[i], 1.0));
  }
  mx /= k;
  my /= k;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double dx = std::log(static_cast<double>(horizons[i])) - mx;
    sxy += dx * (std::log(std::max(values[i], 1.0)) - my);
    sxx += dx * dx;
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

DelayAssessment assess_delay(const DelaySchedule& schedule, const ClusterLayout& layout,
                             const Comparator& comparator, int horizon) {
  DelayAssessment out;
  out.schedule = schedule.describe();
  for (int div : {8, 4, 2, 1}) {
    const int h = std::max(1, horizon / div);
    if (out.horizons.empty() || out.horizons.back() != h) out.horizons.push_back(h);
  }
  std::vector<double> phi_prefix;
  if (comparator.size() >= 2) phi_prefix = path_variation(comparator);

  for (int h : out.horizons) {
    const FeedbackCalendar cal = make_calendar(schedule, layout, h);
    for (int a = 0; a < cal.agent_count(); ++a)
      if (!cal.has_feedback(a)) out.feedback_ok = false;
    const CalendarStats st = calendar_stats(cal);
    out.max_batch.push_back(st.max_batch);
    out.miss_max.push_back(*std::max_element(st.miss_max.begin(), st.miss_max.end()));
    out.delay_sum.push_back(
        static_cast<double>(*std::max_element(st.delay_sum.begin(), st.delay_sum.end())));
    out.path_variation.push_back(static_cast<int>(phi_prefix.size()) >= h
                                     ? phi_prefix[h - 1]
                                     : std::numeric_limits<double>::quiet_NaN());
  }
  out.c_exponent = growth_exponent(out.horizons, out.max_batch);
  out.u = growth_exponent(out.horizons, out.miss_max);
  out.tau = growth_exponent(out.horizons, out.delay_sum);
  out.phi = growth_exponent(out.horizons, out.path_variation);
  out.bounded_batches = out.c_exponent <= 0.1;
  out.sublinear = out.u < 1.0 && out.phi < 1.0;
  out.delay_condition = std::max(1.0, out.tau) < 2.0 - out.phi;
  return out;
}

TypeSweepResult sweep_delay_types(const ExperimentConfig& config, const fs::path& output_dir) {
  const ExperimentContext ctx = prepare_context(config);
  std::vector<ExperimentConfig> members;
  const std::vector<std::string> tags{"type1", "type2", "type3"};
  for (const auto& tag : tags) {
    ExperimentConfig c = config;
    c.delay.kind = tag;
    c.output_path = (output_dir / (tag + ".csv")).string();
    members.push_back(std::move(c));
  }
  TypeSweepResult result;
  result.sweep = write_sweep(run_members(members, ctx), tags, output_dir);
  for (const auto& c : members)
    result.assessments.push_back(assess_delay(*delay_schedule_from_config(c.delay),
                                              ctx.network.layout, ctx.comparator, config.horizon));
  return result;
}

// ---------------------------------------------------------------------------
// Verification

bool VerificationReport::ok() const {
  return error.empty() && global_connected && clusters_connected && cluster_graph_connected &&
         mixing_doubly_stochastic && laplacian_rows_zero && agents_without_feedback.empty() &&
         steps.ok() && delay.ok();
}

VerificationReport verify_assumptions(const ExperimentConfig& config,
                                      const StepSchedule* schedule_override) {
  VerificationReport report;
  try {
    validate_config(config);
    const TopologySpec spec = topology_from_config(config.topology);
    report.global_connected = spec.global.is_connected();
    report.clusters_connected = std::all_of(spec.clusters.begin(), spec.clusters.end(),
                                            [](const Graph& g) { return g.is_connected(); });
    report.cluster_graph_connected = cluster_level_graph(spec.layout, spec.global).is_connected();

    report.steps = schedule_override
                       ? check_step_conditions(*schedule_override)
                       : check_step_conditions(build_step_schedule(config.steps, config.horizon));

    const auto schedule = delay_schedule_from_config(config.delay);
    const FeedbackCalendar cal = make_calendar(*schedule, spec.layout, config.horizon);
    for (int a = 0; a < cal.agent_count(); ++a)
      if (!cal.has_feedback(a)) report.agents_without_feedback.push_back(a);

    if (!(report.global_connected && report.clusters_connected && report.cluster_graph_connected)) {
      report.delay = assess_delay(*schedule, spec.layout, {}, config.horizon);
      return report;
    }
    const ExperimentContext ctx = prepare_context(config);
    const Network& net = ctx.network;
    report.mixing_doubly_stochastic =
        validate_doubly_stochastic(net.mixing.entries()) &&
        std::all_of(net.cluster_mixing.begin(), net.cluster_mixing.end(),
                    [](const MixingMatrix& w) { return validate_doubly_stochastic(w.entries()); });
    const Eigen::VectorXd row_sums = net.laplacian.entries().rowwise().sum();
    report.laplacian_rows_zero = row_sums.cwiseAbs().maxCoeff() <= kStochasticTolerance;
    report.consensus_contraction = consensus_contraction(net.mixing);
    report.delay = assess_delay(*schedule, net.layout, ctx.comparator, config.horizon);
  } catch (const Error& e) {
    report.error = e.what();
  }
  return report;
}

}  // namespace dgne
