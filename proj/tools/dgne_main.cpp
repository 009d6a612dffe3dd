#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dgne/config.hpp"
#include "dgne/errors.hpp"
#include "dgne/experiment.hpp"

using nlohmann::json;

namespace {

json calendar_json(const dgne::CalendarStats& st) {
  return {{"max_batch", st.max_batch},
          {"miss_max", st.miss_max},
          {"delay_sum", st.delay_sum},
          {"delivered", st.delivered},
          {"undelivered", st.undelivered}};
}

json report_json(const dgne::RunReport& r) {
  return {{"schedule", r.label},
          {"horizon", r.horizon},
          {"R_over_T", r.regret_over_t},
          {"CV_over_T", r.cv_over_t},
          {"R_agent_over_T", r.regret_agent_over_t},
          {"consensus_error", r.consensus_error},
          {"estimation_error", r.estimation_error},
          {"max_mu_norm", r.max_mu_norm},
          {"path_variation", r.path_variation},
          {"dual_bound_worst_margin", r.dual_bound_worst_margin},
          {"calendar", calendar_json(r.calendar)},
          {"csv", r.csv_path},
          {"csv_rows", r.csv_rows},
          {"wall_seconds", r.wall_seconds}};
}

json assessment_json(const dgne::DelayAssessment& a) {
  return {{"schedule", a.schedule},
          {"horizons", a.horizons},
          {"max_batch", a.max_batch},
          {"miss_max", a.miss_max},
          {"delay_sum", a.delay_sum},
          {"path_variation", a.path_variation},
          {"c_exponent", a.c_exponent},
          {"u", a.u},
          {"tau", a.tau},
          {"phi", a.phi},
          {"feedback_ok", a.feedback_ok},
          {"bounded_batches", a.bounded_batches},
          {"sublinear", a.sublinear},
          {"delay_condition", a.delay_condition},
          {"ok", a.ok()}};
}

json sweep_json(const dgne::SweepResult& s) {
  json members = json::array();
  for (const auto& r : s.members) members.push_back(report_json(r));
  return {{"members", members},
          {"comparison_csv", s.comparison_csv.string()},
          {"summary_csv", s.summary_csv.string()}};
}

json verification_json(const dgne::VerificationReport& v) {
  return {{"ok", v.ok()},
          {"global_connected", v.global_connected},
          {"clusters_connected", v.clusters_connected},
          {"cluster_graph_connected", v.cluster_graph_connected},
          {"mixing_doubly_stochastic", v.mixing_doubly_stochastic},
          {"laplacian_rows_zero", v.laplacian_rows_zero},
          {"consensus_contraction", v.consensus_contraction},
          {"agents_without_feedback", v.agents_without_feedback},
          {"steps",
           {{"ok", v.steps.ok()},
            {"monotone_ok", v.steps.monotone_ok},
            {"cross_ok", v.steps.cross_ok},
            {"first_bad_round", v.steps.first_bad_round},
            {"message", v.steps.message}}},
          {"delay", assessment_json(v.delay)},
          {"error", v.error}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed online GNE seeking with delayed feedback"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
    sub->add_option("-s,--set", overrides, "Override a key, e.g. --set run.horizon=1000");
  };

  auto* run_cmd = app.add_subcommand("run", "Run one configuration and write its CSV");
  add_common(run_cmd);

  std::vector<int> t0_list{0, 10, 20, 40, 60, 80};
  std::string out_dir = "sweep";
  auto* delays_cmd = app.add_subcommand("sweep-delays", "Constant-delay sweep over t0");
  add_common(delays_cmd);
  delays_cmd->add_option("--t0", t0_list, "Constant delays to compare")->delimiter(',');
  delays_cmd->add_option("-o,--out-dir", out_dir, "Directory for CSV output");

  auto* types_cmd = app.add_subcommand("sweep-types", "Delay types 1, 2 and 3");
  add_common(types_cmd);
  types_cmd->add_option("-o,--out-dir", out_dir, "Directory for CSV output");

  auto* verify_cmd = app.add_subcommand("verify", "Check the standing assumptions");
  add_common(verify_cmd);

  auto* print_cmd = app.add_subcommand("print-config", "Print the effective configuration");
  add_common(print_cmd);

  CLI11_PARSE(app, argc, argv);

  try {
    const dgne::ExperimentConfig config =
        config_path.empty() ? dgne::parse_config("", overrides)
                            : dgne::load_config(config_path, overrides);
    json out;
    int status = 0;
    if (*run_cmd) {
      out = report_json(dgne::run_experiment(config));
    } else if (*delays_cmd) {
      out = sweep_json(dgne::sweep_constant_delays(config, t0_list, out_dir));
    } else if (*types_cmd) {
      const auto result = dgne::sweep_delay_types(config, out_dir);
      out = sweep_json(result.sweep);
      json flags = json::array();
      for (const auto& a : result.assessments) flags.push_back(assessment_json(a));
      out["assessments"] = flags;
    } else if (*verify_cmd) {
      const auto report = dgne::verify_assumptions(config);
      out = verification_json(report);
      status = report.ok() ? 0 : 1;
    } else if (*print_cmd) {
      std::cout << dgne::serialize_config(config);
      return 0;
    }
    std::cout << out.dump(2) << '\n';
    return status;
  } catch (const dgne::Error& e) {
    std::cerr << "dgne: " << dgne::category_name(e.category()) << " error: " << e.what() << '\n';
    return dgne::exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "dgne: unexpected error: " << e.what() << '\n';
    return 1;
  }
}
