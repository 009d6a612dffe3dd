#include "dgne/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "dgne/errors.hpp"

namespace dgne {

namespace pt = boost::property_tree;

namespace {

const std::set<std::string> kKnownKeys{
    "run.horizon",       "topology.preset",       "topology.clusters", "topology.edges",
    "game.preset",       "delay.kind",            "delay.t0",          "delay.t1",
    "delay.t2",          "steps.kind",            "steps.a1",          "steps.a2",
    "steps.a3",          "init.decision",         "init.estimate",     "oracle.tolerance",
    "oracle.max_iterations", "output.path",       "output.thinning",   "engine.kernel",
    "bounds.grid_points",
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int to_int(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected an integer, got '" + text + "'");
}

double to_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a number, got '" + text + "'");
}

class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  template <typename F>
  void read(const std::string& key, F&& assign) const {
    if (auto v = tree_.get_optional<std::string>(pt::ptree::path_type(key, '.')))
      assign(trim(*v));
  }

 private:
  const pt::ptree& tree_;
};

void reject_unknown(const pt::ptree& tree) {
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("key '" + section + "' must live inside a [section]");
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      if (!kKnownKeys.count(full)) throw ConfigError("unknown configuration key '" + full + "'");
    }
  }
}

ExperimentConfig from_tree(const pt::ptree& tree) {
  reject_unknown(tree);
  ExperimentConfig c;
  Reader r(tree);
  r.read("run.horizon", [&](const std::string& v) { c.horizon = to_int("run.horizon", v); });
  r.read("topology.preset", [&](const std::string& v) { c.topology.preset = v; });
  r.read("topology.clusters", [&](const std::string& v) {
    c.topology.cluster_sizes.clear();
    for (const auto& item : split(v, ','))
      c.topology.cluster_sizes.push_back(to_int("topology.clusters", item));
  });
  r.read("topology.edges", [&](const std::string& v) {
    c.topology.edges.clear();
    for (const auto& item : split(v, ',')) {
      const auto ends = split(item, '-');
      if (ends.size() != 2) throw ConfigError("topology.edges: expected 'u-v', got '" + item + "'");
      c.topology.edges.emplace_back(to_int("topology.edges", ends[0]),
                                    to_int("topology.edges", ends[1]));
    }
  });
  r.read("game.preset", [&](const std::string& v) { c.game = v; });
  r.read("delay.kind", [&](const std::string& v) { c.delay.kind = v; });
  r.read("delay.t0", [&](const std::string& v) { c.delay.t0 = to_int("delay.t0", v); });
  r.read("delay.t1", [&](const std::string& v) { c.delay.t1 = to_int("delay.t1", v); });
  r.read("delay.t2", [&](const std::string& v) { c.delay.t2 = to_int("delay.t2", v); });
  r.read("steps.kind", [&](const std::string& v) { c.steps.kind = parse_step_kind(v); });
  r.read("steps.a1", [&](const std::string& v) { c.steps.a1 = to_double("steps.a1", v); });
  r.read("steps.a2", [&](const std::string& v) { c.steps.a2 = to_double("steps.a2", v); });
  r.read("steps.a3", [&](const std::string& v) { c.steps.a3 = to_double("steps.a3", v); });
  r.read("init.decision", [&](const std::string& v) { c.init_decision = to_double("init.decision", v); });
  r.read("init.estimate", [&](const std::string& v) { c.init_estimate = to_double("init.estimate", v); });
  r.read("oracle.tolerance", [&](const std::string& v) { c.oracle_tolerance = to_double("oracle.tolerance", v); });
  r.read("oracle.max_iterations", [&](const std::string& v) {
    c.oracle_max_iterations = to_int("oracle.max_iterations", v);
  });
  r.read("output.path", [&](const std::string& v) { c.output_path = v; });
  r.read("output.thinning", [&](const std::string& v) { c.thinning = to_int("output.thinning", v); });
  r.read("engine.kernel", [&](const std::string& v) { c.kernel = parse_kernel_choice(v); });
  r.read("bounds.grid_points", [&](const std::string& v) {
    c.bound_grid_points = to_int("bounds.grid_points", v);
  });
  return c;
}

std::string kernel_name(KernelChoice k) {
  switch (k) {
    case KernelChoice::automatic: return "auto";
    case KernelChoice::serial: return "serial";
    case KernelChoice::parallel: return "parallel";
  }
  return "auto";
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::vector<std::string>& overrides) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed configuration: ") + e.message() + " (line " +
                      std::to_string(e.line()) + ")");
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
    const std::string key = trim(o.substr(0, eq));
    if (std::count(key.begin(), key.end(), '.') != 1)
      throw ConfigError("override key '" + key + "' must be section.key");
    tree.put(pt::ptree::path_type(key, '.'), trim(o.substr(eq + 1)));
  }
  ExperimentConfig config = from_tree(tree);
  validate_config(config);
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), overrides);
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "[run]\nhorizon = " << c.horizon << "\n\n";
  out << "[topology]\npreset = " << c.topology.preset << "\n";
  if (c.topology.preset == "custom") {
    out << "clusters = ";
    for (std::size_t i = 0; i < c.topology.cluster_sizes.size(); ++i)
      out << (i ? "," : "") << c.topology.cluster_sizes[i];
    out << "\nedges = ";
    for (std::size_t i = 0; i < c.topology.edges.size(); ++i)
      out << (i ? "," : "") << c.topology.edges[i].first << "-" << c.topology.edges[i].second;
    out << "\n";
  }
  out << "\n[game]\npreset = " << c.game << "\n\n";
  out << "[delay]\nkind = " << c.delay.kind << "\nt0 = " << c.delay.t0 << "\nt1 = " << c.delay.t1
      << "\nt2 = " << c.delay.t2 << "\n\n";
  out << "[steps]\nkind = " << step_kind_name(c.steps.kind) << "\na1 = " << format_double(c.steps.a1)
      << "\na2 = " << format_double(c.steps.a2) << "\na3 = " << format_double(c.steps.a3) << "\n\n";
  out << "[init]\ndecision = " << format_double(c.init_decision)
      << "\nestimate = " << format_double(c.init_estimate) << "\n\n";
  out << "[oracle]\ntolerance = " << format_double(c.oracle_tolerance)
      << "\nmax_iterations = " << c.oracle_max_iterations << "\n\n";
  out << "[output]\npath = " << c.output_path << "\nthinning = " << c.thinning << "\n\n";
  out << "[engine]\nkernel = " << kernel_name(c.kernel) << "\n\n";
  out << "[bounds]\ngrid_points = " << c.bound_grid_points << "\n";
  return out.str();
}

void validate_config(const ExperimentConfig& c) {
  if (c.horizon < 1) throw ConfigError("run.horizon must be >= 1");
  if (c.topology.preset == "example") {
    if (!c.topology.cluster_sizes.empty() || !c.topology.edges.empty())
      throw ConfigError("topology.clusters and topology.edges require topology.preset = custom");
  } else if (c.topology.preset == "custom") {
    if (c.topology.cluster_sizes.empty())
      throw ConfigError("topology.preset = custom needs topology.clusters");
    topology_from_config(c.topology);
  } else {
    throw ConfigError("unknown topology.preset '" + c.topology.preset + "' (expected example or custom)");
  }
  if (c.game != "example") throw ConfigError("unknown game.preset '" + c.game + "' (expected example)");
  static const std::set<std::string> kinds{"none", "constant", "type1", "type2", "type3"};
  if (!kinds.count(c.delay.kind))
    throw ConfigError("unknown delay.kind '" + c.delay.kind +
                      "' (expected none, constant, type1, type2 or type3)");
  if (c.delay.t0 < 0) throw ConfigError("delay.t0 must be >= 0");
  if (c.delay.t1 < 1) throw ConfigError("delay.t1 must be >= 1");
  if (c.delay.t2 < 1) throw ConfigError("delay.t2 must be >= 1");
  if (!std::isfinite(c.init_decision) || !std::isfinite(c.init_estimate))
    throw ConfigError("init.decision and init.estimate must be finite");
  if (!(c.oracle_tolerance > 0.0)) throw ConfigError("oracle.tolerance must be > 0");
  if (c.oracle_max_iterations < 1) throw ConfigError("oracle.max_iterations must be >= 1");
  if (c.thinning < 0) throw ConfigError("output.thinning must be >= 0 (0 = automatic)");
  if (c.bound_grid_points < 100) throw ConfigError("bounds.grid_points must be >= 100");
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int effective_thinning(const ExperimentConfig& c) {
  if (c.thinning > 0) return c.thinning;
  return c.horizon <= 10000 ? 1 : (c.horizon + 9999) / 10000;
}

TopologySpec topology_from_config(const TopologyConfig& config) {
  if (config.preset == "example") return default_topology();
  ClusterLayout layout(config.cluster_sizes);
  std::vector<Graph::Edge> edges;
  for (const auto& [u, v] : config.edges) edges.emplace_back(u - 1, v - 1);
  Graph global(layout.agent_count(), std::move(edges));
  std::vector<Graph> clusters;
  for (int c = 0; c < layout.cluster_count(); ++c)
    clusters.push_back(induced_cluster_graph(layout, global, c));
  return {std::move(layout), std::move(global), std::move(clusters)};
}

}  // namespace dgne
