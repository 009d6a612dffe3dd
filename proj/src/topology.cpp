#include "dgne/topology.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <string>

#include "dgne/errors.hpp"

namespace dgne {

// ---------------------------------------------------------------------------
// ClusterLayout

ClusterLayout::ClusterLayout(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.empty()) throw ConfigError("cluster layout needs at least one cluster");
  offsets_.reserve(sizes_.size());
  for (std::size_t c = 0; c < sizes_.size(); ++c) {
    if (sizes_[c] < 1)
      throw ConfigError("cluster " + std::to_string(c + 1) + " has size " +
                        std::to_string(sizes_[c]) + "; sizes must be >= 1");
    offsets_.push_back(total_);
    total_ += sizes_[c];
    owner_.insert(owner_.end(), sizes_[c], static_cast<int>(c));
  }
}

int ClusterLayout::cluster_size(int cluster) const { return sizes_.at(cluster); }

int ClusterLayout::offset(int cluster) const { return offsets_.at(cluster); }

bool ClusterLayout::contains(AgentId a) const {
  return a.cluster >= 0 && a.cluster < cluster_count() && a.index >= 0 &&
         a.index < sizes_[a.cluster];
}

int ClusterLayout::flat(AgentId a) const {
  if (!contains(a))
    throw ContractViolation("agent (" + std::to_string(a.cluster) + ", " +
                            std::to_string(a.index) + ") outside layout");
  return offsets_[a.cluster] + a.index;
}

AgentId ClusterLayout::agent(int flat_index) const {
  if (flat_index < 0 || flat_index >= total_)
    throw ContractViolation("flat index " + std::to_string(flat_index) + " outside layout");
  const int c = owner_[flat_index];
  return {c, flat_index - offsets_[c]};
}

// ---------------------------------------------------------------------------
// Graph

Graph::Graph(int node_count, std::vector<Edge> edges) : node_count_(node_count) {
  if (node_count < 1) throw ConfigError("graph needs at least one node");
  for (auto& [u, v] : edges) {
    if (u < 0 || v < 0 || u >= node_count || v >= node_count)
      throw ConfigError("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                        ") references a node outside [0, " + std::to_string(node_count) + ")");
    if (u == v) throw ConfigError("self-pair edge on node " + std::to_string(u));
    if (u > v) std::swap(u, v);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  edges_ = std::move(edges);

  adjacency_.assign(node_count_, {});
  for (const auto& [u, v] : edges_) {
    adjacency_[u].push_back(v);
    adjacency_[v].push_back(u);
  }
  for (auto& nbrs : adjacency_) std::sort(nbrs.begin(), nbrs.end());
}

std::vector<int> Graph::degrees() const {
  std::vector<int> deg(node_count_);
  for (int u = 0; u < node_count_; ++u) deg[u] = static_cast<int>(adjacency_[u].size());
  return deg;
}

bool Graph::has_edge(int u, int v) const {
  if (u > v) std::swap(u, v);
  return std::binary_search(edges_.begin(), edges_.end(), Edge{u, v});
}

bool Graph::is_connected() const {
  std::vector<char> seen(node_count_, 0);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = 1;
  int reached = 1;
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop();
    for (int v : adjacency_[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        ++reached;
        frontier.push(v);
      }
    }
  }
  return reached == node_count_;
}

Graph Graph::without_edge(int u, int v) const {
  if (u > v) std::swap(u, v);
  std::vector<Edge> kept;
  kept.reserve(edges_.size());
  for (const auto& e : edges_)
    if (e != Edge{u, v}) kept.push_back(e);
  return Graph(node_count_, std::move(kept));
}

// ---------------------------------------------------------------------------
// Matrices

SparseRows::SparseRows(const Matrix& dense) {
  starts_.clear();
  starts_.reserve(dense.rows() + 1);
  starts_.push_back(0);
  for (Eigen::Index r = 0; r < dense.rows(); ++r) {
    for (Eigen::Index c = 0; c < dense.cols(); ++c)
      if (dense(r, c) != 0.0) entries_.push_back({static_cast<int>(c), dense(r, c)});
    starts_.push_back(static_cast<int>(entries_.size()));
  }
}

bool validate_doubly_stochastic(const Matrix& m, double tolerance) {
  if (m.rows() != m.cols() || m.rows() == 0) return false;
  if ((m.array() < 0.0).any()) return false;
  for (Eigen::Index k = 0; k < m.rows(); ++k) {
    if (std::abs(m.row(k).sum() - 1.0) > tolerance) return false;
    if (std::abs(m.col(k).sum() - 1.0) > tolerance) return false;
  }
  return true;
}

MixingMatrix::MixingMatrix(Matrix entries, double min_positive)
    : entries_(std::move(entries)), min_positive_(min_positive), rows_(entries_) {}

MixingMatrix MixingMatrix::from_matrix(Matrix entries, const Graph& graph) {
  const int n = graph.node_count();
  if (entries.rows() != n || entries.cols() != n)
    throw ConfigError("mixing matrix is " + std::to_string(entries.rows()) + "x" +
                      std::to_string(entries.cols()) + " but the graph has " +
                      std::to_string(n) + " nodes");
  if (!validate_doubly_stochastic(entries))
    throw ConfigError("mixing matrix is not nonnegative doubly stochastic within 1e-12");

  double min_positive = std::numeric_limits<double>::infinity();
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const double w = entries(r, c);
      const bool allowed = (r == c) || graph.has_edge(r, c);
      if (!allowed && w != 0.0)
        throw ConfigError("mixing matrix has weight on non-edge (" + std::to_string(r) + ", " +
                          std::to_string(c) + ")");
      if (allowed && w <= 0.0)
        throw ConfigError("mixing matrix has no positive weight on (" + std::to_string(r) +
                          ", " + std::to_string(c) + ")");
      if (allowed) min_positive = std::min(min_positive, w);
    }
  }
  return MixingMatrix(std::move(entries), min_positive);
}

MixingMatrix build_metropolis(const Graph& graph) {
  if (!graph.is_connected()) throw ConfigError("Metropolis weights need a connected graph");
  const int n = graph.node_count();
  const auto deg = graph.degrees();
  Matrix w = Matrix::Zero(n, n);
  for (const auto& [u, v] : graph.edges()) {
    const double weight = 1.0 / (1.0 + std::max(deg[u], deg[v]));
    w(u, v) = weight;
    w(v, u) = weight;
  }
  for (int u = 0; u < n; ++u) {
    double off = 0.0;
    for (int v : graph.neighbors(u)) off += w(u, v);
    w(u, u) = 1.0 - off;
  }
  return MixingMatrix::from_matrix(std::move(w), graph);
}

LaplacianMatrix::LaplacianMatrix(Matrix entries) : entries_(std::move(entries)), rows_(entries_) {}

LaplacianMatrix laplacian_from_mixing(const MixingMatrix& w) {
  if (!validate_doubly_stochastic(w.entries()))
    throw ConfigError("Laplacian requires a doubly stochastic mixing matrix");
  const Eigen::Index n = w.entries().rows();
  return LaplacianMatrix(Matrix::Identity(n, n) - w.entries());
}

double consensus_contraction(const MixingMatrix& w, int max_iterations) {
  const Eigen::Index n = w.entries().rows();
  if (n == 1) return 0.0;
  const Matrix b = w.entries() - Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
  const Matrix gram = b.transpose() * b;

  Eigen::VectorXd v(n);
  for (Eigen::Index k = 0; k < n; ++k) v(k) = 1.0 + 0.618033988749895 * static_cast<double>(k % 7) + 0.1 * k;
  v.array() -= v.mean();
  if (v.norm() == 0.0) return 0.0;
  v.normalize();

  double estimate = 0.0;
  for (int it = 0; it < max_iterations; ++it) {
    Eigen::VectorXd next = gram * v;
    const double norm = next.norm();
    if (norm == 0.0) return 0.0;
    next /= norm;
    const bool settled = std::abs(norm - estimate) <= 1e-15 * std::max(1.0, norm);
    estimate = norm;
    v = std::move(next);
    if (settled) break;
  }
  return std::sqrt(estimate);
}

// ---------------------------------------------------------------------------
// Graph builders

Graph cluster_level_graph(const ClusterLayout& layout, const Graph& global) {
  std::vector<Graph::Edge> edges;
  for (const auto& [u, v] : global.edges()) {
    const int cu = layout.cluster_of(u);
    const int cv = layout.cluster_of(v);
    if (cu != cv) edges.emplace_back(cu, cv);
  }
  return Graph(layout.cluster_count(), std::move(edges));
}

Graph induced_cluster_graph(const ClusterLayout& layout, const Graph& global, int cluster) {
  const int lo = layout.offset(cluster);
  const int size = layout.cluster_size(cluster);
  std::vector<Graph::Edge> edges;
  for (const auto& [u, v] : global.edges())
    if (u >= lo && u < lo + size && v >= lo && v < lo + size) edges.emplace_back(u - lo, v - lo);
  return Graph(size, std::move(edges));
}

TopologySpec default_topology() {
  ClusterLayout layout({3, 3, 1});
  std::vector<Graph> clusters{
      Graph(3, {{0, 1}, {1, 2}}),
      Graph(3, {{0, 1}, {1, 2}}),
      Graph(1, {}),
  };
  // Agents 1-2-3 | 4-5-6 | 7, bridges 3-4, 3-7, 4-7 (flat indices below).
  Graph global(7, {{0, 1}, {1, 2}, {3, 4}, {4, 5}, {2, 3}, {2, 6}, {3, 6}});
  return {std::move(layout), std::move(global), std::move(clusters)};
}

Network build_network(const TopologySpec& spec) {
  const auto& layout = spec.layout;
  if (spec.global.node_count() != layout.agent_count())
    throw ConfigError("global graph has " + std::to_string(spec.global.node_count()) +
                      " nodes but the layout has " + std::to_string(layout.agent_count()) +
                      " agents");
  if (static_cast<int>(spec.clusters.size()) != layout.cluster_count())
    throw ConfigError("expected one graph per cluster");
  if (!spec.global.is_connected()) throw ConfigError("global communication graph is disconnected");
  if (!cluster_level_graph(layout, spec.global).is_connected())
    throw ConfigError("cluster-level graph is disconnected");

  std::vector<MixingMatrix> cluster_mixing;
  for (int c = 0; c < layout.cluster_count(); ++c) {
    const Graph& g = spec.clusters[c];
    if (g.node_count() != layout.cluster_size(c))
      throw ConfigError("graph of cluster " + std::to_string(c + 1) + " has wrong node count");
    if (!g.is_connected())
      throw ConfigError("graph of cluster " + std::to_string(c + 1) + " is disconnected");
    for (const auto& [u, v] : g.edges()) {
      if (!spec.global.has_edge(layout.offset(c) + u, layout.offset(c) + v))
        throw ConfigError("cluster " + std::to_string(c + 1) +
                          " edge is missing from the global graph");
    }
    cluster_mixing.push_back(build_metropolis(g));
  }

  MixingMatrix mixing = build_metropolis(spec.global);
  LaplacianMatrix laplacian = laplacian_from_mixing(mixing);
  return Network{layout, spec.global, spec.clusters, std::move(mixing), std::move(cluster_mixing),
                 std::move(laplacian)};
}

}  // namespace dgne
