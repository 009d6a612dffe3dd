#pragma once

#include <compare>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace dgne {

using Matrix = Eigen::MatrixXd;

/// Tolerance for row/column-sum checks on mixing matrices.
inline constexpr double kStochasticTolerance = 1e-12;

/// Agent (i, j): cluster i, member j. Both zero-based.
struct AgentId {
  int cluster = 0;
  int index = 0;

  auto operator<=>(const AgentId&) const = default;
};

/// Cluster sizes n_1..n_N and the flat (i, j) <-> global index map.
class ClusterLayout {
 public:
  explicit ClusterLayout(std::vector<int> sizes);

  int cluster_count() const { return static_cast<int>(sizes_.size()); }
  int agent_count() const { return total_; }
  int cluster_size(int cluster) const;
  int offset(int cluster) const;
  const std::vector<int>& sizes() const { return sizes_; }

  bool contains(AgentId a) const;
  int flat(AgentId a) const;
  AgentId agent(int flat_index) const;
  int cluster_of(int flat_index) const { return agent(flat_index).cluster; }

  bool operator==(const ClusterLayout&) const = default;

 private:
  std::vector<int> sizes_;
  std::vector<int> offsets_;
  std::vector<int> owner_;  // flat index -> cluster
  int total_ = 0;
};

/// Undirected simple graph; self-loops are implicit in mixing and never stored.
class Graph {
 public:
  using Edge = std::pair<int, int>;

  Graph(int node_count, std::vector<Edge> edges);

  int node_count() const { return node_count_; }
  /// Normalized edges (u < v), sorted, deduplicated.
  const std::vector<Edge>& edges() const { return edges_; }
  std::vector<int> degrees() const;
  const std::vector<int>& neighbors(int node) const { return adjacency_.at(node); }
  bool has_edge(int u, int v) const;
  bool is_connected() const;
  Graph without_edge(int u, int v) const;

 private:
  int node_count_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> adjacency_;
};

/// Nonzero entry of a sparse matrix row.
struct Weight {
  int col;
  double value;
};

/// Row-wise nonzeros of a dense matrix, in ascending column order.
class SparseRows {
 public:
  SparseRows() = default;
  explicit SparseRows(const Matrix& dense);

  std::span<const Weight> row(int r) const {
    return {entries_.data() + starts_[r], entries_.data() + starts_[r + 1]};
  }
  int rows() const { return static_cast<int>(starts_.size()) - 1; }

 private:
  std::vector<int> starts_{0};
  std::vector<Weight> entries_;
};

/// Nonnegative doubly stochastic matrix conforming to a graph.
class MixingMatrix {
 public:
  /// Validates nonnegativity, double stochasticity and the graph's sparsity pattern.
  static MixingMatrix from_matrix(Matrix entries, const Graph& graph);

  const Matrix& entries() const { return entries_; }
  double operator()(int r, int c) const { return entries_(r, c); }
  int size() const { return static_cast<int>(entries_.rows()); }
  /// Smallest positive entry, the scalar a of the weight lower bound.
  double min_positive() const { return min_positive_; }
  std::span<const Weight> row(int r) const { return rows_.row(r); }

 private:
  MixingMatrix(Matrix entries, double min_positive);

  Matrix entries_;
  double min_positive_;
  SparseRows rows_;
};

/// L = I - W.
class LaplacianMatrix {
 public:
  explicit LaplacianMatrix(Matrix entries);

  const Matrix& entries() const { return entries_; }
  double operator()(int r, int c) const { return entries_(r, c); }
  int size() const { return static_cast<int>(entries_.rows()); }
  std::span<const Weight> row(int r) const { return rows_.row(r); }

 private:
  Matrix entries_;
  SparseRows rows_;
};

MixingMatrix build_metropolis(const Graph& graph);
bool validate_doubly_stochastic(const Matrix& m, double tolerance = kStochasticTolerance);
LaplacianMatrix laplacian_from_mixing(const MixingMatrix& w);

/// Largest |eigenvalue| of W - (1/n) 11^T by power iteration on its Gram matrix.
/// Equals the spectral norm, which is the eigenvalue magnitude for symmetric W.
double consensus_contraction(const MixingMatrix& w, int max_iterations = 20000);

/// Cluster-level graph: clusters p, q adjacent iff some edge joins their members.
Graph cluster_level_graph(const ClusterLayout& layout, const Graph& global);

/// Subgraph of `global` induced by the members of `cluster`, in local indices.
Graph induced_cluster_graph(const ClusterLayout& layout, const Graph& global, int cluster);

struct TopologySpec {
  ClusterLayout layout;
  Graph global;
  std::vector<Graph> clusters;  // local indices
};

/// Three clusters (3, 3, 1); paths inside clusters 1 and 2; a triangle on the
/// bridge agents 3, 4, 7 (flat 2, 3, 6).
TopologySpec default_topology();

/// Everything the engine needs about communication.
struct Network {
  ClusterLayout layout;
  Graph global;
  std::vector<Graph> clusters;
  MixingMatrix mixing;
  std::vector<MixingMatrix> cluster_mixing;
  LaplacianMatrix laplacian;
};

/// Checks connectivity of the global, every cluster and the cluster-level
/// graph, and that cluster edges belong to the global graph; builds
/// Metropolis weights for all of them.
Network build_network(const TopologySpec& spec);

}  // namespace dgne
