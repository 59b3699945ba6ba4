#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "reconxf/common.hpp"

namespace reconxf {

enum class FeatureKind { Binary, Continuous };
enum class Split : std::uint8_t { Train, Val, Test };

std::string to_string(FeatureKind kind);
std::string to_string(Split split);
Split parse_split(const std::string& text);

/// Undirected edge stored with u < v.
struct Edge {
  int u = 0;
  int v = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Symmetric binary adjacency without self-loops, kept as a sorted edge list
/// plus per-node neighbor lists.
class Adjacency {
 public:
  Adjacency() = default;
  /// Self-loops are dropped; duplicates and reversed pairs collapse to one
  /// edge. Throws on out-of-range endpoints.
  Adjacency(int num_nodes, const std::vector<Edge>& edges);

  int num_nodes() const { return num_nodes_; }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<int>& neighbors(int node) const { return neighbors_[node]; }
  int degree(int node) const { return static_cast<int>(neighbors_[node].size()); }
  bool has_edge(int u, int v) const;

  Matrix to_dense() const;
  SparseMatrix to_sparse() const;
  static Adjacency from_dense(const Matrix& binary);

  friend bool operator==(const Adjacency& a, const Adjacency& b) {
    return a.num_nodes_ == b.num_nodes_ && a.edges_ == b.edges_;
  }

 private:
  int num_nodes_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> neighbors_;
};

/// Node-classification graph. Immutable after validate() succeeds.
struct Graph {
  int n = 0;
  int d = 0;
  int c = 0;
  Matrix X;
  std::vector<int> Y;
  Adjacency A;
  std::vector<Split> split;
  FeatureKind kind = FeatureKind::Binary;
  Vector alpha;  // per-feature lower bound
  Vector beta;   // per-feature upper bound

  /// Throws Error describing the first violated invariant.
  void validate() const;
  std::vector<int> nodes_in(Split s) const;
};

/// Everything an attacker may see about the graph besides the privatized
/// view and the explanations: sizes, the public split and the feature
/// bounds. It has no edges, features or labels.
struct RedactedGraph {
  int n = 0;
  int d = 0;
  int c = 0;
  std::vector<Split> split;
  FeatureKind kind = FeatureKind::Binary;
  Vector alpha;
  Vector beta;

  std::vector<int> nodes_in(Split s) const;
};

RedactedGraph redact(const Graph& graph);

/// Symmetric normalized adjacency D^{-1/2}(W+I)D^{-1/2}, dense or sparse.
class NormAdj {
 public:
  explicit NormAdj(Matrix dense) : storage_(std::move(dense)) {}
  explicit NormAdj(SparseMatrix sparse) : storage_(std::move(sparse)) {}

  int size() const;
  bool is_dense() const { return std::holds_alternative<Matrix>(storage_); }
  /// Left multiplication N * rhs. N is symmetric, so this is also N^T * rhs.
  Matrix apply(const Matrix& rhs) const;
  Matrix to_dense() const;
  const Matrix& dense() const { return std::get<Matrix>(storage_); }
  const SparseMatrix& sparse() const { return std::get<SparseMatrix>(storage_); }

 private:
  std::variant<Matrix, SparseMatrix> storage_;
};

/// Dense symmetric renormalization with self-loops.
Matrix normalize_dense(const Matrix& weights);
/// Vector-Jacobian product of normalize_dense: given dL/dN returns dL/dW.
Matrix normalize_dense_backward(const Matrix& weights, const Matrix& grad_norm);

NormAdj normalize_adjacency(const Matrix& weights);
NormAdj normalize_adjacency(const Adjacency& adjacency);

enum class Metric { Cosine, Euclidean };
Metric parse_metric(const std::string& text);

/// k-nearest-neighbor graph, symmetrized by union. Ties break toward the
/// lower node index; an all-zero row has cosine similarity 0 to every node.
Adjacency knn_graph(const Matrix& points, int k, Metric metric);

/// Row-wise cosine similarity; rows with zero norm get similarity 0.
Matrix cosine_similarity(const Matrix& points);

struct SbmSpec {
  int n = 200;
  int blocks = 2;
  double p_in = 0.1;
  double p_out = 0.01;
  double flip_noise = 0.1;
  int feature_dim = 64;
  double train_fraction = 0.2;
  double val_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Planted-partition graph with class-centroid binary features. Node i
/// belongs to block i * blocks / n.
Graph generate_sbm(const SbmSpec& spec);

/// Dataset directory I/O (meta.json, edges.csv, features.csv, labels.csv,
/// masks.csv).
Graph load_dataset(const std::filesystem::path& dir);
void save_dataset(const Graph& graph, const std::filesystem::path& dir);

}  // namespace reconxf
