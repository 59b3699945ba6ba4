#include "reconxf/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace reconxf {

std::string to_string(FeatureKind kind) {
  return kind == FeatureKind::Binary ? "binary" : "continuous";
}

std::string to_string(Split split) {
  switch (split) {
    case Split::Train:
      return "train";
    case Split::Val:
      return "val";
    case Split::Test:
      return "test";
  }
  return "test";
}

Split parse_split(const std::string& text) {
  if (text == "train") return Split::Train;
  if (text == "val") return Split::Val;
  if (text == "test") return Split::Test;
  throw Error("unknown split '" + text + "'");
}

Adjacency::Adjacency(int num_nodes, const std::vector<Edge>& edges)
    : num_nodes_(num_nodes), neighbors_(num_nodes) {
  edges_.reserve(edges.size());
  for (const Edge& e : edges) {
    if (e.u < 0 || e.v < 0 || e.u >= num_nodes || e.v >= num_nodes) {
      throw Error("edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                  ") out of range for " + std::to_string(num_nodes) + " nodes");
    }
    if (e.u == e.v) continue;
    edges_.push_back({std::min(e.u, e.v), std::max(e.u, e.v)});
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
  for (const Edge& e : edges_) {
    neighbors_[e.u].push_back(e.v);
    neighbors_[e.v].push_back(e.u);
  }
  for (auto& list : neighbors_) std::sort(list.begin(), list.end());
}

bool Adjacency::has_edge(int u, int v) const {
  if (u == v || u < 0 || v < 0 || u >= num_nodes_ || v >= num_nodes_) return false;
  const auto& list = neighbors_[u];
  return std::binary_search(list.begin(), list.end(), v);
}

Matrix Adjacency::to_dense() const {
  Matrix m = Matrix::Zero(num_nodes_, num_nodes_);
  for (const Edge& e : edges_) {
    m(e.u, e.v) = 1.0;
    m(e.v, e.u) = 1.0;
  }
  return m;
}

SparseMatrix Adjacency::to_sparse() const {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(2 * edges_.size());
  for (const Edge& e : edges_) {
    triplets.emplace_back(e.u, e.v, 1.0);
    triplets.emplace_back(e.v, e.u, 1.0);
  }
  SparseMatrix m(num_nodes_, num_nodes_);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

Adjacency Adjacency::from_dense(const Matrix& binary) {
  std::vector<Edge> edges;
  for (int i = 0; i < binary.rows(); ++i) {
    for (int j = i + 1; j < binary.cols(); ++j) {
      if (binary(i, j) != 0.0 || binary(j, i) != 0.0) edges.push_back({i, j});
    }
  }
  return Adjacency(static_cast<int>(binary.rows()), edges);
}

void Graph::validate() const {
  if (n <= 0 || d <= 0 || c <= 0) throw Error("graph sizes must be positive");
  if (X.rows() != n || X.cols() != d) throw Error("feature matrix shape does not match n x d");
  if (static_cast<int>(Y.size()) != n) throw Error("label vector length does not match n");
  if (static_cast<int>(split.size()) != n) throw Error("split vector length does not match n");
  if (A.num_nodes() != n) throw Error("adjacency size does not match n");
  if (alpha.size() != d || beta.size() != d) throw Error("feature bounds must have length d");
  for (int i = 0; i < n; ++i) {
    if (Y[i] < 0 || Y[i] >= c) {
      throw Error("label of node " + std::to_string(i) + " outside [0, c)");
    }
  }
  for (int j = 0; j < d; ++j) {
    if (!(alpha[j] < beta[j])) throw Error("feature " + std::to_string(j) + " has alpha >= beta");
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) {
      const double x = X(i, j);
      if (kind == FeatureKind::Binary && x != 0.0 && x != 1.0) {
        throw Error("binary feature (" + std::to_string(i) + "," + std::to_string(j) +
                    ") is not 0/1");
      }
      if (!(x >= alpha[j] && x <= beta[j])) {
        throw Error("feature (" + std::to_string(i) + "," + std::to_string(j) +
                    ") outside declared bounds");
      }
    }
  }
}

namespace {
std::vector<int> select_split(const std::vector<Split>& split, Split s) {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(split.size()); ++i) {
    if (split[i] == s) out.push_back(i);
  }
  return out;
}
}  // namespace

std::vector<int> Graph::nodes_in(Split s) const { return select_split(split, s); }
std::vector<int> RedactedGraph::nodes_in(Split s) const { return select_split(split, s); }

RedactedGraph redact(const Graph& graph) {
  return RedactedGraph{graph.n, graph.d, graph.c, graph.split, graph.kind, graph.alpha, graph.beta};
}

int NormAdj::size() const {
  return std::visit([](const auto& m) { return static_cast<int>(m.rows()); }, storage_);
}

Matrix NormAdj::apply(const Matrix& rhs) const {
  return std::visit([&](const auto& m) -> Matrix { return m * rhs; }, storage_);
}

Matrix NormAdj::to_dense() const {
  if (is_dense()) return dense();
  return Matrix(sparse());
}

Matrix normalize_dense(const Matrix& weights) {
  Vector scale = (weights.rowwise().sum().array() + 1.0).rsqrt();
  Matrix out = weights;
  out.diagonal().array() += 1.0;
  out = scale.asDiagonal() * out * scale.asDiagonal();
  return out;
}

Matrix normalize_dense_backward(const Matrix& weights, const Matrix& grad_norm) {
  // N = S (W + I) S with S = diag(deg^{-1/2}), deg = rowsum(W) + 1.
  const Vector deg = weights.rowwise().sum().array() + 1.0;
  const Vector scale = deg.array().rsqrt();
  Matrix loops = weights;
  loops.diagonal().array() += 1.0;
  // dL/dW through the explicit (W + I) factor.
  Matrix grad = scale.asDiagonal() * grad_norm * scale.asDiagonal();
  // dL/ds_i = sum_l G_il (W+I)_il s_l + sum_k G_ki (W+I)_ki s_k
  const Matrix weighted = grad_norm.cwiseProduct(loops);
  const Vector grad_scale = weighted * scale + weighted.transpose() * scale;
  // ds_i/ddeg_i = -1/2 deg_i^{-3/2}
  const Vector grad_deg = grad_scale.array() * (-0.5) * scale.array().cube();
  grad.colwise() += grad_deg;
  return grad;
}

NormAdj normalize_adjacency(const Matrix& weights) { return NormAdj(normalize_dense(weights)); }

NormAdj normalize_adjacency(const Adjacency& adjacency) {
  const int n = adjacency.num_nodes();
  Vector scale(n);
  for (int i = 0; i < n; ++i) scale[i] = 1.0 / std::sqrt(adjacency.degree(i) + 1.0);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(2 * adjacency.num_edges() + n);
  for (int i = 0; i < n; ++i) triplets.emplace_back(i, i, scale[i] * scale[i]);
  for (const Edge& e : adjacency.edges()) {
    const double w = scale[e.u] * scale[e.v];
    triplets.emplace_back(e.u, e.v, w);
    triplets.emplace_back(e.v, e.u, w);
  }
  SparseMatrix m(n, n);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return NormAdj(std::move(m));
}

Metric parse_metric(const std::string& text) {
  if (text == "cosine") return Metric::Cosine;
  if (text == "euclidean") return Metric::Euclidean;
  throw Error("unknown metric '" + text + "'");
}

Matrix cosine_similarity(const Matrix& points) {
  Vector norms = points.rowwise().norm();
  Vector inv = norms.unaryExpr([](double v) { return v > 0.0 ? 1.0 / v : 0.0; });
  Matrix unit = inv.asDiagonal() * points;
  return unit * unit.transpose();
}

Adjacency knn_graph(const Matrix& points, int k, Metric metric) {
  const int n = static_cast<int>(points.rows());
  if (k < 1 || k >= n) {
    throw Error("knn_graph requires 1 <= k < n (k=" + std::to_string(k) +
                ", n=" + std::to_string(n) + ")");
  }
  // Higher score = closer.
  Matrix score;
  if (metric == Metric::Cosine) {
    score = cosine_similarity(points);
  } else {
    const Vector sq = points.rowwise().squaredNorm();
    score = 2.0 * (points * points.transpose());
    score.colwise() -= sq;
    score.rowwise() -= sq.transpose();
  }
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(n) * k);
  std::vector<int> order(n - 1);
  for (int i = 0; i < n; ++i) {
    int pos = 0;
    for (int j = 0; j < n; ++j) {
      if (j != i) order[pos++] = j;
    }
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
      const double sa = score(i, a);
      const double sb = score(i, b);
      if (sa != sb) return sa > sb;
      return a < b;
    });
    for (int t = 0; t < k; ++t) edges.push_back({i, order[t]});
  }
  return Adjacency(n, edges);
}

void SbmSpec::validate() const {
  if (blocks < 1) throw Error("SBM needs at least one block");
  if (n < blocks) throw Error("SBM needs n >= blocks");
  if (!(0.0 <= p_out && p_out <= p_in && p_in <= 1.0)) {
    throw Error("SBM needs 0 <= p_out <= p_in <= 1");
  }
  if (!(0.0 <= flip_noise && flip_noise <= 0.5)) throw Error("SBM flip noise must lie in [0, 0.5]");
  if (feature_dim < 1) throw Error("SBM feature dimension must be positive");
  if (train_fraction < 0.0 || val_fraction < 0.0 || train_fraction + val_fraction > 1.0) {
    throw Error("SBM split fractions must be non-negative and sum to at most 1");
  }
}

Graph generate_sbm(const SbmSpec& spec) {
  spec.validate();
  Graph g;
  g.n = spec.n;
  g.d = spec.feature_dim;
  g.c = spec.blocks;
  g.kind = FeatureKind::Binary;
  g.alpha = Vector::Zero(g.d);
  g.beta = Vector::Ones(g.d);
  g.Y.resize(g.n);
  for (int i = 0; i < g.n; ++i) {
    g.Y[i] = static_cast<int>(static_cast<long long>(i) * spec.blocks / spec.n);
  }

  Rng edge_rng = make_rng(spec.seed, 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Edge> edges;
  for (int i = 0; i < g.n; ++i) {
    for (int j = i + 1; j < g.n; ++j) {
      const double p = g.Y[i] == g.Y[j] ? spec.p_in : spec.p_out;
      if (unit(edge_rng) < p) edges.push_back({i, j});
    }
  }
  g.A = Adjacency(g.n, edges);

  Rng feature_rng = make_rng(spec.seed, 2);
  Matrix centroids(g.c, g.d);
  for (int b = 0; b < g.c; ++b) {
    for (int j = 0; j < g.d; ++j) centroids(b, j) = unit(feature_rng) < 0.5 ? 1.0 : 0.0;
  }
  g.X.resize(g.n, g.d);
  for (int i = 0; i < g.n; ++i) {
    for (int j = 0; j < g.d; ++j) {
      const double bit = centroids(g.Y[i], j);
      g.X(i, j) = unit(feature_rng) < spec.flip_noise ? 1.0 - bit : bit;
    }
  }

  Rng split_rng = make_rng(spec.seed, 3);
  std::vector<int> perm(g.n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), split_rng);
  const auto n_train = static_cast<int>(std::round(spec.train_fraction * g.n));
  const auto n_val = static_cast<int>(std::round(spec.val_fraction * g.n));
  g.split.assign(g.n, Split::Test);
  for (int t = 0; t < g.n; ++t) {
    if (t < n_train) {
      g.split[perm[t]] = Split::Train;
    } else if (t < n_train + n_val) {
      g.split[perm[t]] = Split::Val;
    }
  }
  g.validate();
  return g;
}

}  // namespace reconxf
