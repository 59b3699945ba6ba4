#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "reconxf/common.hpp"
#include "reconxf/graph.hpp"

namespace reconxf::testing {

/// Central finite-difference gradient of f at x.
inline Matrix numeric_gradient(const std::function<double(const Matrix&)>& f, Matrix x, double h = 1e-6) {
  Matrix grad(x.rows(), x.cols());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double saved = x.data()[k];
    x.data()[k] = saved + h;
    const double up = f(x);
    x.data()[k] = saved - h;
    const double down = f(x);
    x.data()[k] = saved;
    grad.data()[k] = (up - down) / (2.0 * h);
  }
  return grad;
}

/// ||a - b|| / max(||a||, ||b||, floor).
inline double relative_error(const Matrix& a, const Matrix& b, double floor = 1e-8) {
  const double scale = std::max({a.norm(), b.norm(), floor});
  return (a - b).norm() / scale;
}

inline Matrix random_matrix(int rows, int cols, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng = make_rng(seed, 99);
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = u(rng);
  return m;
}

inline Matrix random_symmetric_positive(int n, std::uint64_t seed) {
  Matrix a = random_matrix(n, n, seed, 0.05, 1.0);
  return (a + a.transpose()) * 0.5;
}

/// Small labeled graph: a ring plus chords, binary features.
inline Graph small_graph(int n = 8, int d = 5, int c = 2, std::uint64_t seed = 1) {
  Graph g;
  g.n = n;
  g.d = d;
  g.c = c;
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) edges.push_back({i, (i + 1) % n});
  edges.push_back({0, n / 2});
  edges.push_back({1, n - 2});
  g.A = Adjacency(n, edges);
  Rng rng = make_rng(seed, 5);
  std::bernoulli_distribution bit(0.5);
  g.X = Matrix::Zero(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) g.X(i, j) = bit(rng) ? 1.0 : 0.0;
    g.X(i, i % d) = 1.0;
  }
  g.Y.resize(n);
  g.split.resize(n);
  for (int i = 0; i < n; ++i) {
    g.Y[i] = i % c;
    g.split[i] = i < n / 2 ? Split::Train : (i < 3 * n / 4 ? Split::Val : Split::Test);
  }
  g.kind = FeatureKind::Binary;
  g.alpha = Vector::Zero(d);
  g.beta = Vector::Ones(d);
  g.validate();
  return g;
}

}  // namespace reconxf::testing
