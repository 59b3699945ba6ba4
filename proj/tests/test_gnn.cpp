#include <gtest/gtest.h>

#include "reconxf/gnn.hpp"
#include "test_util.hpp"

namespace reconxf {
namespace {

using testing::numeric_gradient;
using testing::random_matrix;
using testing::relative_error;

TEST(GcnForward, ZeroWeightsGiveUniformSoftmax) {
  const Graph g = testing::small_graph(6, 4, 3, 1);
  GcnParams p = init_gcn(4, 5, 3, 2);
  p.W1.setZero();
  p.W2.setZero();
  const Matrix logits = gcn_forward(normalize_adjacency(g.A), g.X, p);
  EXPECT_EQ(logits, Matrix(Matrix::Zero(6, 3)));
  EXPECT_LE((softmax_rows(logits).array() - 1.0 / 3.0).abs().maxCoeff(), 1e-15);
}

TEST(GcnForward, SingleNodeHandProduct) {
  Matrix x(1, 2);
  x << 1.0, -2.0;
  GcnParams p;
  p.W1.resize(2, 2);
  p.W1 << 1.0, 0.5, 1.0, -1.0;  // x W1 = (-1, 2.5) -> relu (0, 2.5)
  p.W2.resize(2, 3);
  p.W2 << 1.0, 2.0, 3.0, 0.4, 0.0, -1.0;
  const Matrix logits = gcn_forward(NormAdj(Matrix(Matrix::Ones(1, 1))), x, p);
  Matrix expected(1, 3);
  expected << 1.0, 0.0, -2.5;
  EXPECT_LE((logits - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(GcnForward, PermutationEquivariant) {
  const Graph g = testing::small_graph();
  const GcnParams p = init_gcn(g.d, 4, g.c, 3);
  const Matrix adj = normalize_dense(g.A.to_dense());
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(g.n);
  perm.setIdentity();
  std::reverse(perm.indices().data(), perm.indices().data() + g.n);
  std::swap(perm.indices()[0], perm.indices()[3]);
  const Matrix base = gcn_forward(NormAdj(adj), g.X, p);
  const Matrix permuted = gcn_forward(NormAdj(Matrix(perm * adj * perm.transpose())), perm * g.X, p);
  EXPECT_LE((permuted - perm * base).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GcnForward, SoftmaxRowsSumToOne) {
  const Matrix probs = softmax_rows(random_matrix(30, 7, 4, -50.0, 50.0));
  EXPECT_LE((probs.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-9);
}

TEST(GcnBackward, ZeroUpstreamGivesZeroGradients) {
  const Graph g = testing::small_graph();
  const GcnParams p = init_gcn(g.d, 4, g.c, 3);
  const GcnGrads grads = gcn_backward(normalize_adjacency(g.A), g.X, p, Matrix::Zero(g.n, g.c));
  EXPECT_EQ(grads.W1.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(grads.W2.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(grads.X.cwiseAbs().maxCoeff(), 0.0);
}

TEST(GcnBackward, FiveNodeInstanceWithStepOneEMinusFour) {
  const Matrix X = random_matrix(5, 4, 71);
  const GcnParams p = init_gcn(4, 3, 2, 72);
  const Matrix up = random_matrix(5, 2, 73);
  const NormAdj adj(normalize_dense(testing::random_symmetric_positive(5, 74)));
  const GcnGrads g = gcn_backward(adj, X, p, up);
  auto with = [&](auto setter) {
    return [&, setter](const Matrix& m) {
      GcnParams q = p;
      Matrix x = X;
      setter(q, x, m);
      return up.cwiseProduct(gcn_forward(adj, x, q)).sum();
    };
  };
  const auto set_w1 = [](GcnParams& q, Matrix&, const Matrix& m) { q.W1 = m; };
  const auto set_w2 = [](GcnParams& q, Matrix&, const Matrix& m) { q.W2 = m; };
  const auto set_x = [](GcnParams&, Matrix& x, const Matrix& m) { x = m; };
  EXPECT_LE(relative_error(g.W1, numeric_gradient(with(set_w1), p.W1, 1e-4)), 1e-4);
  EXPECT_LE(relative_error(g.W2, numeric_gradient(with(set_w2), p.W2, 1e-4)), 1e-4);
  EXPECT_LE(relative_error(g.X, numeric_gradient(with(set_x), X, 1e-4)), 1e-4);
}

// Linear activation and W2 = I: logits = N N X W1, so d logits(i,k) / d X(j,:)
// equals (N N)(i,j) * W1(:,k).
TEST(GcnBackward, LinearClosedFormOnTwoNodes) {
  Matrix n(2, 2);
  n << 0.6, 0.4, 0.4, 0.6;
  GcnParams p;
  p.activation = Activation::Identity;
  p.W1.resize(2, 2);
  p.W1 << 1.0, 2.0, -1.0, 0.5;
  p.W2 = Matrix::Identity(2, 2);
  const Matrix X = random_matrix(2, 2, 3);
  Matrix up = Matrix::Zero(2, 2);
  up(0, 1) = 1.0;
  const GcnGrads g = gcn_backward(NormAdj(n), X, p, up);
  const Matrix nn = n * n;
  Matrix expected(2, 2);
  expected.row(0) = nn(0, 0) * p.W1.col(1).transpose();
  expected.row(1) = nn(0, 1) * p.W1.col(1).transpose();
  EXPECT_LE((g.X - expected).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(CrossEntropy, MatchesManualLogSoftmax) {
  Matrix logits(2, 2);
  logits << 0.0, 0.0, 2.0, 0.0;
  const double loss = cross_entropy(logits, {1, 0}, {0, 1});
  const double expected = 0.5 * (std::log(2.0) + std::log(1.0 + std::exp(-2.0)));
  EXPECT_NEAR(loss, expected, 1e-14);
}

TEST(Adam, MovesAgainstGradient) {
  Adam opt({0.1});
  Matrix w = Matrix::Constant(2, 2, 1.0);
  opt.step(w, Matrix::Constant(2, 2, 3.0));
  EXPECT_NEAR(w(0, 0), 0.9, 1e-9);
}

class SbmTarget : public ::testing::Test {
 protected:
  static Graph sbm() {
    SbmSpec spec;
    spec.seed = 1;
    return generate_sbm(spec);
  }
};

TEST_F(SbmTarget, ReachesHighTestAccuracy) {
  const Graph g = sbm();
  TrainSpec spec;
  const TrainResult r = train_gcn(g, spec);
  const Matrix logits = gcn_forward(normalize_adjacency(g.A), g.X, r.params);
  EXPECT_GE(accuracy(logits, g.Y, g.nodes_in(Split::Test)), 0.9);
}

TEST_F(SbmTarget, ZeroEpochsReturnsInitialization) {
  const Graph g = sbm();
  TrainSpec spec;
  spec.epochs = 0;
  const TrainResult r = train_gcn(g, spec);
  const GcnParams init = init_gcn(g.d, spec.hidden_dim, g.c, spec.seed);
  EXPECT_EQ(r.params.W1, init.W1);
  EXPECT_EQ(r.params.W2, init.W2);
}

TEST_F(SbmTarget, SmallLearningRateLossMostlyDecreases) {
  const Graph g = sbm();
  TrainSpec spec;
  spec.lr = 1e-3;
  spec.dropout = 0.0;
  spec.epochs = 200;
  spec.patience = 1000;
  const TrainResult r = train_gcn(g, spec);
  int increases = 0;
  for (std::size_t e = 1; e < r.train_loss.size(); ++e) increases += r.train_loss[e] > r.train_loss[e - 1];
  EXPECT_LE(increases, static_cast<int>(0.05 * r.train_loss.size()));
}

TEST_F(SbmTarget, TrainingDeterministicForSeed) {
  const Graph g = sbm();
  TrainSpec spec;
  spec.epochs = 20;
  EXPECT_EQ(train_gcn(g, spec).params.W1, train_gcn(g, spec).params.W1);
}

}  // namespace
}  // namespace reconxf
