#include <cmath>
#include <gtest/gtest.h>

#include "reconxf/privacy.hpp"
#include "test_util.hpp"

namespace reconxf {
namespace {

FeaturePrivacyParams unit_params(int d, double eps, int m = 1) {
  FeaturePrivacyParams p;
  p.eps_x = eps;
  p.m = m;
  p.alpha = Vector::Zero(d);
  p.beta = Vector::Ones(d);
  return p;
}

TEST(MbEncode, PlusProbabilityClosedForm) {
  EXPECT_NEAR(mb_plus_probability(1.0, 0.0, 1.0, std::log(3.0), 1), 0.75, 1e-12);
  EXPECT_NEAR(mb_plus_probability(0.0, 0.0, 1.0, std::log(3.0), 1), 0.25, 1e-12);
  for (double eps : {0.01, 1.0, 8.0}) EXPECT_DOUBLE_EQ(mb_plus_probability(0.5, 0.0, 1.0, eps, 1), 0.5);
  EXPECT_DOUBLE_EQ(mb_plus_probability(3.0, 2.0, 4.0, 1.0, 1), 0.5);
}

TEST(MbEncode, EmpiricalFrequencyMatchesProbability) {
  const int draws = 100000;
  const Matrix X = Matrix::Ones(draws, 1);
  const Matrix enc = mb_encode(X, unit_params(1, std::log(3.0)), 9);
  const double plus = (enc.array() > 0.0).cast<double>().mean();
  EXPECT_NEAR(plus, 0.75, 0.01);
}

TEST(MbEncode, AllDimensionsSampledLeavesNoZeros) {
  const Matrix X = testing::random_matrix(50, 6, 3, 0.0, 1.0);
  const Matrix enc = mb_encode(X, unit_params(6, 1.0, 6), 4);
  EXPECT_EQ((enc.array() == 0.0).count(), 0);
}

TEST(MbEncode, SamplesExactlyMDimensionsPerRow) {
  const Matrix X = testing::random_matrix(40, 10, 5, 0.0, 1.0);
  const Matrix enc = mb_encode(X, unit_params(10, 1.0, 3), 6);
  for (int i = 0; i < enc.rows(); ++i) EXPECT_EQ((enc.row(i).array() != 0.0).count(), 3);
  EXPECT_TRUE(((enc.array() == 0.0) || (enc.array().abs() == 1.0)).all());
}

TEST(MbEncode, RejectsOutOfBoundsInput) {
  Matrix X = Matrix::Constant(2, 2, 0.5);
  X(1, 0) = 1.5;
  EXPECT_THROW(mb_encode(X, unit_params(2, 1.0), 1), Error);
}

TEST(MbEncode, DeterministicForSeed) {
  const Matrix X = testing::random_matrix(30, 4, 8, 0.0, 1.0);
  EXPECT_EQ(mb_encode(X, unit_params(4, 1.0), 5), mb_encode(X, unit_params(4, 1.0), 5));
  EXPECT_NE(mb_encode(X, unit_params(4, 1.0), 5), mb_encode(X, unit_params(4, 1.0), 6));
}

TEST(MbRectify, UnbiasedAtTopOfRange) {
  const int draws = 100000;
  const FeaturePrivacyParams p = unit_params(1, std::log(3.0));
  const Matrix est = mb_rectify(mb_encode(Matrix::Ones(draws, 1), p, 11), p);
  EXPECT_NEAR(est.mean(), 1.0, 0.01);
}

TEST(MbRectify, MidpointCodeMapsToMidpoint) {
  const FeaturePrivacyParams p = unit_params(1, std::log(3.0));
  EXPECT_DOUBLE_EQ(mb_rectify(Matrix::Zero(1, 1), p)(0, 0), 0.5);
  const Matrix est = mb_rectify(mb_encode(Matrix::Constant(100000, 1, 0.5), p, 12), p);
  EXPECT_NEAR(est.mean(), 0.5, 0.01);
}

TEST(MbRectify, LargeBudgetIsNearlyExact) {
  const FeaturePrivacyParams p = unit_params(1, 50.0);
  for (double x : {0.0, 1.0}) {
    const Matrix est = mb_rectify(mb_encode(Matrix::Constant(20, 1, x), p, 13), p);
    EXPECT_LE((est.array() - x).abs().maxCoeff(), 0.05);
  }
}

TEST(MbRectify, RejectsMLargerThanD) {
  EXPECT_THROW(mb_rectify(Matrix::Zero(1, 2), unit_params(2, 1.0, 3)), Error);
}

// Unbiasedness over sampling: with m < d the unsampled zeros are part of the
// estimator, so the mean over many rows must still recover x.
TEST(MbRectify, UnbiasedWithDimensionSampling) {
  const int draws = 100000;
  const FeaturePrivacyParams p = unit_params(4, 2.0, 1);
  Matrix X(1, 4);
  X << 0.0, 0.3, 0.7, 1.0;
  const Matrix est = mb_rectify(mb_encode(X.replicate(draws, 1), p, 14), p);
  for (int j = 0; j < 4; ++j) {
    const double mean = est.col(j).mean();
    const double se = std::sqrt((est.col(j).array() - mean).square().sum() / (draws - 1) / draws);
    EXPECT_LE(std::abs(mean - X(0, j)), 3.0 * se + 1e-12) << "dim " << j;
  }
}

TEST(MbMechanism, LikelihoodRatioBoundedByBudget) {
  for (double eps : {0.01, 0.5, 1.0, std::log(3.0), 3.0, 8.0}) {
    for (double x = 0.0; x <= 1.0; x += 0.1) {
      for (double x2 = 0.0; x2 <= 1.0; x2 += 0.1) {
        const double p1 = mb_plus_probability(x, 0.0, 1.0, eps, 1);
        const double p2 = mb_plus_probability(x2, 0.0, 1.0, eps, 1);
        EXPECT_LE(p1 / p2, std::exp(eps) * (1 + 1e-12));
        EXPECT_LE((1 - p1) / (1 - p2), std::exp(eps) * (1 + 1e-12));
      }
    }
  }
}

LabelPrivacyParams rr(double eps, int c) {
  LabelPrivacyParams p;
  p.eps_y = eps;
  p.c = c;
  return p;
}

TEST(RrTransition, ClosedFormValues) {
  const Matrix T = rr_transition(rr(std::log(3.0), 3));
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(T(i, j), i == j ? 0.6 : 0.2, 1e-12);
  }
}

TEST(RrTransition, Limits) {
  EXPECT_LE((rr_transition(rr(50.0, 4)) - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE((rr_transition(rr(1e-6, 4)).array() - 0.25).abs().maxCoeff(), 1e-6);
}

TEST(RrTransition, RowStochasticAndSymmetric) {
  for (double eps : {0.01, 1.0, 3.0, 8.0}) {
    for (int c : {2, 3, 7, 40}) {
      const Matrix T = rr_transition(rr(eps, c));
      EXPECT_LE((T.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
      EXPECT_EQ(T, Matrix(T.transpose()));
    }
  }
}

TEST(RrPerturb, KeepRateMatchesDiagonal) {
  const std::vector<int> labels(100000, 0);
  const std::vector<int> out = rr_perturb(labels, rr(std::log(3.0), 3), 21);
  const double kept = static_cast<double>(std::count(out.begin(), out.end(), 0)) / labels.size();
  EXPECT_NEAR(kept, 0.6, 0.01);
}

TEST(RrPerturb, LargeBudgetIsIdentity) {
  std::vector<int> labels;
  for (int i = 0; i < 1000; ++i) labels.push_back(i % 5);
  EXPECT_EQ(rr_perturb(labels, rr(50.0, 5), 22), labels);
}

TEST(RrPerturb, DeterministicForSeed) {
  std::vector<int> labels;
  for (int i = 0; i < 500; ++i) labels.push_back(i % 3);
  EXPECT_EQ(rr_perturb(labels, rr(0.5, 3), 23), rr_perturb(labels, rr(0.5, 3), 23));
}

TEST(PrivatizedView, SaveLoadRoundTrip) {
  const Graph g = testing::small_graph();
  const PrivatizedView view = privatize(g, 1.0, 1.0, 1, 5);
  const auto dir = std::filesystem::temp_directory_path() / "reconxf_view_roundtrip";
  std::filesystem::remove_all(dir);
  save_view(view, redact(g), dir);
  EXPECT_FALSE(std::filesystem::exists(dir / "edges.csv"));
  RedactedGraph meta;
  const PrivatizedView back = load_view(dir, &meta);
  EXPECT_EQ(back.X_enc, view.X_enc);
  EXPECT_EQ(back.Y_priv, view.Y_priv);
  EXPECT_EQ(back.feature_params.eps_x, 1.0);
  EXPECT_EQ(meta.split, g.split);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace reconxf
