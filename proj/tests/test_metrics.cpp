#include <gtest/gtest.h>

#include "reconxf/metrics.hpp"
#include "test_util.hpp"

namespace reconxf {
namespace {

// O(P * N) pairwise comparison, ties worth one half.
double brute_auc(const std::vector<double>& s, const std::vector<char>& pos) {
  double wins = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!pos[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (pos[j]) continue;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      total += 1.0;
    }
  }
  return wins / total;
}

// Precision at every positive's rank; equal scores keep list order.
double brute_ap(const std::vector<double>& s, const std::vector<char>& pos) {
  std::vector<std::size_t> order(s.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      const bool swap = s[order[j]] > s[order[i]] || (s[order[j]] == s[order[i]] && order[j] < order[i]);
      if (swap) std::swap(order[i], order[j]);
    }
  }
  const double positives = static_cast<double>(std::count(pos.begin(), pos.end(), 1));
  double hits = 0.0;
  double sum = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (pos[order[r]]) {
      hits += 1.0;
      sum += hits / static_cast<double>(r + 1);
    }
  }
  return sum / positives;
}

struct Instance {
  std::vector<double> scores;
  std::vector<char> positive;
};

Instance random_instance(std::uint64_t seed, bool ties) {
  Rng rng = make_rng(seed);
  std::uniform_int_distribution<int> level(0, 4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Instance inst;
  for (int i = 0; i < 20; ++i) {
    inst.scores.push_back(ties ? level(rng) / 4.0 : unit(rng));
    inst.positive.push_back(i < 2 ? char(i == 0) : char(unit(rng) < 0.3));
  }
  return inst;
}

TEST(AucAp, MatchBruteForceOnHundredRandomInstances) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Instance inst = random_instance(seed, seed % 2 == 0);
    EXPECT_EQ(auc_from_labeled(inst.scores, inst.positive), brute_auc(inst.scores, inst.positive)) << seed;
    EXPECT_NEAR(ap_from_labeled(inst.scores, inst.positive), brute_ap(inst.scores, inst.positive), 1e-15) << seed;
  }
}

TEST(AucAp, InvariantUnderMonotoneTransforms) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Instance inst = random_instance(seed, seed % 2 == 0);
    std::vector<double> exp_scores, affine;
    for (double s : inst.scores) {
      exp_scores.push_back(std::exp(s));
      affine.push_back(3.0 * s - 7.0);
    }
    const double a = auc_from_labeled(inst.scores, inst.positive);
    const double p = ap_from_labeled(inst.scores, inst.positive);
    EXPECT_EQ(auc_from_labeled(exp_scores, inst.positive), a);
    EXPECT_EQ(auc_from_labeled(affine, inst.positive), a);
    EXPECT_EQ(ap_from_labeled(exp_scores, inst.positive), p);
    EXPECT_EQ(ap_from_labeled(affine, inst.positive), p);
  }
}

TEST(AucAp, NegationComplementsAucWithoutTies) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Instance inst = random_instance(seed, false);
    std::vector<double> neg;
    for (double s : inst.scores) neg.push_back(-s);
    EXPECT_NEAR(auc_from_labeled(neg, inst.positive), 1.0 - auc_from_labeled(inst.scores, inst.positive), 1e-15);
  }
}

TEST(AucAp, SinglePositiveRankedFirstOrLast) {
  std::vector<double> scores;
  for (int i = 0; i < 10; ++i) scores.push_back(1.0 - 0.1 * i);
  std::vector<char> first(10, 0), last(10, 0);
  first[0] = 1;
  last[9] = 1;
  EXPECT_DOUBLE_EQ(ap_from_labeled(scores, first), 1.0);
  EXPECT_DOUBLE_EQ(ap_from_labeled(scores, last), 0.1);
}

TEST(AucAp, ConstantScoresGiveHalf) {
  EXPECT_EQ(auc_from_labeled(std::vector<double>(8, 0.3), {1, 0, 0, 1, 0, 0, 0, 1}), 0.5);
}

TEST(AucAp, RequiresBothClasses) {
  EXPECT_THROW(auc_from_labeled({0.1, 0.2}, {0, 0}), Error);
  EXPECT_THROW(auc_from_labeled({0.1, 0.2}, {1, 1}), Error);
  EXPECT_THROW(ap_from_labeled({0.1, 0.2}, {0, 0}), Error);
}

TEST(LinkMetrics, TruthScoresPerfectly) {
  const Graph g = testing::small_graph();
  for (NegativePolicy policy : {NegativePolicy::AllPairs, NegativePolicy::SampledEqual}) {
    const LinkScores s = evaluate_links(g.A.to_dense(), g.A, EvalSpec{policy, 3, 5});
    EXPECT_EQ(s.auc, 1.0);
    EXPECT_EQ(s.ap, 1.0);
  }
}

TEST(LinkMetrics, DiagonalIgnored) {
  const Graph g = testing::small_graph();
  Matrix scores = g.A.to_dense();
  scores.diagonal().setConstant(100.0);
  EXPECT_EQ(auc(scores, g.A, EvalSpec{}), 1.0);
}

TEST(EvaluationPairs, AllPairsCoversUpperTriangle) {
  const Graph g = testing::small_graph();
  const PairSet set = evaluation_pairs(g.A, NegativePolicy::AllPairs, 0);
  EXPECT_EQ(set.pairs.size(), static_cast<std::size_t>(g.n * (g.n - 1) / 2));
  EXPECT_EQ(static_cast<std::size_t>(std::count(set.positive.begin(), set.positive.end(), 1)), g.A.num_edges());
}

TEST(EvaluationPairs, SampledEqualBalancedAndReproducible) {
  SbmSpec spec;
  spec.n = 60;
  const Graph g = generate_sbm(spec);
  const PairSet a = evaluation_pairs(g.A, NegativePolicy::SampledEqual, 4);
  const PairSet b = evaluation_pairs(g.A, NegativePolicy::SampledEqual, 4);
  EXPECT_EQ(a.pairs, b.pairs);
  EXPECT_EQ(a.positive, b.positive);
  const auto pos = std::count(a.positive.begin(), a.positive.end(), 1);
  EXPECT_EQ(static_cast<std::size_t>(pos), g.A.num_edges());
  EXPECT_EQ(a.pairs.size(), 2 * g.A.num_edges());
  for (std::size_t i = 0; i < a.pairs.size(); ++i) {
    EXPECT_LT(a.pairs[i].first, a.pairs[i].second);
    EXPECT_EQ(g.A.has_edge(a.pairs[i].first, a.pairs[i].second), a.positive[i] == 1);
  }
  const Matrix scores = testing::random_matrix(60, 60, 5);
  EXPECT_EQ(auc(scores, g.A, EvalSpec{NegativePolicy::SampledEqual, 4, 5}),
            auc(scores, g.A, EvalSpec{NegativePolicy::SampledEqual, 4, 5}));
}

TEST(EvalSpecDefault, SwitchesPolicyAboveFiveThousand) {
  EXPECT_EQ(default_eval_spec(5000).policy, NegativePolicy::AllPairs);
  EXPECT_EQ(default_eval_spec(5001).policy, NegativePolicy::SampledEqual);
}

TEST(SimilarityBaseline, Examples) {
  Matrix m(3, 2);
  m << 1, 0,  //
      1, 1,   //
      1, 0;
  const Matrix s = similarity_baseline(m);
  EXPECT_DOUBLE_EQ(s(0, 2), 1.0);
  EXPECT_NEAR(s(0, 1), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(s(1, 2), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_EQ(s.diagonal(), Vector(Vector::Zero(3)));
  EXPECT_EQ(similarity_baseline(Matrix::Identity(4, 4)), Matrix(Matrix::Zero(4, 4)));
  Matrix neg(2, 1);
  neg << 1, -1;
  EXPECT_EQ(similarity_baseline(neg)(0, 1), 0.0);
  Matrix zero_row = Matrix::Ones(3, 2);
  zero_row.row(1).setZero();
  EXPECT_EQ(similarity_baseline(zero_row).row(1).cwiseAbs().maxCoeff(), 0.0);
}

}  // namespace
}  // namespace reconxf
