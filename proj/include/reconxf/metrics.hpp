#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "reconxf/common.hpp"
#include "reconxf/graph.hpp"

namespace reconxf {

enum class NegativePolicy { AllPairs, SampledEqual };

struct EvalSpec {
  NegativePolicy policy = NegativePolicy::AllPairs;
  std::uint64_t seed = 0;
  /// Number of independent negative samples averaged under SampledEqual.
  int repetitions = 5;
};

/// AllPairs up to 5000 nodes, sampled negatives above.
EvalSpec default_eval_spec(int n);

/// Upper-triangle pairs scored by an evaluation: true edges and negatives.
struct PairSet {
  std::vector<std::pair<int, int>> pairs;  // ascending (u, v) order, u < v
  std::vector<char> positive;
};

/// Negatives are every non-edge (AllPairs) or |positives| distinct non-edges
/// drawn with `seed` (SampledEqual). Self-pairs are never included.
PairSet evaluation_pairs(const Adjacency& truth, NegativePolicy policy, std::uint64_t seed);

/// Rank AUC over labeled scores: probability a positive outscores a
/// negative, ties counting 1/2. Counted in integers, so the result is exact
/// up to the final division.
double auc_from_labeled(const std::vector<double>& scores, const std::vector<char>& positive);
/// Average precision over the list sorted by descending score; equal scores
/// keep their input order.
double ap_from_labeled(const std::vector<double>& scores, const std::vector<char>& positive);

double auc(const Matrix& scores, const Adjacency& truth, const EvalSpec& spec);
double ap(const Matrix& scores, const Adjacency& truth, const EvalSpec& spec);

struct LinkScores {
  double auc = 0.0;
  double ap = 0.0;
};
LinkScores evaluate_links(const Matrix& scores, const Adjacency& truth, const EvalSpec& spec);

/// Row cosine similarity with the diagonal zeroed and negatives clamped.
Matrix similarity_baseline(const Matrix& M);

}  // namespace reconxf
