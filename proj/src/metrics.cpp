#include "reconxf/metrics.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <unordered_set>

namespace reconxf {

EvalSpec default_eval_spec(int n) {
  EvalSpec spec;
  spec.policy = n <= 5000 ? NegativePolicy::AllPairs : NegativePolicy::SampledEqual;
  return spec;
}

PairSet evaluation_pairs(const Adjacency& truth, NegativePolicy policy, std::uint64_t seed) {
  const int n = truth.num_nodes();
  PairSet out;
  if (policy == NegativePolicy::AllPairs) {
    const std::size_t total = static_cast<std::size_t>(n) * (n - 1) / 2;
    out.pairs.reserve(total);
    out.positive.reserve(total);
    for (int u = 0; u < n; ++u) {
      for (int v = u + 1; v < n; ++v) {
        out.pairs.emplace_back(u, v);
        out.positive.push_back(truth.has_edge(u, v) ? 1 : 0);
      }
    }
    return out;
  }
  const std::size_t edges = truth.num_edges();
  const std::size_t non_edges = static_cast<std::size_t>(n) * (n - 1) / 2 - edges;
  if (non_edges < edges) throw Error("SampledEqual: fewer non-edges than edges");
  std::unordered_set<std::uint64_t> chosen;
  Rng rng = make_rng(seed, 31);
  std::uniform_int_distribution<int> node(0, n - 1);
  while (chosen.size() < edges) {
    int u = node(rng);
    int v = node(rng);
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    if (truth.has_edge(u, v)) continue;
    chosen.insert(static_cast<std::uint64_t>(u) * n + v);
  }
  std::vector<std::pair<std::pair<int, int>, char>> items;
  items.reserve(2 * edges);
  for (const Edge& e : truth.edges()) items.push_back({{e.u, e.v}, 1});
  for (std::uint64_t key : chosen) {
    items.push_back({{static_cast<int>(key / n), static_cast<int>(key % n)}, 0});
  }
  std::sort(items.begin(), items.end());
  for (const auto& [pair, label] : items) {
    out.pairs.push_back(pair);
    out.positive.push_back(label);
  }
  return out;
}

double auc_from_labeled(const std::vector<double>& scores, const std::vector<char>& positive) {
  if (scores.size() != positive.size()) throw Error("auc: score and label counts differ");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the Mann-Whitney statistic, so that ties stay integral.
  std::uint64_t twice_wins = 0;
  std::uint64_t below_neg = 0;
  std::uint64_t n_pos = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    std::uint64_t group_pos = 0;
    std::uint64_t group_neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (positive[order[j]] ? group_pos : group_neg) += 1;
      ++j;
    }
    twice_wins += group_pos * (2 * below_neg + group_neg);
    below_neg += group_neg;
    n_pos += group_pos;
    i = j;
  }
  const std::uint64_t n_neg = below_neg;
  if (n_pos == 0) throw Error("auc: no positive pairs");
  if (n_neg == 0) throw Error("auc: no negative pairs");
  return static_cast<double>(twice_wins) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double ap_from_labeled(const std::vector<double>& scores, const std::vector<char>& positive) {
  if (scores.size() != positive.size()) throw Error("ap: score and label counts differ");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const auto n_pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), 1));
  if (n_pos == 0) throw Error("ap: no positive pairs");
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (!positive[order[k]]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  return sum / static_cast<double>(n_pos);
}

namespace {

std::vector<double> gather(const Matrix& scores, const PairSet& set) {
  std::vector<double> out;
  out.reserve(set.pairs.size());
  for (const auto& [u, v] : set.pairs) out.push_back(scores(u, v));
  return out;
}

void check_shape(const Matrix& scores, const Adjacency& truth) {
  if (scores.rows() != truth.num_nodes() || scores.cols() != truth.num_nodes()) {
    throw Error("evaluation: score matrix does not match the graph size");
  }
}

}  // namespace

LinkScores evaluate_links(const Matrix& scores, const Adjacency& truth, const EvalSpec& spec) {
  check_shape(scores, truth);
  if (spec.policy == NegativePolicy::AllPairs) {
    const PairSet set = evaluation_pairs(truth, spec.policy, spec.seed);
    const std::vector<double> values = gather(scores, set);
    return {auc_from_labeled(values, set.positive), ap_from_labeled(values, set.positive)};
  }
  if (spec.repetitions < 1) throw Error("evaluation: repetitions must be positive");
  LinkScores mean;
  for (int r = 0; r < spec.repetitions; ++r) {
    const PairSet set = evaluation_pairs(truth, spec.policy, derive_seed(spec.seed, static_cast<std::uint64_t>(r)));
    const std::vector<double> values = gather(scores, set);
    mean.auc += auc_from_labeled(values, set.positive);
    mean.ap += ap_from_labeled(values, set.positive);
  }
  mean.auc /= spec.repetitions;
  mean.ap /= spec.repetitions;
  return mean;
}

double auc(const Matrix& scores, const Adjacency& truth, const EvalSpec& spec) {
  return evaluate_links(scores, truth, spec).auc;
}

double ap(const Matrix& scores, const Adjacency& truth, const EvalSpec& spec) {
  return evaluate_links(scores, truth, spec).ap;
}

Matrix similarity_baseline(const Matrix& M) {
  Matrix sim = cosine_similarity(M).cwiseMax(0.0);
  sim.diagonal().setZero();
  return sim;
}

}  // namespace reconxf
