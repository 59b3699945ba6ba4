#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "reconxf/common.hpp"
#include "reconxf/graph.hpp"

namespace reconxf {

/// Multi-bit feature mechanism parameters.
struct FeaturePrivacyParams {
  double eps_x = 1.0;
  int m = 1;  // dimensions sampled per node
  Vector alpha;
  Vector beta;

  int d() const { return static_cast<int>(alpha.size()); }
  void validate() const;
  /// Per-bit budget exponent e^{eps_x / m}.
  double bit_exp() const;
};

struct LabelPrivacyParams {
  double eps_y = 1.0;
  int c = 2;

  void validate() const;
};

/// The adversary's privatized copies of features and labels.
struct PrivatizedView {
  Matrix X_enc;  // entries in {-1, 0, +1}; 0 = dimension not sampled
  std::vector<int> Y_priv;
  FeaturePrivacyParams feature_params;
  LabelPrivacyParams label_params;

  int n() const { return static_cast<int>(X_enc.rows()); }
};

/// Pr[t = +1] for one sampled dimension with value x in [alpha, beta].
double mb_plus_probability(double x, double alpha, double beta, double eps_x, int m);

/// Encodes each row with an independent stream derived from (seed, row).
/// Throws when a value lies outside its bounds.
Matrix mb_encode(const Matrix& X, const FeaturePrivacyParams& params, std::uint64_t seed);

/// Unbiased affine estimator applied to every entry, unsampled zeros included.
Matrix mb_rectify(const Matrix& X_enc, const FeaturePrivacyParams& params);

/// Generalized randomized response transition matrix (c x c, row-stochastic).
Matrix rr_transition(const LabelPrivacyParams& params);

std::vector<int> rr_perturb(const std::vector<int>& labels, const LabelPrivacyParams& params,
                            std::uint64_t seed);

/// Privatizes features and labels of a graph under the given budgets.
PrivatizedView privatize(const Graph& graph, double eps_x, double eps_y, int m, std::uint64_t seed);

/// View directory: meta.json (sizes, bounds, privacy params), features.csv
/// (integers in {-1,0,1}), labels.csv, masks.csv. No edges file.
void save_view(const PrivatizedView& view, const RedactedGraph& meta, const std::filesystem::path& dir);
PrivatizedView load_view(const std::filesystem::path& dir, RedactedGraph* meta = nullptr);

}  // namespace reconxf
