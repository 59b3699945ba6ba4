#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "reconxf/common.hpp"
#include "reconxf/explain.hpp"
#include "reconxf/gnn.hpp"
#include "reconxf/graph.hpp"
#include "reconxf/privacy.hpp"
#include "reconxf/structgen.hpp"

namespace reconxf {

/// ReconXF: features and explanations. ReconX: explanations only.
/// GSEF and GSE are the same two shapes without any denoising; SlapsFP learns
/// structure from the privatized features alone.
enum class Variant { ReconXF, ReconX, GSEF, GSE, SlapsFP };

std::string to_string(Variant variant);
Variant parse_variant(const std::string& text);

struct AttackConfig {
  Variant variant = Variant::ReconXF;
  bool x_branch = true;  // generator + DAE on the privatized features
  bool e_branch = true;  // generator + DAE on the explanations
  GeneratorOptions x_generator;
  GeneratorOptions e_generator;
  DaeSpec x_dae;
  DaeSpec e_dae;
  double fuse_lambda = 0.5;
  int h_x = 0;
  int h_y = 0;
  std::optional<double> topk;
  int warmup_epochs = 200;
  int joint_epochs = 1000;
  double lr = 0.01;
  double classifier_weight_decay = 5e-4;
  int classifier_hidden = 32;
  double classifier_dropout = 0.5;
  bool rectify = true;
  bool forward_correction = true;
  std::optional<double> harden_tau;  // harden E_X before use
  std::uint64_t seed = 0;

  /// Default configuration of a variant: branch layout and, for the
  /// non-denoising baselines, rectification, correction and hops switched off.
  static AttackConfig for_variant(Variant variant);
  /// Applies the variant's fixed switches on top of user-set fields.
  AttackConfig effective() const;
  void validate() const;
};

/// One epoch's loss components; absent branches contribute exactly 0.
struct LossBreakdown {
  double l_dae_x = 0.0;
  double l_dae_ex = 0.0;
  double l_ce = 0.0;
  double l_total = 0.0;
};

struct AttackResult {
  EstimatedAdjacency A_hat;
  std::vector<LossBreakdown> curves;  // one entry per epoch, warmup first
  LossBreakdown final_loss;
  double runtime_s = 0.0;
  AttackConfig config;
};

/// N^h F with N the renormalized adjacency; h = 0 returns F.
Matrix h_hop_aggregate(const EstimatedAdjacency& adj, const Matrix& features, int h);

/// Keeps off-diagonal entries >= T, where T is the ceil(k * n * (n - 1))-th
/// largest off-diagonal value; every entry tied with T survives. The
/// diagonal is left unchanged.
EstimatedAdjacency topk_sparsify(const EstimatedAdjacency& adj, double k);

/// lambda * A_x + (1 - lambda) * A_e.
EstimatedAdjacency fuse(const EstimatedAdjacency& a_x, const EstimatedAdjacency& a_e, double lambda);

/// Inputs of the denoised classifier apart from the adjacency.
struct ClassifierData {
  Matrix features;           // already rectified and scaled
  std::vector<int> labels;   // privatized labels
  std::vector<int> train;    // nodes whose labels enter the loss
  Matrix transition;         // c x c forward-correction matrix, empty = none
  int c = 0;
  int h_x = 0;
  int h_y = 0;
  std::optional<double> topk;
};

struct ClassificationLoss {
  double loss = 0.0;
  Matrix grad_adj;  // dL/dA_est, through sparsification and normalization
  Matrix grad_W1;
  Matrix grad_W2;
};

/// GCN over the (sparsified) estimated adjacency with h_x-hop input
/// aggregation, optional forward correction, and cross-entropy against
/// h_y-hop aggregated one-hot privatized labels of the train nodes.
ClassificationLoss denoised_classification_loss(const EstimatedAdjacency& adj, const ClassifierData& data,
                                                const GcnParams& clf, const Matrix* dropout_scale = nullptr);

/// Builds the classifier inputs from the privatized view and calls the
/// general form, using the rectified privatized features.
ClassificationLoss denoised_classification_loss(const EstimatedAdjacency& adj, const PrivatizedView& view,
                                                const RedactedGraph& meta, const GcnParams& clf,
                                                const AttackConfig& config);

/// Scales a matrix to unit root-mean-square; an all-zero matrix is returned
/// unchanged.
Matrix unit_rms(const Matrix& m);

/// Centers every column and scales it to unit variance; constant columns
/// become zero.
Matrix standardize_columns(const Matrix& m);

/// Two-phase optimization: DAE losses only for warmup_epochs, then the joint
/// objective. Never sees edges: the graph argument carries no adjacency.
AttackResult run_attack(const RedactedGraph& meta, const ExplanationMatrix& explanation,
                        const PrivatizedView& view, const AttackConfig& config);

}  // namespace reconxf
