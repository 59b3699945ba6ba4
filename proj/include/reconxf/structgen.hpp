#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "reconxf/common.hpp"
#include "reconxf/gnn.hpp"
#include "reconxf/graph.hpp"

namespace reconxf {

/// Dense non-negative symmetric matrix of edge scores.
struct EstimatedAdjacency {
  Matrix values;

  int size() const { return static_cast<int>(values.rows()); }
  /// Throws unless square, finite, symmetric within tol and non-negative.
  void validate(double tol = 1e-9) const;
};

/// Value written into A_raw for non-kNN entries so that phi(floor) < 1e-6.
inline constexpr double kFullParamFloor = -14.0;

/// Non-negativity map: x + 1 for x > 0, exp(x) otherwise.
double fp_phi(double x);
double fp_phi_grad(double x);

class FullParamGenerator {
 public:
  explicit FullParamGenerator(Matrix raw);

  const Matrix& raw() const { return raw_; }
  Matrix& raw() { return raw_; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(raw_.size()); }

  EstimatedAdjacency forward() const;
  /// dL/dA_raw from dL/dA_est.
  Matrix backward(const Matrix& grad_est) const;

 private:
  Matrix raw_;
};

/// A_raw = phi^{-1}(kNN graph), with `floor` standing in for phi^{-1}(0).
FullParamGenerator fp_init(const Matrix& input, int k, Metric metric, double floor = kFullParamFloor);
EstimatedAdjacency fp_forward(const FullParamGenerator& generator);

/// Embedding generator: diagonal (elementwise) layers, cosine similarity,
/// per-row top-k sparsification, half-sum symmetrization, clamp at zero.
class MlpDiagGenerator {
 public:
  MlpDiagGenerator(int dim, int layers, int k_row, Activation activation = Activation::Relu);

  struct Cache {
    std::vector<Matrix> inputs;  // input of each layer
    std::vector<Matrix> linear;  // input (.) w_l, before activation
    Matrix embedding;
    Matrix unit;      // row-normalized embedding
    Vector norms;
    Matrix kept;      // 0/1 top-k selection of the similarity matrix
    Matrix combined;  // (S(.)K + (S(.)K)^T) / 2 before clamping
  };

  std::vector<Vector>& weights() { return weights_; }
  const std::vector<Vector>& weights() const { return weights_; }
  int k_row() const { return k_row_; }
  Activation activation() const { return activation_; }
  std::size_t parameter_count() const;

  Matrix embed(const Matrix& input, Cache* cache = nullptr) const;
  EstimatedAdjacency forward(const Matrix& input, Cache* cache = nullptr) const;
  /// Gradients for each weight vector. Dropped top-k entries pass no gradient.
  std::vector<Vector> backward(const Cache& cache, const Matrix& grad_est) const;

 private:
  std::vector<Vector> weights_;
  int k_row_;
  Activation activation_;
};

EstimatedAdjacency mlpdiag_forward(const MlpDiagGenerator& generator, const Matrix& input);

/// Keeps the k largest off-diagonal entries of each row (ties to the lower
/// column index); returns the 0/1 selection.
Matrix topk_rows_mask(const Matrix& scores, int k);

enum class Corruption { MaskBinary, GaussianAdd };

struct DaeSpec {
  Corruption corruption = Corruption::MaskBinary;
  double ones_fraction = 0.1;   // binary: probability a one-entry is masked
  double zeros_per_one = 5.0;   // binary: eta, masked zeros per masked one
  double noise_std = 0.1;       // continuous: additive Gaussian scale
  double mask_fraction = 0.1;   // continuous: rho
  int hidden_dim = 32;

  void validate() const;
};

struct DaeCorruption {
  Matrix input;  // corrupted features fed to the denoiser
  Matrix mask;   // 0/1 positions scored by the loss
  std::size_t masked = 0;
};

/// Samples the corruption mask and corrupted input. Throws for binary
/// corruption of an all-zero matrix.
DaeCorruption sample_corruption(const Matrix& target, const DaeSpec& spec, Rng& rng);

struct DaeLoss {
  double loss = 0.0;
  Matrix grad_adj;  // dL/dA_est
  GcnGrads grad_denoiser;
};

/// Masked binary cross-entropy on logits; grad is dL/dlogits.
double masked_bce(const Matrix& logits, const Matrix& target, const Matrix& mask, Matrix* grad);
double masked_mse(const Matrix& output, const Matrix& target, const Matrix& mask, Matrix* grad);

/// Denoising loss for a fixed corruption: a GCN over normalize(A_est)
/// reconstructs `target` from `corruption.input`, scored on the mask.
DaeLoss dae_loss(const EstimatedAdjacency& adj, const Matrix& target, const DaeCorruption& corruption,
                 Corruption kind, const GcnParams& denoiser);
/// Samples a corruption with `rng` and evaluates the loss.
DaeLoss dae_loss(const EstimatedAdjacency& adj, const Matrix& target, const DaeSpec& spec,
                 const GcnParams& denoiser, Rng& rng);

enum class GeneratorKind { FullParam, MlpDiag };
std::string to_string(GeneratorKind kind);
GeneratorKind parse_generator(const std::string& text);

struct GeneratorOptions {
  GeneratorKind kind = GeneratorKind::FullParam;
  int knn_k = 10;
  Metric knn_metric = Metric::Cosine;
  double fp_floor = kFullParamFloor;
  int mlp_layers = 2;
  int mlp_k_row = 20;
  Activation mlp_activation = Activation::Relu;
};

/// A generator bound to its input matrix and its own optimizer state.
class AdjacencyGenerator {
 public:
  AdjacencyGenerator(const Matrix& input, const GeneratorOptions& options, const AdamOptions& adam);

  const EstimatedAdjacency& forward();
  void backward(const Matrix& grad_est);
  void step();
  std::size_t parameter_count() const;
  GeneratorKind kind() const { return options_.kind; }

 private:
  GeneratorOptions options_;
  Matrix input_;
  std::variant<FullParamGenerator, MlpDiagGenerator> generator_;
  MlpDiagGenerator::Cache cache_;
  EstimatedAdjacency current_;
  Matrix grad_raw_;
  std::vector<Vector> grad_weights_;
  std::vector<Adam> optimizers_;
};

/// Dense CSV, or a scored edge list "u,v,score" of the top `fraction` of
/// upper-triangle pairs.
void save_adjacency_dense(const EstimatedAdjacency& adj, const std::filesystem::path& path);
void save_adjacency_edges(const EstimatedAdjacency& adj, double fraction, const std::filesystem::path& path);
/// Reads either format (detected from the column count).
EstimatedAdjacency load_adjacency(const std::filesystem::path& path, int n);

}  // namespace reconxf
