#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "reconxf/common.hpp"
#include "reconxf/graph.hpp"

namespace reconxf {

enum class Activation { Relu, Identity };
Activation parse_activation(const std::string& text);

/// Two-layer GCN weights: logits = N * act(N * X * W1) * W2.
struct GcnParams {
  Matrix W1;  // d x hidden
  Matrix W2;  // hidden x c
  Activation activation = Activation::Relu;

  int in_dim() const { return static_cast<int>(W1.rows()); }
  int hidden_dim() const { return static_cast<int>(W1.cols()); }
  int out_dim() const { return static_cast<int>(W2.cols()); }
  void validate() const;
};

/// Glorot-uniform initialization.
GcnParams init_gcn(int in_dim, int hidden_dim, int out_dim, std::uint64_t seed,
                   Activation activation = Activation::Relu);

/// Intermediate values of one forward pass, reused by the backward pass.
struct GcnCache {
  Matrix xw;      // X * W1
  Matrix pre;     // N * xw
  Matrix hidden;  // act(pre), dropout applied
  Matrix mixed;   // N * hidden or hidden * W2, depending on which is cheaper
  Matrix logits;
  Matrix dropout;  // per-entry keep scale, empty when dropout is off
  bool aggregate_first = false;
};

struct GcnGrads {
  Matrix W1;
  Matrix W2;
  Matrix X;
  Matrix adj;  // dL/dN, only filled when requested (dense N)
};

double activate(Activation act, double x);
double activate_grad(Activation act, double x);

GcnCache gcn_forward_cached(const NormAdj& adj, const Matrix& X, const GcnParams& params,
                            const Matrix* dropout_scale = nullptr);
Matrix gcn_forward(const NormAdj& adj, const Matrix& X, const GcnParams& params);

/// Gradients of L = <upstream, logits>. N must be symmetric. The adjacency
/// gradient is O(n^2) memory and only computed when want_adj is set.
GcnGrads gcn_backward(const NormAdj& adj, const Matrix& X, const GcnParams& params,
                      const GcnCache& cache, const Matrix& upstream, bool want_adj = false);
GcnGrads gcn_backward(const NormAdj& adj, const Matrix& X, const GcnParams& params,
                      const Matrix& upstream, bool want_adj = false);

Matrix softmax_rows(const Matrix& logits);
std::vector<int> argmax_rows(const Matrix& m);
double accuracy(const Matrix& logits, const std::vector<int>& labels, const std::vector<int>& nodes);

/// Mean cross-entropy over `nodes`; writes dL/dlogits into grad when given.
double cross_entropy(const Matrix& logits, const std::vector<int>& labels,
                     const std::vector<int>& nodes, Matrix* grad = nullptr);

struct AdamOptions {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// Adaptive-moment update for one parameter tensor. Weight decay is added to
/// the gradient (L2 form).
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}
  void step(Matrix& param, const Matrix& grad);
  const AdamOptions& options() const { return options_; }

 private:
  AdamOptions options_;
  Matrix m_;
  Matrix v_;
  long t_ = 0;
};

struct TrainSpec {
  double lr = 0.01;
  int epochs = 200;
  double weight_decay = 5e-4;
  int hidden_dim = 16;
  double dropout = 0.5;
  int patience = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainResult {
  GcnParams params;
  std::vector<double> train_loss;
  int best_epoch = -1;
  double best_val_accuracy = 0.0;
};

/// Full-batch training on the train mask; keeps the parameters with the best
/// validation accuracy. Throws on a non-finite loss.
TrainResult train_gcn(const Graph& graph, const TrainSpec& spec);

void save_params(const GcnParams& params, const std::filesystem::path& path);
GcnParams load_params(const std::filesystem::path& path);

}  // namespace reconxf
