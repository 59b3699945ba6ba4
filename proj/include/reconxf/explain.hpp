#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "reconxf/common.hpp"
#include "reconxf/gnn.hpp"
#include "reconxf/graph.hpp"

namespace reconxf {

enum class ExplainerKind { Grad, GradInput, GLime };

std::string to_string(ExplainerKind kind);
ExplainerKind parse_explainer(const std::string& text);

struct ExplanationMatrix {
  Matrix E;  // n x d importance scores
  ExplainerKind kind = ExplainerKind::Grad;
  std::optional<Matrix> hardened;  // n x d 0/1 mask
  double tau = 0.0;                // hardening fraction, 0 when soft

  /// The matrix an attacker consumes: the hardened mask when present.
  const Matrix& released() const { return hardened ? *hardened : E; }
};

struct GlimeSpec {
  int samples = 100;
  double keep_prob = 0.5;
  double kernel_width = 0.25;
  double ridge = 0.01;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Gradient of each node's predicted-class logit with respect to its own
/// feature row, through both message-passing layers of the target model.
ExplanationMatrix grad_explain(const GcnParams& model, const Graph& graph);

/// Features times their gradients.
ExplanationMatrix grad_input_explain(const GcnParams& model, const Graph& graph);

/// Weighted ridge fit of a local linear surrogate. `response` maps a binary
/// keep-mask z (length d) to the model output; returns the slope vector.
Vector glime_fit(const std::function<double(const Vector&)>& response, int d,
                 const GlimeSpec& spec, Rng& rng);

/// Per node: mask that node's feature row, record the probability of its
/// originally predicted class and fit glime_fit on the samples.
ExplanationMatrix glime_explain(const GcnParams& model, const Graph& graph, const GlimeSpec& spec);

/// Keeps the ceil(tau * d) largest |score| entries per row as ones; ties go
/// to the lower feature index.
ExplanationMatrix harden(const ExplanationMatrix& explanation, double tau);

/// explanation.csv (n x d scores) plus explanation.json (kind, tau, spec) and,
/// when hardened, mask.csv.
void save_explanation(const ExplanationMatrix& explanation, const std::filesystem::path& dir,
                      const std::optional<GlimeSpec>& spec = std::nullopt);
ExplanationMatrix load_explanation(const std::filesystem::path& dir);

}  // namespace reconxf
