#include "reconxf/explain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "reconxf/csv.hpp"

namespace reconxf {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(ExplainerKind kind) {
  switch (kind) {
    case ExplainerKind::Grad:
      return "grad";
    case ExplainerKind::GradInput:
      return "gradinput";
    case ExplainerKind::GLime:
      return "glime";
  }
  return "grad";
}

ExplainerKind parse_explainer(const std::string& text) {
  if (text == "grad") return ExplainerKind::Grad;
  if (text == "gradinput" || text == "grad-i" || text == "grad_input") return ExplainerKind::GradInput;
  if (text == "glime") return ExplainerKind::GLime;
  throw Error("unknown explainer '" + text + "'");
}

void GlimeSpec::validate() const {
  if (samples < 10) throw Error("GLime needs at least 10 samples per node");
  if (!(keep_prob > 0.0 && keep_prob < 1.0)) throw Error("GLime keep probability must lie in (0, 1)");
  if (!(kernel_width > 0.0)) throw Error("GLime kernel width must be positive");
  if (!(ridge > 0.0)) throw Error("GLime ridge strength must be positive");
}

namespace {

struct TargetPass {
  SparseMatrix adj;
  Matrix pre;
  Matrix hidden;
  Matrix logits;
  std::vector<int> predicted;
};

TargetPass run_target(const GcnParams& model, const Graph& graph) {
  if (model.in_dim() != graph.d) throw Error("explainer: model input dimension does not match graph");
  TargetPass pass;
  const NormAdj norm = normalize_adjacency(graph.A);
  pass.adj = norm.sparse();
  const GcnCache cache = gcn_forward_cached(norm, graph.X, model);
  pass.pre = cache.pre;
  pass.hidden = cache.hidden;
  pass.logits = cache.logits;
  pass.predicted = argmax_rows(cache.logits);
  return pass;
}

}  // namespace

ExplanationMatrix grad_explain(const GcnParams& model, const Graph& graph) {
  const TargetPass pass = run_target(model, graph);
  const int h = model.hidden_dim();
  // d logit_{i,c} / d X_i = W1 * sum_k N_ik N_ki act'(pre_k) (.) W2[:, c]
  Matrix v = Matrix::Zero(graph.n, h);
  for (int i = 0; i < graph.n; ++i) {
    for (SparseMatrix::InnerIterator it(pass.adj, i); it; ++it) {
      const auto k = it.row();
      const double w = it.value() * it.value();
      for (int t = 0; t < h; ++t) v(i, t) += w * activate_grad(model.activation, pass.pre(k, t));
    }
    v.row(i).array() *= model.W2.col(pass.predicted[i]).transpose().array();
  }
  ExplanationMatrix out;
  out.kind = ExplainerKind::Grad;
  out.E = v * model.W1.transpose();
  return out;
}

ExplanationMatrix grad_input_explain(const GcnParams& model, const Graph& graph) {
  ExplanationMatrix out = grad_explain(model, graph);
  out.E = graph.X.cwiseProduct(out.E);
  out.kind = ExplainerKind::GradInput;
  return out;
}

Vector glime_fit(const std::function<double(const Vector&)>& response, int d,
                 const GlimeSpec& spec, Rng& rng) {
  spec.validate();
  const int s = spec.samples;
  Matrix Z(s, d);
  Vector p(s);
  Vector w(s);
  std::bernoulli_distribution keep(spec.keep_prob);
  const double width2 = spec.kernel_width * spec.kernel_width;
  for (int k = 0; k < s; ++k) {
    Vector z(d);
    int ones = 0;
    for (int j = 0; j < d; ++j) {
      z[j] = keep(rng) ? 1.0 : 0.0;
      ones += z[j] != 0.0;
    }
    // cos(z, 1) = |z| / sqrt(|z| d) for a 0/1 vector.
    const double cosine = ones > 0 ? std::sqrt(static_cast<double>(ones) / d) : 0.0;
    const double dist = 1.0 - cosine;
    w[k] = std::exp(-dist * dist / width2);
    p[k] = response(z);
    Z.row(k) = z.transpose();
  }
  bool degenerate = true;
  for (int k = 1; k < s && degenerate; ++k) degenerate = Z.row(k) == Z.row(0);
  if (degenerate) throw Error("glime_fit: all perturbation masks are identical; increase samples");

  // Weighted centering removes the (unpenalized) intercept.
  const double wsum = w.sum();
  const Eigen::RowVectorXd z_mean = (w.transpose() * Z) / wsum;
  const double p_mean = w.dot(p) / wsum;
  const Vector root = w.array().sqrt();
  const Matrix A = root.asDiagonal() * (Z.rowwise() - z_mean);
  const Vector b = root.array() * (p.array() - p_mean);
  if (d <= s) {
    Matrix gram = A.transpose() * A;
    gram.diagonal().array() += spec.ridge;
    return gram.ldlt().solve(A.transpose() * b);
  }
  Matrix gram = A * A.transpose();
  gram.diagonal().array() += spec.ridge;
  return A.transpose() * gram.ldlt().solve(b);
}

ExplanationMatrix glime_explain(const GcnParams& model, const Graph& graph, const GlimeSpec& spec) {
  spec.validate();
  const TargetPass pass = run_target(model, graph);
  const int h = model.hidden_dim();
  ExplanationMatrix out;
  out.kind = ExplainerKind::GLime;
  out.E = Matrix::Zero(graph.n, graph.d);

  for (int i = 0; i < graph.n; ++i) {
    const int target = pass.predicted[i];
    std::vector<int> nonzero;
    for (int j = 0; j < graph.d; ++j) {
      if (graph.X(i, j) != 0.0) nonzero.push_back(j);
    }
    std::vector<std::pair<int, double>> nbrs;  // (k, N_ki), self included
    for (SparseMatrix::InnerIterator it(pass.adj, i); it; ++it) {
      nbrs.emplace_back(static_cast<int>(it.row()), it.value());
    }
    // Masking only touches row i, so only the hidden rows of i's neighbors
    // (and i itself) change.
    auto response = [&](const Vector& z) {
      Eigen::RowVectorXd delta = Eigen::RowVectorXd::Zero(h);
      for (int j : nonzero) {
        if (z[j] == 0.0) delta -= graph.X(i, j) * model.W1.row(j);
      }
      Eigen::RowVectorXd logit = pass.logits.row(i);
      for (const auto& [k, weight] : nbrs) {
        Eigen::RowVectorXd changed(h);
        for (int t = 0; t < h; ++t) {
          changed[t] = activate(model.activation, pass.pre(k, t) + weight * delta[t]) - pass.hidden(k, t);
        }
        logit += weight * changed * model.W2;
      }
      const double mx = logit.maxCoeff();
      const Eigen::RowVectorXd e = (logit.array() - mx).exp();
      return e[target] / e.sum();
    };
    Rng rng = make_rng(spec.seed, static_cast<std::uint64_t>(i));
    out.E.row(i) = glime_fit(response, graph.d, spec, rng).transpose();
  }
  return out;
}

ExplanationMatrix harden(const ExplanationMatrix& explanation, double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw Error("harden: tau must lie in (0, 1]");
  const Matrix& E = explanation.E;
  const auto d = static_cast<std::size_t>(E.cols());
  const std::size_t keep = std::max<std::size_t>(1, fraction_count(tau, d));
  ExplanationMatrix out = explanation;
  out.tau = tau;
  Matrix mask = Matrix::Zero(E.rows(), E.cols());
  std::vector<int> order(d);
  for (Eigen::Index i = 0; i < E.rows(); ++i) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return std::abs(E(i, a)) > std::abs(E(i, b));
    });
    for (std::size_t t = 0; t < keep; ++t) mask(i, order[t]) = 1.0;
  }
  out.hardened = std::move(mask);
  return out;
}

void save_explanation(const ExplanationMatrix& explanation, const fs::path& dir,
                      const std::optional<GlimeSpec>& spec) {
  fs::create_directories(dir);
  json meta;
  meta["kind"] = to_string(explanation.kind);
  meta["n"] = explanation.E.rows();
  meta["d"] = explanation.E.cols();
  meta["hardened"] = explanation.hardened.has_value();
  meta["tau"] = explanation.tau;
  if (spec) {
    meta["glime"] = {{"samples", spec->samples},
                     {"keep_prob", spec->keep_prob},
                     {"kernel_width", spec->kernel_width},
                     {"ridge", spec->ridge},
                     {"seed", spec->seed}};
  }
  write_text_file(dir / "explanation.json", meta.dump(2) + "\n");
  write_matrix_csv(dir / "explanation.csv", explanation.E);
  if (explanation.hardened) write_matrix_csv(dir / "mask.csv", *explanation.hardened);
}

ExplanationMatrix load_explanation(const fs::path& dir) {
  const fs::path meta_path = dir / "explanation.json";
  std::ifstream in(meta_path);
  if (!in) throw Error("missing file " + meta_path.string());
  ExplanationMatrix out;
  bool hardened = false;
  try {
    const json meta = json::parse(in);
    out.kind = parse_explainer(meta.at("kind").get<std::string>());
    hardened = meta.value("hardened", false);
    out.tau = meta.value("tau", 0.0);
  } catch (const json::exception& e) {
    throw Error(meta_path.string() + ": " + e.what());
  }
  out.E = read_matrix_csv(dir / "explanation.csv");
  if (!out.E.allFinite()) throw Error((dir / "explanation.csv").string() + ": non-finite score");
  if (hardened) {
    out.hardened = read_matrix_csv(dir / "mask.csv");
    if (out.hardened->rows() != out.E.rows() || out.hardened->cols() != out.E.cols()) {
      throw Error((dir / "mask.csv").string() + ": shape does not match explanation.csv");
    }
  }
  return out;
}

}  // namespace reconxf
