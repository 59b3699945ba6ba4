#include "reconxf/attack.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace reconxf {

std::string to_string(Variant variant) {
  switch (variant) {
    case Variant::ReconXF:
      return "reconxf";
    case Variant::ReconX:
      return "reconx";
    case Variant::GSEF:
      return "gsef";
    case Variant::GSE:
      return "gse";
    case Variant::SlapsFP:
      return "slapsfp";
  }
  return "reconxf";
}

Variant parse_variant(const std::string& text) {
  std::string lower = text;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (lower == "reconxf") return Variant::ReconXF;
  if (lower == "reconx") return Variant::ReconX;
  if (lower == "gsef") return Variant::GSEF;
  if (lower == "gse") return Variant::GSE;
  if (lower == "slapsfp" || lower == "slaps") return Variant::SlapsFP;
  throw Error("unknown attack variant '" + text + "'");
}

namespace {

bool denoises(Variant v) { return v == Variant::ReconXF || v == Variant::ReconX; }

}  // namespace

AttackConfig AttackConfig::for_variant(Variant variant) {
  AttackConfig config;
  config.variant = variant;
  config.x_branch = variant != Variant::ReconX && variant != Variant::GSE;
  config.e_branch = variant != Variant::SlapsFP;
  config.x_dae.corruption = Corruption::GaussianAdd;
  config.e_dae.corruption = Corruption::GaussianAdd;
  return config.effective();
}

AttackConfig AttackConfig::effective() const {
  AttackConfig out = *this;
  if (!denoises(variant)) {
    out.rectify = false;
    out.forward_correction = false;
    out.h_x = 0;
    out.h_y = 0;
  }
  if (out.harden_tau) out.e_dae.corruption = Corruption::MaskBinary;
  return out;
}

void AttackConfig::validate() const {
  if (!x_branch && !e_branch) throw Error("attack config: at least one generator branch is required");
  if ((variant == Variant::ReconX || variant == Variant::GSE) && x_branch) {
    throw Error("attack config: " + to_string(variant) + " has no feature branch");
  }
  if (variant == Variant::SlapsFP && e_branch) throw Error("attack config: slapsfp has no explanation branch");
  if (!(fuse_lambda >= 0.0 && fuse_lambda <= 1.0)) throw Error("attack config: fuse lambda must lie in [0, 1]");
  if (h_x < 0 || h_y < 0) throw Error("attack config: hop counts must be non-negative");
  if (topk && !(*topk > 0.0 && *topk <= 1.0)) throw Error("attack config: topk must lie in (0, 1]");
  if (warmup_epochs < 0 || joint_epochs < 0) throw Error("attack config: epoch counts must be non-negative");
  if (!(lr > 0.0)) throw Error("attack config: learning rate must be positive");
  if (classifier_hidden < 1) throw Error("attack config: classifier hidden size must be positive");
  if (!(classifier_dropout >= 0.0 && classifier_dropout < 1.0)) {
    throw Error("attack config: classifier dropout must lie in [0, 1)");
  }
  if (harden_tau && !(*harden_tau > 0.0 && *harden_tau <= 1.0)) throw Error("attack config: tau must lie in (0, 1]");
  if (x_branch) x_dae.validate();
  if (e_branch) e_dae.validate();
}

Matrix h_hop_aggregate(const EstimatedAdjacency& adj, const Matrix& features, int h) {
  if (h < 0) throw Error("h_hop_aggregate: h must be non-negative");
  if (features.rows() != adj.size()) throw Error("h_hop_aggregate: feature rows do not match adjacency");
  if (h == 0) return features;
  const Matrix norm = normalize_dense(adj.values);
  Matrix out = features;
  for (int t = 0; t < h; ++t) out = norm * out;
  return out;
}

namespace {

// Off-diagonal selection of topk_sparsify as a 0/1 matrix (diagonal = 1).
Matrix topk_keep_mask(const Matrix& a, double k) {
  if (!(k > 0.0 && k <= 1.0)) throw Error("topk_sparsify: k must lie in (0, 1]");
  const auto n = a.rows();
  Matrix keep = Matrix::Identity(n, n);
  if (n < 2) return keep;
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(n * (n - 1)));
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i != j) values.push_back(a(i, j));
    }
  }
  const std::size_t count = std::max<std::size_t>(1, fraction_count(k, values.size()));
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(count - 1), values.end(),
                   std::greater<double>());
  const double threshold = values[count - 1];
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i != j && a(i, j) >= threshold) keep(i, j) = 1.0;
    }
  }
  return keep;
}

}  // namespace

EstimatedAdjacency topk_sparsify(const EstimatedAdjacency& adj, double k) {
  return EstimatedAdjacency{adj.values.cwiseProduct(topk_keep_mask(adj.values, k))};
}

EstimatedAdjacency fuse(const EstimatedAdjacency& a_x, const EstimatedAdjacency& a_e, double lambda) {
  if (a_x.values.rows() != a_e.values.rows() || a_x.values.cols() != a_e.values.cols()) {
    throw Error("fuse: adjacency shapes differ");
  }
  return EstimatedAdjacency{lambda * a_x.values + (1.0 - lambda) * a_e.values};
}

Matrix unit_rms(const Matrix& m) {
  if (m.size() == 0) return m;
  const double rms = std::sqrt(m.squaredNorm() / static_cast<double>(m.size()));
  return rms > 0.0 ? Matrix(m / rms) : m;
}

Matrix standardize_columns(const Matrix& m) {
  if (m.rows() == 0) return m;
  Matrix out = m.rowwise() - m.colwise().mean();
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const double sd = std::sqrt(out.col(j).squaredNorm() / static_cast<double>(out.rows()));
    if (sd > 1e-12) {
      out.col(j) /= sd;
    } else {
      out.col(j).setZero();
    }
  }
  return out;
}

ClassificationLoss denoised_classification_loss(const EstimatedAdjacency& adj, const ClassifierData& data,
                                                const GcnParams& clf, const Matrix* dropout_scale) {
  const int n = adj.size();
  if (data.train.empty()) throw Error("denoised classification: empty train mask");
  if (data.features.rows() != n) throw Error("denoised classification: feature rows do not match adjacency");
  if (clf.in_dim() != data.features.cols() || clf.out_dim() != data.c) {
    throw Error("denoised classification: classifier shape does not match data");
  }
  if (data.h_x < 0 || data.h_y < 0) throw Error("denoised classification: hop counts must be non-negative");

  const Matrix keep = data.topk ? topk_keep_mask(adj.values, *data.topk) : Matrix();
  const Matrix sparse = data.topk ? Matrix(adj.values.cwiseProduct(keep)) : adj.values;
  const Matrix norm = normalize_dense(sparse);

  // First layer N * (N^{h_x} X) * W1, evaluated as N^{h_x + 1} (X W1).
  std::vector<Matrix> hops;
  hops.reserve(static_cast<std::size_t>(data.h_x) + 2);
  hops.push_back(data.features * clf.W1);
  for (int t = 0; t <= data.h_x; ++t) hops.push_back(norm * hops.back());
  const Matrix& pre = hops.back();
  Matrix hidden = pre.unaryExpr([&](double x) { return activate(clf.activation, x); });
  if (dropout_scale) hidden.array() *= dropout_scale->array();
  const Matrix projected = hidden * clf.W2;
  const Matrix logits = norm * projected;
  const Matrix probs = softmax_rows(logits);
  const bool corrected = data.transition.size() > 0;
  const Matrix q = corrected ? Matrix(probs * data.transition) : probs;

  // Targets: one-hot train labels, h_y hops, rows renormalized.
  std::vector<Matrix> label_hops;
  label_hops.push_back(Matrix::Zero(n, data.c));
  for (int i : data.train) {
    const int y = data.labels.at(static_cast<std::size_t>(i));
    if (y < 0 || y >= data.c) throw Error("denoised classification: label outside [0, c)");
    label_hops.back()(i, y) = 1.0;
  }
  for (int t = 0; t < data.h_y; ++t) label_hops.push_back(norm * label_hops.back());
  const Matrix& spread = label_hops.back();
  const Vector row_sum = spread.rowwise().sum();

  ClassificationLoss out;
  const double scale = 1.0 / static_cast<double>(data.train.size());
  Matrix grad_q = Matrix::Zero(n, data.c);
  Matrix grad_spread = Matrix::Zero(n, data.c);
  for (int i : data.train) {
    const double s = row_sum[i];
    if (!(s > 0.0)) throw Error("denoised classification: empty label distribution");
    Eigen::RowVectorXd target = spread.row(i) / s;
    Eigen::RowVectorXd grad_target(data.c);
    for (int j = 0; j < data.c; ++j) {
      const double qij = std::max(q(i, j), 1e-300);
      out.loss -= scale * target[j] * std::log(qij);
      grad_q(i, j) = -scale * target[j] / qij;
      grad_target[j] = -scale * std::log(qij);
    }
    // t = u / sum(u)
    grad_spread.row(i) = (grad_target.array() - grad_target.dot(target)).matrix() / s;
  }

  const Matrix grad_probs = corrected ? Matrix(grad_q * data.transition.transpose()) : grad_q;
  const Vector inner = grad_probs.cwiseProduct(probs).rowwise().sum();
  const Matrix grad_logits = probs.cwiseProduct(grad_probs.colwise() - inner);

  Matrix grad_norm = grad_logits * projected.transpose();
  const Matrix grad_projected = norm * grad_logits;
  out.grad_W2 = hidden.transpose() * grad_projected;
  Matrix grad_pre = grad_projected * clf.W2.transpose();
  if (dropout_scale) grad_pre.array() *= dropout_scale->array();
  for (Eigen::Index j = 0; j < grad_pre.cols(); ++j) {
    for (Eigen::Index i = 0; i < grad_pre.rows(); ++i) grad_pre(i, j) *= activate_grad(clf.activation, pre(i, j));
  }
  Matrix grad_hop = std::move(grad_pre);
  for (std::size_t t = hops.size() - 1; t > 0; --t) {
    grad_norm.noalias() += grad_hop * hops[t - 1].transpose();
    grad_hop = norm * grad_hop;
  }
  out.grad_W1 = data.features.transpose() * grad_hop;

  Matrix grad_label = std::move(grad_spread);
  for (std::size_t t = label_hops.size() - 1; t > 0; --t) {
    grad_norm.noalias() += grad_label * label_hops[t - 1].transpose();
    grad_label = norm * grad_label;
  }

  out.grad_adj = normalize_dense_backward(sparse, grad_norm);
  if (data.topk) out.grad_adj = out.grad_adj.cwiseProduct(keep);
  return out;
}

namespace {

ClassifierData classifier_data(const Matrix& features, const PrivatizedView& view, const RedactedGraph& meta,
                               const AttackConfig& config) {
  ClassifierData data;
  data.features = features;
  data.labels = view.Y_priv;
  data.train = meta.nodes_in(Split::Train);
  data.c = view.label_params.c;
  data.h_x = config.h_x;
  data.h_y = config.h_y;
  data.topk = config.topk;
  if (config.forward_correction) data.transition = rr_transition(view.label_params);
  return data;
}

Matrix feature_input(const PrivatizedView& view, const AttackConfig& config) {
  return unit_rms(config.rectify ? mb_rectify(view.X_enc, view.feature_params) : view.X_enc);
}

}  // namespace

ClassificationLoss denoised_classification_loss(const EstimatedAdjacency& adj, const PrivatizedView& view,
                                                const RedactedGraph& meta, const GcnParams& clf,
                                                const AttackConfig& config) {
  const AttackConfig eff = config.effective();
  return denoised_classification_loss(adj, classifier_data(feature_input(view, eff), view, meta, eff), clf);
}

namespace {

struct Branch {
  Matrix target;
  Corruption corruption;
  DaeSpec spec;
  std::optional<AdjacencyGenerator> generator;
  GcnParams denoiser;
  Adam opt_w1;
  Adam opt_w2;
  Rng rng;
};

void check_finite(double value, int epoch, const char* component) {
  if (!std::isfinite(value)) {
    throw Error(std::string("attack: non-finite ") + component + " at epoch " + std::to_string(epoch));
  }
}

Branch make_branch(const Matrix& target, const DaeSpec& spec, const GeneratorOptions& options,
                   const AdamOptions& adam, std::uint64_t seed, std::uint64_t stream) {
  Branch b{target, spec.corruption, spec, std::nullopt, {}, Adam(adam), Adam(adam), make_rng(seed, stream)};
  b.generator.emplace(target, options, adam);
  const int d = static_cast<int>(target.cols());
  b.denoiser = init_gcn(d, spec.hidden_dim, d, derive_seed(seed, stream + 1));
  return b;
}

// One DAE evaluation; stores dL/dA_branch in grad_adj and updates the denoiser.
double dae_step(Branch& b, const EstimatedAdjacency& adj, Matrix& grad_adj) {
  DaeLoss loss = dae_loss(adj, b.target, b.spec, b.denoiser, b.rng);
  grad_adj = std::move(loss.grad_adj);
  b.opt_w1.step(b.denoiser.W1, loss.grad_denoiser.W1);
  b.opt_w2.step(b.denoiser.W2, loss.grad_denoiser.W2);
  return loss.loss;
}

}  // namespace

AttackResult run_attack(const RedactedGraph& meta, const ExplanationMatrix& explanation,
                        const PrivatizedView& view, const AttackConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const AttackConfig eff = config.effective();
  eff.validate();
  const int n = meta.n;
  if (view.n() != n || static_cast<int>(view.Y_priv.size()) != n) {
    throw Error("attack: privatized view does not match graph size");
  }
  if (eff.e_branch && explanation.E.rows() != n) throw Error("attack: explanation rows do not match graph size");

  AdamOptions adam;
  adam.lr = eff.lr;
  const std::uint64_t seed = eff.seed;

  // The explanation as released: the hardened mask when requested.
  Matrix released;
  if (eff.e_branch) {
    if (eff.harden_tau) {
      released = harden(explanation, *eff.harden_tau).released();
    } else {
      released = standardize_columns(explanation.released());
    }
  }

  std::optional<Branch> x_branch;
  std::optional<Branch> e_branch;
  if (eff.x_branch) x_branch.emplace(make_branch(unit_rms(view.X_enc), eff.x_dae, eff.x_generator, adam, seed, 40));
  if (eff.e_branch) e_branch.emplace(make_branch(released, eff.e_dae, eff.e_generator, adam, seed, 50));

  // The classifier reads the denoised features when it has them, else the
  // explanations.
  const Matrix clf_features = eff.x_branch ? feature_input(view, eff) : released;
  const ClassifierData data = classifier_data(clf_features, view, meta, eff);
  GcnParams clf = init_gcn(static_cast<int>(clf_features.cols()), eff.classifier_hidden, data.c,
                           derive_seed(seed, 60));
  AdamOptions clf_adam = adam;
  clf_adam.weight_decay = eff.classifier_weight_decay;
  Adam opt_clf_w1(clf_adam);
  Adam opt_clf_w2(clf_adam);
  Rng dropout_rng = make_rng(seed, 61);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double lambda = eff.x_branch && eff.e_branch ? eff.fuse_lambda : (eff.x_branch ? 1.0 : 0.0);
  auto fused = [&](const EstimatedAdjacency* ax, const EstimatedAdjacency* ae) {
    if (ax && ae) return fuse(*ax, *ae, lambda);
    return ax ? *ax : *ae;
  };

  AttackResult result;
  result.config = eff;
  const int total = eff.warmup_epochs + eff.joint_epochs;
  result.curves.reserve(static_cast<std::size_t>(total));
  Matrix grad_x;
  Matrix grad_e;
  Matrix drop;
  for (int epoch = 0; epoch < total; ++epoch) {
    LossBreakdown lb;
    const EstimatedAdjacency* ax = x_branch ? &x_branch->generator->forward() : nullptr;
    const EstimatedAdjacency* ae = e_branch ? &e_branch->generator->forward() : nullptr;
    if (x_branch) {
      lb.l_dae_x = dae_step(*x_branch, *ax, grad_x);
      check_finite(lb.l_dae_x, epoch, "L_DAE_X");
    }
    if (e_branch) {
      lb.l_dae_ex = dae_step(*e_branch, *ae, grad_e);
      check_finite(lb.l_dae_ex, epoch, "L_DAE_EX");
    }
    if (epoch >= eff.warmup_epochs) {
      const EstimatedAdjacency adj = fused(ax, ae);
      const Matrix* scale = nullptr;
      if (eff.classifier_dropout > 0.0) {
        const double keep = 1.0 - eff.classifier_dropout;
        drop.resize(n, eff.classifier_hidden);
        for (Eigen::Index k = 0; k < drop.size(); ++k) drop.data()[k] = unit(dropout_rng) < keep ? 1.0 / keep : 0.0;
        scale = &drop;
      }
      const ClassificationLoss ce = denoised_classification_loss(adj, data, clf, scale);
      lb.l_ce = ce.loss;
      check_finite(lb.l_ce, epoch, "L_CE");
      opt_clf_w1.step(clf.W1, ce.grad_W1);
      opt_clf_w2.step(clf.W2, ce.grad_W2);
      if (x_branch) grad_x += lambda * ce.grad_adj;
      if (e_branch) grad_e += (1.0 - lambda) * ce.grad_adj;
    }
    lb.l_total = lb.l_dae_x + lb.l_dae_ex + lb.l_ce;
    if (x_branch) {
      x_branch->generator->backward(grad_x);
      x_branch->generator->step();
    }
    if (e_branch) {
      e_branch->generator->backward(grad_e);
      e_branch->generator->step();
    }
    result.curves.push_back(lb);
  }

  const EstimatedAdjacency* ax = x_branch ? &x_branch->generator->forward() : nullptr;
  const EstimatedAdjacency* ae = e_branch ? &e_branch->generator->forward() : nullptr;
  result.A_hat = fused(ax, ae);
  if (!result.curves.empty()) result.final_loss = result.curves.back();
  result.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace reconxf
