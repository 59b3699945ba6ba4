#include "reconxf/gnn.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "reconxf/csv.hpp"

namespace reconxf {

Activation parse_activation(const std::string& text) {
  if (text == "relu") return Activation::Relu;
  if (text == "identity") return Activation::Identity;
  throw Error("unknown activation '" + text + "'");
}

void GcnParams::validate() const {
  if (W1.cols() != W2.rows()) throw Error("GCN weights: W1 columns must equal W2 rows");
  if (!W1.allFinite() || !W2.allFinite()) throw Error("GCN weights contain non-finite values");
}

GcnParams init_gcn(int in_dim, int hidden_dim, int out_dim, std::uint64_t seed,
                   Activation activation) {
  Rng rng = make_rng(seed, 7);
  auto glorot = [&](int rows, int cols) {
    const double limit = std::sqrt(6.0 / (rows + cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix w(rows, cols);
    for (int j = 0; j < cols; ++j) {
      for (int i = 0; i < rows; ++i) w(i, j) = dist(rng);
    }
    return w;
  };
  GcnParams p;
  p.W1 = glorot(in_dim, hidden_dim);
  p.W2 = glorot(hidden_dim, out_dim);
  p.activation = activation;
  return p;
}

double activate(Activation act, double x) {
  return act == Activation::Relu ? (x > 0.0 ? x : 0.0) : x;
}

double activate_grad(Activation act, double x) {
  return act == Activation::Relu ? (x > 0.0 ? 1.0 : 0.0) : 1.0;
}

GcnCache gcn_forward_cached(const NormAdj& adj, const Matrix& X, const GcnParams& params,
                            const Matrix* dropout_scale) {
  if (X.cols() != params.in_dim()) throw Error("gcn_forward: feature dimension does not match W1");
  if (adj.size() != X.rows()) throw Error("gcn_forward: adjacency size does not match node count");
  if (params.W1.cols() != params.W2.rows()) throw Error("gcn_forward: W1/W2 shape mismatch");
  GcnCache cache;
  cache.xw = X * params.W1;
  cache.pre = adj.apply(cache.xw);
  cache.hidden = cache.pre.unaryExpr([&](double v) { return activate(params.activation, v); });
  if (dropout_scale) {
    cache.dropout = *dropout_scale;
    cache.hidden.array() *= dropout_scale->array();
  }
  // N * H * W2 associates either way; pick the cheaper order.
  cache.aggregate_first = params.out_dim() > params.hidden_dim();
  if (cache.aggregate_first) {
    cache.mixed = adj.apply(cache.hidden);
    cache.logits = cache.mixed * params.W2;
  } else {
    cache.mixed = cache.hidden * params.W2;
    cache.logits = adj.apply(cache.mixed);
  }
  return cache;
}

Matrix gcn_forward(const NormAdj& adj, const Matrix& X, const GcnParams& params) {
  return gcn_forward_cached(adj, X, params).logits;
}

GcnGrads gcn_backward(const NormAdj& adj, const Matrix& X, const GcnParams& params,
                      const GcnCache& cache, const Matrix& upstream, bool want_adj) {
  if (upstream.rows() != cache.logits.rows() || upstream.cols() != cache.logits.cols()) {
    throw Error("gcn_backward: upstream shape does not match logits");
  }
  if (want_adj && !adj.is_dense()) throw Error("gcn_backward: adjacency gradient needs a dense N");
  GcnGrads g;
  Matrix grad_hidden;
  if (cache.aggregate_first) {
    // logits = (N H) W2
    g.W2 = cache.mixed.transpose() * upstream;
    const Matrix grad_mixed = upstream * params.W2.transpose();
    grad_hidden = adj.apply(grad_mixed);
    if (want_adj) g.adj = grad_mixed * cache.hidden.transpose();
  } else {
    // logits = N (H W2)
    const Matrix n_up = adj.apply(upstream);
    g.W2 = cache.hidden.transpose() * n_up;
    grad_hidden = n_up * params.W2.transpose();
    if (want_adj) g.adj = upstream * cache.mixed.transpose();
  }
  if (cache.dropout.size() > 0) grad_hidden.array() *= cache.dropout.array();
  Matrix grad_pre = grad_hidden;
  for (Eigen::Index j = 0; j < grad_pre.cols(); ++j) {
    for (Eigen::Index i = 0; i < grad_pre.rows(); ++i) {
      grad_pre(i, j) *= activate_grad(params.activation, cache.pre(i, j));
    }
  }
  const Matrix grad_xw = adj.apply(grad_pre);
  g.W1 = X.transpose() * grad_xw;
  g.X = grad_xw * params.W1.transpose();
  if (want_adj) g.adj.noalias() += grad_pre * cache.xw.transpose();
  return g;
}

GcnGrads gcn_backward(const NormAdj& adj, const Matrix& X, const GcnParams& params,
                      const Matrix& upstream, bool want_adj) {
  return gcn_backward(adj, X, params, gcn_forward_cached(adj, X, params), upstream, want_adj);
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    const auto e = (logits.row(i).array() - mx).exp();
    out.row(i) = e / e.sum();
  }
  return out;
}

std::vector<int> argmax_rows(const Matrix& m) {
  std::vector<int> out(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Eigen::Index best = 0;
    m.row(i).maxCoeff(&best);
    out[i] = static_cast<int>(best);
  }
  return out;
}

double accuracy(const Matrix& logits, const std::vector<int>& labels, const std::vector<int>& nodes) {
  if (nodes.empty()) return 0.0;
  const auto pred = argmax_rows(logits);
  int correct = 0;
  for (int i : nodes) correct += pred[i] == labels[i];
  return static_cast<double>(correct) / nodes.size();
}

double cross_entropy(const Matrix& logits, const std::vector<int>& labels,
                     const std::vector<int>& nodes, Matrix* grad) {
  if (nodes.empty()) throw Error("cross_entropy: empty node set");
  if (grad) *grad = Matrix::Zero(logits.rows(), logits.cols());
  double loss = 0.0;
  const double inv = 1.0 / nodes.size();
  for (int i : nodes) {
    const double mx = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(i).array() - mx).exp();
    const double sum = e.sum();
    loss -= (logits(i, labels[i]) - mx - std::log(sum)) * inv;
    if (grad) {
      grad->row(i) = e / sum * inv;
      (*grad)(i, labels[i]) -= inv;
    }
  }
  return loss;
}

void Adam::step(Matrix& param, const Matrix& grad) {
  if (m_.size() == 0) {
    m_ = Matrix::Zero(param.rows(), param.cols());
    v_ = Matrix::Zero(param.rows(), param.cols());
  }
  ++t_;
  const auto& o = options_;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(t_));
  const double step = o.lr * std::sqrt(c2) / c1;
  const double eps_hat = o.eps * std::sqrt(c2);
  if (o.weight_decay != 0.0) {
    const Matrix g = grad + o.weight_decay * param;
    m_ = o.beta1 * m_ + (1.0 - o.beta1) * g;
    v_ = o.beta2 * v_ + (1.0 - o.beta2) * g.cwiseAbs2();
  } else {
    m_ = o.beta1 * m_ + (1.0 - o.beta1) * grad;
    v_ = o.beta2 * v_ + (1.0 - o.beta2) * grad.cwiseAbs2();
  }
  param.array() -= step * m_.array() / (v_.array().sqrt() + eps_hat);
}

void TrainSpec::validate() const {
  if (!(lr > 0.0)) throw Error("learning rate must be positive");
  if (epochs < 0) throw Error("epochs must be non-negative");
  if (hidden_dim < 1) throw Error("hidden dimension must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error("dropout must lie in [0, 1)");
}

TrainResult train_gcn(const Graph& graph, const TrainSpec& spec) {
  spec.validate();
  const auto train = graph.nodes_in(Split::Train);
  const auto val = graph.nodes_in(Split::Val);
  if (train.empty()) throw Error("train_gcn: empty train mask");

  const NormAdj adj = normalize_adjacency(graph.A);
  TrainResult result;
  GcnParams params = init_gcn(graph.d, spec.hidden_dim, graph.c, spec.seed);
  result.params = params;
  Adam opt_w1({spec.lr, 0.9, 0.999, 1e-8, spec.weight_decay});
  Adam opt_w2({spec.lr, 0.9, 0.999, 1e-8, spec.weight_decay});

  Rng drop_rng = make_rng(spec.seed, 11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double keep = 1.0 - spec.dropout;
  double best_val = -1.0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  int since_best = 0;

  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    Matrix drop;
    if (spec.dropout > 0.0) {
      drop.resize(graph.n, spec.hidden_dim);
      for (Eigen::Index k = 0; k < drop.size(); ++k) {
        drop.data()[k] = unit(drop_rng) < keep ? 1.0 / keep : 0.0;
      }
    }
    const GcnCache cache = gcn_forward_cached(adj, graph.X, params, spec.dropout > 0.0 ? &drop : nullptr);
    Matrix upstream;
    const double loss = cross_entropy(cache.logits, graph.Y, train, &upstream);
    if (!std::isfinite(loss)) {
      throw Error("train_gcn: non-finite training loss at epoch " + std::to_string(epoch));
    }
    result.train_loss.push_back(loss);
    const GcnGrads g = gcn_backward(adj, graph.X, params, cache, upstream);
    opt_w1.step(params.W1, g.W1);
    opt_w2.step(params.W2, g.W2);

    if (val.empty()) {
      result.params = params;
      result.best_epoch = epoch;
      continue;
    }
    const Matrix logits = gcn_forward(adj, graph.X, params);
    const double acc = accuracy(logits, graph.Y, val);
    const double val_loss = cross_entropy(logits, graph.Y, val);
    if (acc > best_val || (acc == best_val && val_loss < best_val_loss)) {
      best_val = acc;
      best_val_loss = val_loss;
      result.params = params;
      result.best_epoch = epoch;
      result.best_val_accuracy = acc;
      since_best = 0;
    } else if (++since_best >= spec.patience) {
      break;
    }
  }
  return result;
}

namespace {
void write_block(std::ostringstream& out, const char* name, const Matrix& m) {
  out << name << ',' << m.rows() << ',' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}
}  // namespace

void save_params(const GcnParams& params, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "# reconxf gcn parameters\n";
  out << "activation," << (params.activation == Activation::Relu ? "relu" : "identity") << '\n';
  write_block(out, "W1", params.W1);
  write_block(out, "W2", params.W2);
  write_text_file(path, out.str());
}

GcnParams load_params(const std::filesystem::path& path) {
  GcnParams p;
  Matrix* current = nullptr;
  Eigen::Index row = 0;
  bool have_w1 = false;
  bool have_w2 = false;
  for_each_csv_row(path, [&](const CsvRow& r) {
    if (current && row < current->rows()) {
      r.expect_fields(current->cols());
      for (Eigen::Index j = 0; j < current->cols(); ++j) (*current)(row, j) = r.get_double(j);
      ++row;
      return;
    }
    const std::string& tag = r.field(0);
    if (tag == "activation") {
      r.expect_fields(2);
      if (r.field(1) == "relu") {
        p.activation = Activation::Relu;
      } else if (r.field(1) == "identity") {
        p.activation = Activation::Identity;
      } else {
        r.fail("unknown activation");
      }
    } else if (tag == "W1" || tag == "W2") {
      r.expect_fields(3);
      current = tag == "W1" ? &p.W1 : &p.W2;
      (tag == "W1" ? have_w1 : have_w2) = true;
      current->resize(r.get_int(1), r.get_int(2));
      row = 0;
    } else {
      r.fail("unexpected line in parameter file");
    }
  });
  if (!have_w1 || !have_w2 || (current && row != current->rows())) {
    throw Error(path.string() + ": incomplete parameter file");
  }
  p.validate();
  return p;
}

}  // namespace reconxf
