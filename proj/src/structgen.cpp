#include "reconxf/structgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "reconxf/csv.hpp"

namespace reconxf {

namespace fs = std::filesystem;

void EstimatedAdjacency::validate(double tol) const {
  if (values.rows() != values.cols()) throw Error("estimated adjacency must be square");
  if (!values.allFinite()) throw Error("estimated adjacency has non-finite entries");
  if ((values - values.transpose()).cwiseAbs().maxCoeff() > tol) {
    throw Error("estimated adjacency is not symmetric");
  }
  if (values.size() > 0 && values.minCoeff() < 0.0) throw Error("estimated adjacency has negative entries");
}

double fp_phi(double x) { return x > 0.0 ? x + 1.0 : std::exp(x); }
double fp_phi_grad(double x) { return x > 0.0 ? 1.0 : std::exp(x); }

FullParamGenerator::FullParamGenerator(Matrix raw) : raw_(std::move(raw)) {
  if (raw_.rows() != raw_.cols()) throw Error("FullParam: raw adjacency must be square");
  if (!raw_.allFinite()) throw Error("FullParam: raw adjacency must be finite");
}

EstimatedAdjacency FullParamGenerator::forward() const {
  const Matrix p = raw_.unaryExpr([](double x) { return fp_phi(x); });
  return EstimatedAdjacency{(p + p.transpose()) * 0.5};
}

Matrix FullParamGenerator::backward(const Matrix& grad_est) const {
  const Matrix sym = (grad_est + grad_est.transpose()) * 0.5;
  return sym.cwiseProduct(raw_.unaryExpr([](double x) { return fp_phi_grad(x); }));
}

FullParamGenerator fp_init(const Matrix& input, int k, Metric metric, double floor) {
  if (fp_phi(floor) >= 1e-6) throw Error("fp_init: floor must map below 1e-6");
  const Matrix knn = knn_graph(input, k, metric).to_dense();
  // phi^{-1}(1) = 0, and every other entry sits on the floor.
  Matrix raw = knn.unaryExpr([floor](double a) { return a > 0.0 ? 0.0 : floor; });
  return FullParamGenerator(std::move(raw));
}

EstimatedAdjacency fp_forward(const FullParamGenerator& generator) { return generator.forward(); }

Matrix topk_rows_mask(const Matrix& scores, int k) {
  const auto n = static_cast<int>(scores.rows());
  if (scores.cols() != n) throw Error("topk_rows_mask: matrix must be square");
  if (k < 1 || k >= n) throw Error("topk_rows_mask: k must satisfy 1 <= k < n");
  Matrix mask = Matrix::Zero(n, n);
  std::vector<int> order;
  order.reserve(n - 1);
  for (int i = 0; i < n; ++i) {
    order.clear();
    for (int j = 0; j < n; ++j) {
      if (j != i) order.push_back(j);
    }
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
      if (scores(i, a) != scores(i, b)) return scores(i, a) > scores(i, b);
      return a < b;
    });
    for (int t = 0; t < k; ++t) mask(i, order[t]) = 1.0;
  }
  return mask;
}

MlpDiagGenerator::MlpDiagGenerator(int dim, int layers, int k_row, Activation activation)
    : k_row_(k_row), activation_(activation) {
  if (dim < 1) throw Error("MLP-Diag: dimension must be positive");
  if (layers < 1) throw Error("MLP-Diag: needs at least one layer");
  if (k_row < 1) throw Error("MLP-Diag: k_row must be positive");
  weights_.assign(layers, Vector::Ones(dim));
}

std::size_t MlpDiagGenerator::parameter_count() const {
  std::size_t total = 0;
  for (const auto& w : weights_) total += static_cast<std::size_t>(w.size());
  return total;
}

Matrix MlpDiagGenerator::embed(const Matrix& input, Cache* cache) const {
  if (input.cols() != weights_.front().size()) throw Error("MLP-Diag: input width does not match weights");
  Matrix z = input;
  const std::size_t layers = weights_.size();
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix lin = z * weights_[l].asDiagonal();
    if (cache) cache->inputs.push_back(z);
    if (l + 1 < layers) {
      z = lin.unaryExpr([this](double x) { return activate(activation_, x); });
    } else {
      z = lin;
    }
    if (cache) cache->linear.push_back(std::move(lin));
  }
  return z;
}

EstimatedAdjacency MlpDiagGenerator::forward(const Matrix& input, Cache* cache) const {
  if (k_row_ >= input.rows()) throw Error("MLP-Diag: k_row must be smaller than the node count");
  Cache local;
  Cache& c = cache ? *cache : local;
  c = Cache{};
  c.embedding = embed(input, &c);
  c.norms = c.embedding.rowwise().norm();
  c.unit = c.embedding;
  for (Eigen::Index i = 0; i < c.unit.rows(); ++i) {
    if (c.norms[i] > 0.0) {
      c.unit.row(i) /= c.norms[i];
    } else {
      c.unit.row(i).setZero();
    }
  }
  const Matrix sim = c.unit * c.unit.transpose();
  c.kept = topk_rows_mask(sim, k_row_);
  const Matrix sparse = sim.cwiseProduct(c.kept);
  c.combined = (sparse + sparse.transpose()) * 0.5;
  return EstimatedAdjacency{c.combined.cwiseMax(0.0)};
}

std::vector<Vector> MlpDiagGenerator::backward(const Cache& cache, const Matrix& grad_est) const {
  const Matrix grad_combined = grad_est.cwiseProduct((cache.combined.array() > 0.0).cast<double>().matrix());
  const Matrix grad_sparse = (grad_combined + grad_combined.transpose()) * 0.5;
  const Matrix grad_sim = grad_sparse.cwiseProduct(cache.kept);
  // S = U U^T
  const Matrix grad_unit = (grad_sim + grad_sim.transpose()) * cache.unit;
  Matrix grad_z = Matrix::Zero(grad_unit.rows(), grad_unit.cols());
  for (Eigen::Index i = 0; i < grad_unit.rows(); ++i) {
    if (cache.norms[i] <= 0.0) continue;
    const double along = cache.unit.row(i).dot(grad_unit.row(i));
    grad_z.row(i) = (grad_unit.row(i) - along * cache.unit.row(i)) / cache.norms[i];
  }
  std::vector<Vector> grads(weights_.size());
  for (std::size_t l = weights_.size(); l-- > 0;) {
    Matrix grad_lin = grad_z;
    if (l + 1 < weights_.size()) {
      const Matrix& lin = cache.linear[l];
      for (Eigen::Index i = 0; i < lin.rows(); ++i) {
        for (Eigen::Index j = 0; j < lin.cols(); ++j) grad_lin(i, j) *= activate_grad(activation_, lin(i, j));
      }
    }
    grads[l] = grad_lin.cwiseProduct(cache.inputs[l]).colwise().sum().transpose();
    grad_z = grad_lin * weights_[l].asDiagonal();
  }
  return grads;
}

EstimatedAdjacency mlpdiag_forward(const MlpDiagGenerator& generator, const Matrix& input) {
  return generator.forward(input);
}

void DaeSpec::validate() const {
  if (corruption == Corruption::MaskBinary) {
    if (!(ones_fraction > 0.0 && ones_fraction < 1.0)) throw Error("DAE: ones fraction must lie in (0, 1)");
    if (!(zeros_per_one >= 1.0)) throw Error("DAE: zeros per masked one must be at least 1");
  } else {
    if (!(noise_std > 0.0)) throw Error("DAE: noise scale must be positive");
    if (!(mask_fraction > 0.0 && mask_fraction < 1.0)) throw Error("DAE: mask fraction must lie in (0, 1)");
  }
  if (hidden_dim < 1) throw Error("DAE: hidden dimension must be positive");
}

namespace {

// Uniform sample of `count` distinct elements, in the order drawn.
std::vector<Eigen::Index> sample_indices(std::vector<Eigen::Index> pool, std::size_t count, Rng& rng) {
  count = std::min(count, pool.size());
  for (std::size_t t = 0; t < count; ++t) {
    std::uniform_int_distribution<std::size_t> pick(t, pool.size() - 1);
    std::swap(pool[t], pool[pick(rng)]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace

DaeCorruption sample_corruption(const Matrix& target, const DaeSpec& spec, Rng& rng) {
  spec.validate();
  DaeCorruption out;
  out.input = target;
  out.mask = Matrix::Zero(target.rows(), target.cols());
  const Eigen::Index total = target.size();
  if (spec.corruption == Corruption::MaskBinary) {
    std::vector<Eigen::Index> ones;
    std::vector<Eigen::Index> zeros;
    for (Eigen::Index idx = 0; idx < total; ++idx) {
      (target.data()[idx] != 0.0 ? ones : zeros).push_back(idx);
    }
    if (ones.empty()) throw Error("DAE: binary corruption needs at least one nonzero feature");
    const std::size_t n_ones = std::max<std::size_t>(1, fraction_count(spec.ones_fraction, ones.size()));
    const auto n_zeros = static_cast<std::size_t>(std::llround(spec.zeros_per_one * n_ones));
    for (Eigen::Index idx : sample_indices(std::move(ones), n_ones, rng)) out.mask.data()[idx] = 1.0;
    for (Eigen::Index idx : sample_indices(std::move(zeros), n_zeros, rng)) out.mask.data()[idx] = 1.0;
    out.input = target.cwiseProduct((1.0 - out.mask.array()).matrix());
  } else {
    std::vector<Eigen::Index> all(static_cast<std::size_t>(total));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    const std::size_t count = fraction_count(spec.mask_fraction, all.size());
    std::normal_distribution<double> noise(0.0, spec.noise_std);
    for (Eigen::Index idx : sample_indices(std::move(all), count, rng)) {
      out.mask.data()[idx] = 1.0;
      out.input.data()[idx] += noise(rng);
    }
  }
  out.masked = static_cast<std::size_t>(out.mask.sum());
  return out;
}

double masked_bce(const Matrix& logits, const Matrix& target, const Matrix& mask, Matrix* grad) {
  const double count = mask.sum();
  if (grad) *grad = Matrix::Zero(logits.rows(), logits.cols());
  if (count <= 0.0) return 0.0;
  double loss = 0.0;
  for (Eigen::Index idx = 0; idx < logits.size(); ++idx) {
    if (mask.data()[idx] == 0.0) continue;
    const double o = logits.data()[idx];
    const double t = target.data()[idx];
    // softplus(o) - t * o, stable for large |o|
    loss += std::max(o, 0.0) + std::log1p(std::exp(-std::abs(o))) - t * o;
    if (grad) grad->data()[idx] = (1.0 / (1.0 + std::exp(-o)) - t) / count;
  }
  return loss / count;
}

double masked_mse(const Matrix& output, const Matrix& target, const Matrix& mask, Matrix* grad) {
  const double count = mask.sum();
  if (grad) *grad = Matrix::Zero(output.rows(), output.cols());
  if (count <= 0.0) return 0.0;
  const Matrix diff = (output - target).cwiseProduct(mask);
  if (grad) *grad = diff * (2.0 / count);
  return diff.squaredNorm() / count;
}

DaeLoss dae_loss(const EstimatedAdjacency& adj, const Matrix& target, const DaeCorruption& corruption,
                 Corruption kind, const GcnParams& denoiser) {
  const int n = adj.size();
  if (target.rows() != n || corruption.input.rows() != n) throw Error("DAE: feature rows do not match adjacency");
  if (denoiser.in_dim() != target.cols() || denoiser.out_dim() != target.cols()) {
    throw Error("DAE: denoiser must map the feature width onto itself");
  }
  DaeLoss out;
  if (corruption.masked == 0) {
    out.grad_adj = Matrix::Zero(n, n);
    out.grad_denoiser.W1 = Matrix::Zero(denoiser.W1.rows(), denoiser.W1.cols());
    out.grad_denoiser.W2 = Matrix::Zero(denoiser.W2.rows(), denoiser.W2.cols());
    return out;
  }
  const NormAdj norm(normalize_dense(adj.values));
  const GcnCache cache = gcn_forward_cached(norm, corruption.input, denoiser);
  Matrix upstream;
  out.loss = kind == Corruption::MaskBinary ? masked_bce(cache.logits, target, corruption.mask, &upstream)
                                            : masked_mse(cache.logits, target, corruption.mask, &upstream);
  out.grad_denoiser = gcn_backward(norm, corruption.input, denoiser, cache, upstream, true);
  out.grad_adj = normalize_dense_backward(adj.values, out.grad_denoiser.adj);
  out.grad_denoiser.adj.resize(0, 0);
  return out;
}

DaeLoss dae_loss(const EstimatedAdjacency& adj, const Matrix& target, const DaeSpec& spec,
                 const GcnParams& denoiser, Rng& rng) {
  const DaeCorruption corruption = sample_corruption(target, spec, rng);
  return dae_loss(adj, target, corruption, spec.corruption, denoiser);
}

std::string to_string(GeneratorKind kind) { return kind == GeneratorKind::FullParam ? "fp" : "mlpdiag"; }

GeneratorKind parse_generator(const std::string& text) {
  if (text == "fp" || text == "fullparam") return GeneratorKind::FullParam;
  if (text == "mlpdiag" || text == "mlp-diag") return GeneratorKind::MlpDiag;
  throw Error("unknown generator '" + text + "'");
}

namespace {

std::variant<FullParamGenerator, MlpDiagGenerator> make_generator(const Matrix& input,
                                                                 const GeneratorOptions& options) {
  if (options.kind == GeneratorKind::FullParam) {
    return fp_init(input, options.knn_k, options.knn_metric, options.fp_floor);
  }
  // Small graphs cannot keep more than n - 1 neighbors per row.
  const int k_row = std::min<int>(options.mlp_k_row, static_cast<int>(input.rows()) - 1);
  return MlpDiagGenerator(static_cast<int>(input.cols()), options.mlp_layers, k_row, options.mlp_activation);
}

}  // namespace

AdjacencyGenerator::AdjacencyGenerator(const Matrix& input, const GeneratorOptions& options,
                                       const AdamOptions& adam)
    : options_(options), input_(input), generator_(make_generator(input, options)) {
  if (options_.kind == GeneratorKind::FullParam) {
    optimizers_.emplace_back(adam);
  } else {
    optimizers_.assign(static_cast<std::size_t>(options_.mlp_layers), Adam(adam));
  }
}

const EstimatedAdjacency& AdjacencyGenerator::forward() {
  if (auto* fp = std::get_if<FullParamGenerator>(&generator_)) {
    current_ = fp->forward();
  } else {
    current_ = std::get<MlpDiagGenerator>(generator_).forward(input_, &cache_);
  }
  return current_;
}

void AdjacencyGenerator::backward(const Matrix& grad_est) {
  if (auto* fp = std::get_if<FullParamGenerator>(&generator_)) {
    grad_raw_ = fp->backward(grad_est);
  } else {
    grad_weights_ = std::get<MlpDiagGenerator>(generator_).backward(cache_, grad_est);
  }
}

void AdjacencyGenerator::step() {
  if (auto* fp = std::get_if<FullParamGenerator>(&generator_)) {
    if (grad_raw_.size() == 0) return;
    optimizers_[0].step(fp->raw(), grad_raw_);
    grad_raw_.resize(0, 0);
    return;
  }
  auto& weights = std::get<MlpDiagGenerator>(generator_).weights();
  if (grad_weights_.empty()) return;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    Matrix param = weights[l];
    optimizers_[l].step(param, grad_weights_[l]);
    weights[l] = param.col(0);
  }
  grad_weights_.clear();
}

std::size_t AdjacencyGenerator::parameter_count() const {
  return std::visit([](const auto& g) { return g.parameter_count(); }, generator_);
}

void save_adjacency_dense(const EstimatedAdjacency& adj, const fs::path& path) {
  write_matrix_csv(path, adj.values);
}

void save_adjacency_edges(const EstimatedAdjacency& adj, double fraction, const fs::path& path) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw Error("edge-list fraction must lie in (0, 1]");
  const int n = adj.size();
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) pairs.emplace_back(u, v);
  }
  const std::size_t keep = std::max<std::size_t>(1, fraction_count(fraction, pairs.size()));
  std::partial_sort(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(std::min(keep, pairs.size())),
                    pairs.end(), [&](const auto& a, const auto& b) {
                      const double sa = adj.values(a.first, a.second);
                      const double sb = adj.values(b.first, b.second);
                      if (sa != sb) return sa > sb;
                      return a < b;
                    });
  std::ostringstream out;
  out << "# edges n=" << n << "\n";
  for (std::size_t t = 0; t < std::min(keep, pairs.size()); ++t) {
    const auto [u, v] = pairs[t];
    out << u << ',' << v << ',' << format_double(adj.values(u, v)) << '\n';
  }
  write_text_file(path, out.str());
}

EstimatedAdjacency load_adjacency(const fs::path& path, int n) {
  std::ifstream in(path);
  if (!in) throw Error("missing file " + path.string());
  std::string first;
  std::getline(in, first);
  in.close();
  EstimatedAdjacency out;
  if (first.rfind("# edges", 0) == 0) {
    out.values = Matrix::Zero(n, n);
    for_each_csv_row(path, [&](const CsvRow& row) {
      row.expect_fields(3);
      const int u = row.get_int(0);
      const int v = row.get_int(1);
      if (u < 0 || v < 0 || u >= n || v >= n) row.fail("node index out of range");
      out.values(u, v) = out.values(v, u) = row.get_double(2);
    });
  } else {
    out.values = read_matrix_csv(path);
    if (out.values.rows() != n || out.values.cols() != n) {
      throw Error(path.string() + ": expected a " + std::to_string(n) + "x" + std::to_string(n) + " matrix");
    }
  }
  out.validate(1e-9);
  return out;
}

}  // namespace reconxf
