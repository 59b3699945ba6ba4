#include "reconxf/privacy.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "reconxf/csv.hpp"

namespace reconxf {

namespace fs = std::filesystem;
using nlohmann::json;

void FeaturePrivacyParams::validate() const {
  if (!(eps_x > 0.0) || !std::isfinite(eps_x)) throw Error("eps_x must be positive and finite");
  if (alpha.size() != beta.size() || alpha.size() == 0) throw Error("feature bounds must be non-empty and equal length");
  if (m < 1 || m > d()) throw Error("m must satisfy 1 <= m <= d");
  for (int j = 0; j < d(); ++j) {
    if (!(alpha[j] < beta[j])) throw Error("feature bounds need alpha < beta");
  }
}

double FeaturePrivacyParams::bit_exp() const { return std::exp(eps_x / m); }

void LabelPrivacyParams::validate() const {
  if (!(eps_y > 0.0)) throw Error("eps_y must be positive");
  if (c < 2) throw Error("randomized response needs at least two classes");
}

double mb_plus_probability(double x, double alpha, double beta, double eps_x, int m) {
  const double e = std::exp(eps_x / m);
  return 1.0 / (e + 1.0) + ((x - alpha) / (beta - alpha)) * (e - 1.0) / (e + 1.0);
}

Matrix mb_encode(const Matrix& X, const FeaturePrivacyParams& params, std::uint64_t seed) {
  params.validate();
  const int n = static_cast<int>(X.rows());
  const int d = params.d();
  if (X.cols() != d) throw Error("mb_encode: feature dimension does not match bounds");
  const double e = params.bit_exp();
  const double base = 1.0 / (e + 1.0);
  const double slope = (e - 1.0) / (e + 1.0);

  Matrix out = Matrix::Zero(n, d);
  std::vector<int> dims(d);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) {
      if (!(X(i, j) >= params.alpha[j] && X(i, j) <= params.beta[j])) {
        throw Error("mb_encode: value at (" + std::to_string(i) + "," + std::to_string(j) +
                    ") outside [alpha, beta]");
      }
    }
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(i));
    std::iota(dims.begin(), dims.end(), 0);
    // Partial Fisher-Yates: the first m entries become a uniform m-subset.
    for (int t = 0; t < params.m; ++t) {
      std::uniform_int_distribution<int> pick(t, d - 1);
      std::swap(dims[t], dims[pick(rng)]);
    }
    for (int t = 0; t < params.m; ++t) {
      const int j = dims[t];
      const double ramp = (X(i, j) - params.alpha[j]) / (params.beta[j] - params.alpha[j]);
      const double p_plus = base + ramp * slope;
      out(i, j) = unit(rng) < p_plus ? 1.0 : -1.0;
    }
  }
  return out;
}

Matrix mb_rectify(const Matrix& X_enc, const FeaturePrivacyParams& params) {
  params.validate();
  const int d = params.d();
  if (X_enc.cols() != d) throw Error("mb_rectify: feature dimension does not match bounds");
  const double e = params.bit_exp();
  const double gain = static_cast<double>(d) / (2.0 * params.m) * (e + 1.0) / (e - 1.0);
  Vector scale = gain * (params.beta - params.alpha);
  Vector offset = 0.5 * (params.alpha + params.beta);
  Matrix out = X_enc * scale.asDiagonal();
  out.rowwise() += offset.transpose();
  return out;
}

Matrix rr_transition(const LabelPrivacyParams& params) {
  params.validate();
  const int c = params.c;
  // Divide through by e^{eps} so that large budgets do not overflow.
  const double other = std::exp(-params.eps_y);
  const double denom = 1.0 + (c - 1) * other;
  const double keep = 1.0 / denom;
  const double flip = other / denom;
  Matrix t = Matrix::Constant(c, c, flip);
  t.diagonal().setConstant(keep);
  return t;
}

std::vector<int> rr_perturb(const std::vector<int>& labels, const LabelPrivacyParams& params,
                            std::uint64_t seed) {
  const Matrix t = rr_transition(params);
  const double keep = t(0, 0);
  std::vector<int> out(labels.size());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> other(0, params.c - 2);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || y >= params.c) throw Error("rr_perturb: label outside [0, c)");
    Rng rng = make_rng(seed, i);
    if (unit(rng) < keep) {
      out[i] = y;
    } else {
      const int draw = other(rng);
      out[i] = draw >= y ? draw + 1 : draw;
    }
  }
  return out;
}

PrivatizedView privatize(const Graph& graph, double eps_x, double eps_y, int m, std::uint64_t seed) {
  PrivatizedView view;
  view.feature_params = FeaturePrivacyParams{eps_x, m, graph.alpha, graph.beta};
  view.label_params = LabelPrivacyParams{eps_y, graph.c};
  view.X_enc = mb_encode(graph.X, view.feature_params, derive_seed(seed, 101));
  view.Y_priv = rr_perturb(graph.Y, view.label_params, derive_seed(seed, 102));
  return view;
}

void save_view(const PrivatizedView& view, const RedactedGraph& meta, const fs::path& dir) {
  fs::create_directories(dir);
  const auto& fp = view.feature_params;
  json j;
  j["n"] = meta.n;
  j["d"] = meta.d;
  j["c"] = meta.c;
  j["feature_kind"] = to_string(meta.kind);
  j["alpha"] = std::vector<double>(fp.alpha.data(), fp.alpha.data() + fp.alpha.size());
  j["beta"] = std::vector<double>(fp.beta.data(), fp.beta.data() + fp.beta.size());
  j["privacy"] = {{"eps_x", fp.eps_x}, {"m", fp.m}, {"eps_y", view.label_params.eps_y}};
  write_text_file(dir / "meta.json", j.dump(2) + "\n");

  std::string features;
  for (Eigen::Index i = 0; i < view.X_enc.rows(); ++i) {
    for (Eigen::Index k = 0; k < view.X_enc.cols(); ++k) {
      if (k) features.push_back(',');
      features += std::to_string(static_cast<int>(view.X_enc(i, k)));
    }
    features.push_back('\n');
  }
  write_text_file(dir / "features.csv", features);

  std::ostringstream labels;
  for (int y : view.Y_priv) labels << y << '\n';
  write_text_file(dir / "labels.csv", labels.str());

  std::ostringstream masks;
  for (Split s : meta.split) masks << to_string(s) << '\n';
  write_text_file(dir / "masks.csv", masks.str());
}

PrivatizedView load_view(const fs::path& dir, RedactedGraph* meta_out) {
  const fs::path meta_path = dir / "meta.json";
  std::ifstream in(meta_path);
  if (!in) throw Error("missing file " + meta_path.string());
  json j;
  RedactedGraph meta;
  PrivatizedView view;
  try {
    j = json::parse(in);
    meta.n = j.at("n").get<int>();
    meta.d = j.at("d").get<int>();
    meta.c = j.at("c").get<int>();
    meta.kind = j.value("feature_kind", "binary") == "binary" ? FeatureKind::Binary
                                                              : FeatureKind::Continuous;
    const auto alpha = j.at("alpha").get<std::vector<double>>();
    const auto beta = j.at("beta").get<std::vector<double>>();
    meta.alpha = Eigen::Map<const Vector>(alpha.data(), alpha.size());
    meta.beta = Eigen::Map<const Vector>(beta.data(), beta.size());
    const auto& p = j.at("privacy");
    view.feature_params = FeaturePrivacyParams{p.at("eps_x").get<double>(), p.at("m").get<int>(),
                                               meta.alpha, meta.beta};
    view.label_params = LabelPrivacyParams{p.at("eps_y").get<double>(), meta.c};
  } catch (const json::exception& e) {
    throw Error(meta_path.string() + ": " + e.what());
  }
  view.feature_params.validate();
  view.label_params.validate();

  view.X_enc = read_matrix_csv(dir / "features.csv");
  if (view.X_enc.rows() != meta.n || view.X_enc.cols() != meta.d) {
    throw Error((dir / "features.csv").string() + ": expected n x d encoded features");
  }
  for (Eigen::Index i = 0; i < view.X_enc.rows(); ++i) {
    int nonzero = 0;
    for (Eigen::Index k = 0; k < view.X_enc.cols(); ++k) {
      const double t = view.X_enc(i, k);
      if (t != -1.0 && t != 0.0 && t != 1.0) {
        throw Error((dir / "features.csv").string() + ":" + std::to_string(i + 1) +
                    ": encoded values must be -1, 0 or 1");
      }
      nonzero += t != 0.0;
    }
    if (nonzero != view.feature_params.m) {
      throw Error((dir / "features.csv").string() + ":" + std::to_string(i + 1) +
                  ": row must have exactly m nonzero entries");
    }
  }
  for_each_csv_row(dir / "labels.csv", [&](const CsvRow& row) {
    row.expect_fields(1);
    const int y = row.get_int(0);
    if (y < 0 || y >= meta.c) row.fail("label outside [0, c)");
    view.Y_priv.push_back(y);
  });
  if (view.n() != static_cast<int>(view.Y_priv.size())) {
    throw Error((dir / "labels.csv").string() + ": expected n rows");
  }
  for_each_csv_row(dir / "masks.csv", [&](const CsvRow& row) {
    row.expect_fields(1);
    meta.split.push_back(parse_split(row.field(0)));
  });
  if (static_cast<int>(meta.split.size()) != meta.n) {
    throw Error((dir / "masks.csv").string() + ": expected n rows");
  }
  if (meta_out) *meta_out = std::move(meta);
  return view;
}

}  // namespace reconxf
