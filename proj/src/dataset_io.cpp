#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "reconxf/csv.hpp"
#include "reconxf/graph.hpp"

namespace reconxf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_meta(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

Vector read_bounds(const json& meta, const char* key, int d, double fallback,
                   const fs::path& path) {
  if (!meta.contains(key)) return Vector::Constant(d, fallback);
  const auto values = meta.at(key).get<std::vector<double>>();
  if (static_cast<int>(values.size()) != d) {
    throw Error(path.string() + ": '" + key + "' must have d entries");
  }
  return Eigen::Map<const Vector>(values.data(), d);
}

}  // namespace

Graph load_dataset(const fs::path& dir) {
  const fs::path meta_path = dir / "meta.json";
  const json meta = read_meta(meta_path);
  Graph g;
  try {
    g.n = meta.at("n").get<int>();
    g.d = meta.at("d").get<int>();
    g.c = meta.at("c").get<int>();
    const std::string kind = meta.value("feature_kind", "binary");
    if (kind == "binary") {
      g.kind = FeatureKind::Binary;
    } else if (kind == "continuous") {
      g.kind = FeatureKind::Continuous;
    } else {
      throw Error(meta_path.string() + ": unknown feature_kind '" + kind + "'");
    }
  } catch (const json::exception& e) {
    throw Error(meta_path.string() + ": " + e.what());
  }
  if (g.n <= 0 || g.d <= 0 || g.c <= 0) throw Error(meta_path.string() + ": sizes must be positive");
  g.alpha = read_bounds(meta, "alpha", g.d, 0.0, meta_path);
  g.beta = read_bounds(meta, "beta", g.d, 1.0, meta_path);

  std::vector<Edge> edges;
  for_each_csv_row(dir / "edges.csv", [&](const CsvRow& row) {
    row.expect_fields(2);
    const int u = row.get_int(0);
    const int v = row.get_int(1);
    if (u < 0 || v < 0 || u >= g.n || v >= g.n) row.fail("node id out of range");
    edges.push_back({u, v});
  });
  g.A = Adjacency(g.n, edges);

  g.X.resize(g.n, g.d);
  int rows = 0;
  for_each_csv_row(dir / "features.csv", [&](const CsvRow& row) {
    if (rows >= g.n) row.fail("more than n feature rows");
    row.expect_fields(g.d);
    for (int j = 0; j < g.d; ++j) {
      const double x = row.get_double(j);
      if (!(x >= g.alpha[j] && x <= g.beta[j])) row.fail("feature out of declared bounds");
      if (g.kind == FeatureKind::Binary && x != 0.0 && x != 1.0) row.fail("binary feature is not 0/1");
      g.X(rows, j) = x;
    }
    ++rows;
  });
  if (rows != g.n) throw Error((dir / "features.csv").string() + ": expected n rows");

  for_each_csv_row(dir / "labels.csv", [&](const CsvRow& row) {
    row.expect_fields(1);
    const int y = row.get_int(0);
    if (y < 0 || y >= g.c) row.fail("label outside [0, c)");
    g.Y.push_back(y);
  });
  if (static_cast<int>(g.Y.size()) != g.n) throw Error((dir / "labels.csv").string() + ": expected n rows");

  for_each_csv_row(dir / "masks.csv", [&](const CsvRow& row) {
    row.expect_fields(1);
    try {
      g.split.push_back(parse_split(row.field(0)));
    } catch (const Error&) {
      row.fail("split must be one of train/val/test");
    }
  });
  if (static_cast<int>(g.split.size()) != g.n) throw Error((dir / "masks.csv").string() + ": expected n rows");

  g.validate();
  return g;
}

void save_dataset(const Graph& graph, const fs::path& dir) {
  graph.validate();
  fs::create_directories(dir);
  json meta;
  meta["n"] = graph.n;
  meta["d"] = graph.d;
  meta["c"] = graph.c;
  meta["feature_kind"] = to_string(graph.kind);
  meta["alpha"] = std::vector<double>(graph.alpha.data(), graph.alpha.data() + graph.d);
  meta["beta"] = std::vector<double>(graph.beta.data(), graph.beta.data() + graph.d);
  write_text_file(dir / "meta.json", meta.dump(2) + "\n");

  std::ostringstream edges;
  for (const Edge& e : graph.A.edges()) edges << e.u << ',' << e.v << '\n';
  write_text_file(dir / "edges.csv", edges.str());

  write_matrix_csv(dir / "features.csv", graph.X);

  std::ostringstream labels;
  for (int y : graph.Y) labels << y << '\n';
  write_text_file(dir / "labels.csv", labels.str());

  std::ostringstream masks;
  for (Split s : graph.split) masks << to_string(s) << '\n';
  write_text_file(dir / "masks.csv", masks.str());
}

}  // namespace reconxf
