#include "reconxf/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "reconxf/csv.hpp"

namespace reconxf {

namespace fs = std::filesystem;
using nlohmann::json;

void ExperimentConfig::validate() const {
  if (dataset == "sbm") sbm.validate();
  glime.validate();
  target.validate();
  if (!(eps_x > 0.0) || !(eps_y > 0.0)) throw Error("experiment: privacy budgets must be positive");
  if (m < 1) throw Error("experiment: m must be at least 1");
  if (repetitions < 1) throw Error("experiment: repetitions must be positive");
  attack.effective().validate();
}

std::string ExperimentConfig::dataset_name() const {
  if (dataset == "sbm") return "sbm";
  return fs::path(dataset).filename().string();
}

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw Error("config: " + where + " must be an object");
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) throw Error("config: unknown key '" + item.key() + "' in " + where);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

void read_generator(const json& obj, GeneratorOptions& g, const std::string& where) {
  reject_unknown(obj, {"kind", "knn_k", "knn_metric", "mlp_layers", "mlp_k_row", "mlp_activation"}, where);
  if (obj.contains("kind")) g.kind = parse_generator(obj.at("kind").get<std::string>());
  read(obj, "knn_k", g.knn_k);
  if (obj.contains("knn_metric")) g.knn_metric = parse_metric(obj.at("knn_metric").get<std::string>());
  read(obj, "mlp_layers", g.mlp_layers);
  read(obj, "mlp_k_row", g.mlp_k_row);
  if (obj.contains("mlp_activation")) g.mlp_activation = parse_activation(obj.at("mlp_activation").get<std::string>());
}

void read_dae(const json& obj, DaeSpec& d, const std::string& where) {
  reject_unknown(obj, {"hidden_dim", "noise_std", "mask_fraction", "ones_fraction", "zeros_per_one"}, where);
  read(obj, "hidden_dim", d.hidden_dim);
  read(obj, "noise_std", d.noise_std);
  read(obj, "mask_fraction", d.mask_fraction);
  read(obj, "ones_fraction", d.ones_fraction);
  read(obj, "zeros_per_one", d.zeros_per_one);
}

void set_variant(AttackConfig& attack, Variant variant) {
  const AttackConfig layout = AttackConfig::for_variant(variant);
  attack.variant = variant;
  attack.x_branch = layout.x_branch;
  attack.e_branch = layout.e_branch;
}

void read_attack(const json& obj, AttackConfig& a) {
  reject_unknown(obj,
                 {"fuse_lambda", "h_x", "h_y", "topk", "warmup_epochs", "joint_epochs", "lr",
                  "classifier_weight_decay", "classifier_hidden", "classifier_dropout", "rectify",
                  "forward_correction", "harden_tau", "x_generator", "e_generator", "x_dae", "e_dae"},
                 "attack");
  read(obj, "fuse_lambda", a.fuse_lambda);
  read(obj, "h_x", a.h_x);
  read(obj, "h_y", a.h_y);
  if (obj.contains("topk")) {
    a.topk = obj.at("topk").is_null() ? std::nullopt : std::optional<double>(obj.at("topk").get<double>());
  }
  read(obj, "warmup_epochs", a.warmup_epochs);
  read(obj, "joint_epochs", a.joint_epochs);
  read(obj, "lr", a.lr);
  read(obj, "classifier_weight_decay", a.classifier_weight_decay);
  read(obj, "classifier_hidden", a.classifier_hidden);
  read(obj, "classifier_dropout", a.classifier_dropout);
  read(obj, "rectify", a.rectify);
  read(obj, "forward_correction", a.forward_correction);
  if (obj.contains("harden_tau")) {
    const json& t = obj.at("harden_tau");
    a.harden_tau = t.is_null() ? std::nullopt : std::optional<double>(t.get<double>());
  }
  if (obj.contains("x_generator")) read_generator(obj.at("x_generator"), a.x_generator, "attack.x_generator");
  if (obj.contains("e_generator")) read_generator(obj.at("e_generator"), a.e_generator, "attack.e_generator");
  if (obj.contains("x_dae")) read_dae(obj.at("x_dae"), a.x_dae, "attack.x_dae");
  if (obj.contains("e_dae")) read_dae(obj.at("e_dae"), a.e_dae, "attack.e_dae");
}

NegativePolicy parse_negatives(const std::string& text) {
  if (text == "allpairs" || text == "all") return NegativePolicy::AllPairs;
  if (text == "sampled" || text == "sampledequal") return NegativePolicy::SampledEqual;
  throw Error("unknown negative policy '" + text + "'");
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text, const ExperimentConfig& base) {
  ExperimentConfig config = base;
  try {
    const json root = json::parse(json_text);
    reject_unknown(root,
                   {"dataset", "sbm", "explainer", "glime", "target", "eps_x", "eps_y", "m", "variant", "attack",
                    "negatives", "repetitions", "seed"},
                   "config");
    read(root, "dataset", config.dataset);
    if (root.contains("sbm")) {
      const json& s = root.at("sbm");
      reject_unknown(s, {"n", "blocks", "p_in", "p_out", "flip_noise", "feature_dim", "train_fraction",
                         "val_fraction"},
                     "sbm");
      read(s, "n", config.sbm.n);
      read(s, "blocks", config.sbm.blocks);
      read(s, "p_in", config.sbm.p_in);
      read(s, "p_out", config.sbm.p_out);
      read(s, "flip_noise", config.sbm.flip_noise);
      read(s, "feature_dim", config.sbm.feature_dim);
      read(s, "train_fraction", config.sbm.train_fraction);
      read(s, "val_fraction", config.sbm.val_fraction);
    }
    if (root.contains("explainer")) config.explainer = parse_explainer(root.at("explainer").get<std::string>());
    if (root.contains("glime")) {
      const json& g = root.at("glime");
      reject_unknown(g, {"samples", "keep_prob", "kernel_width", "ridge"}, "glime");
      read(g, "samples", config.glime.samples);
      read(g, "keep_prob", config.glime.keep_prob);
      read(g, "kernel_width", config.glime.kernel_width);
      read(g, "ridge", config.glime.ridge);
    }
    if (root.contains("target")) {
      const json& t = root.at("target");
      reject_unknown(t, {"lr", "epochs", "weight_decay", "hidden_dim", "dropout", "patience"}, "target");
      read(t, "lr", config.target.lr);
      read(t, "epochs", config.target.epochs);
      read(t, "weight_decay", config.target.weight_decay);
      read(t, "hidden_dim", config.target.hidden_dim);
      read(t, "dropout", config.target.dropout);
      read(t, "patience", config.target.patience);
    }
    read(root, "eps_x", config.eps_x);
    read(root, "eps_y", config.eps_y);
    read(root, "m", config.m);
    if (root.contains("variant")) set_variant(config.attack, parse_variant(root.at("variant").get<std::string>()));
    if (root.contains("attack")) read_attack(root.at("attack"), config.attack);
    if (root.contains("negatives")) config.negatives = parse_negatives(root.at("negatives").get<std::string>());
    read(root, "repetitions", config.repetitions);
    read(root, "seed", config.seed);
  } catch (const json::exception& e) {
    throw Error(std::string("config: ") + e.what());
  }
  return config;
}

ExperimentConfig load_config(const fs::path& path, const ExperimentConfig& base) {
  std::ifstream in(path);
  if (!in) throw Error("missing file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_config(buffer.str(), base);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

fs::path resolve_dataset(const std::string& name) {
  const fs::path direct(name);
  if (fs::is_directory(direct)) return direct;
  if (const char* root = std::getenv("RECONXF_DATA_DIR")) {
    const fs::path under = fs::path(root) / name;
    if (fs::is_directory(under)) return under;
  }
  throw Error("dataset '" + name + "' not found (checked the path and $RECONXF_DATA_DIR)");
}

namespace {

std::string opt_text(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::string clean_error(std::string text) {
  for (char& ch : text) {
    if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
  }
  return text;
}

}  // namespace

std::string result_header() {
  return "dataset,variant,explainer,eps_x,eps_y,h_x,h_y,topk,seed,auc,ap,runtime_s,l_dae_x,l_dae_ex,l_ce,l_total,"
         "error";
}

std::string format_row(const ResultRow& r) {
  std::ostringstream out;
  out << r.dataset << ',' << r.variant << ',' << r.explainer << ',' << format_double(r.eps_x) << ','
      << format_double(r.eps_y) << ',' << r.h_x << ',' << r.h_y << ',' << opt_text(r.topk) << ',' << r.seed << ','
      << opt_text(r.auc) << ',' << opt_text(r.ap) << ',' << format_double(r.runtime_s) << ','
      << format_double(r.l_dae_x) << ',' << format_double(r.l_dae_ex) << ',' << format_double(r.l_ce) << ','
      << format_double(r.l_total) << ',' << clean_error(r.error);
  return out.str();
}

ResultRow parse_row(const std::string& line) {
  const std::vector<std::string> f = split_csv_line(line);
  if (f.size() != 17) throw Error("result row: expected 17 fields, got " + std::to_string(f.size()));
  CsvRow row("results", 0, f);
  auto opt = [&](std::size_t i) {
    return f[i].empty() ? std::optional<double>() : std::optional<double>(row.get_double(i));
  };
  ResultRow r;
  r.dataset = f[0];
  r.variant = f[1];
  r.explainer = f[2];
  r.eps_x = row.get_double(3);
  r.eps_y = row.get_double(4);
  r.h_x = row.get_int(5);
  r.h_y = row.get_int(6);
  r.topk = opt(7);
  r.seed = std::stoull(f[8]);
  r.auc = opt(9);
  r.ap = opt(10);
  r.runtime_s = row.get_double(11);
  r.l_dae_x = row.get_double(12);
  r.l_dae_ex = row.get_double(13);
  r.l_ce = row.get_double(14);
  r.l_total = row.get_double(15);
  r.error = f[16];
  return r;
}

std::vector<ResultRow> read_results(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing file " + path.string());
  std::vector<ResultRow> rows;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty() || line == result_header()) continue;
    try {
      rows.push_back(parse_row(line));
    } catch (const std::exception& e) {
      throw Error(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return rows;
}

Graph build_graph(const ExperimentConfig& config, std::uint64_t seed) {
  if (config.dataset == "sbm") {
    SbmSpec spec = config.sbm;
    spec.seed = seed;
    return generate_sbm(spec);
  }
  return load_dataset(resolve_dataset(config.dataset));
}

ExplanationMatrix explain_target(const GcnParams& model, const Graph& graph, ExplainerKind kind,
                                 const GlimeSpec& glime) {
  switch (kind) {
    case ExplainerKind::Grad:
      return grad_explain(model, graph);
    case ExplainerKind::GradInput:
      return grad_input_explain(model, graph);
    case ExplainerKind::GLime:
      return glime_explain(model, graph, glime);
  }
  throw Error("unknown explainer");
}

namespace {

struct Base {
  Graph graph;
  GcnParams target;
  ExplanationMatrix explanation;
};

Base prepare_base(const ExperimentConfig& config, std::uint64_t seed) {
  Base b;
  b.graph = build_graph(config, seed);
  TrainSpec train = config.target;
  train.seed = derive_seed(seed, 3);
  b.target = train_gcn(b.graph, train).params;
  GlimeSpec glime = config.glime;
  glime.seed = derive_seed(seed, 4);
  b.explanation = explain_target(b.target, b.graph, config.explainer, glime);
  return b;
}

PrivatizedView privatize_for(const ExperimentConfig& config, const Graph& graph, std::uint64_t seed) {
  return privatize(graph, config.eps_x, config.eps_y, std::min(config.m, graph.d), derive_seed(seed, 5));
}

}  // namespace

Prepared prepare(const ExperimentConfig& config, std::uint64_t seed) {
  Base b = prepare_base(config, seed);
  Prepared p;
  p.view = privatize_for(config, b.graph, seed);
  p.graph = std::move(b.graph);
  p.target = std::move(b.target);
  p.explanation = std::move(b.explanation);
  return p;
}

RunOutput attack_and_evaluate(const ExperimentConfig& config, const Prepared& prepared, std::uint64_t seed) {
  AttackConfig attack = config.attack;
  attack.seed = derive_seed(seed, 6);
  RunOutput out;
  out.attack = run_attack(redact(prepared.graph), prepared.explanation, prepared.view, attack);
  EvalSpec eval = default_eval_spec(prepared.graph.n);
  if (config.negatives) eval.policy = *config.negatives;
  eval.seed = derive_seed(seed, 8);
  const LinkScores scores = evaluate_links(out.attack.A_hat.values, prepared.graph.A, eval);

  const AttackConfig& eff = out.attack.config;
  ResultRow& r = out.row;
  r.dataset = config.dataset_name();
  r.variant = to_string(eff.variant);
  r.explainer = to_string(config.explainer);
  r.eps_x = config.eps_x;
  r.eps_y = config.eps_y;
  r.h_x = eff.h_x;
  r.h_y = eff.h_y;
  r.topk = eff.topk;
  r.seed = seed;
  r.auc = scores.auc;
  r.ap = scores.ap;
  r.runtime_s = out.attack.runtime_s;
  r.l_dae_x = out.attack.final_loss.l_dae_x;
  r.l_dae_ex = out.attack.final_loss.l_dae_ex;
  r.l_ce = out.attack.final_loss.l_ce;
  r.l_total = out.attack.final_loss.l_total;
  return out;
}

RunOutput run_experiment(const ExperimentConfig& config, std::uint64_t seed) {
  config.validate();
  return attack_and_evaluate(config, prepare(config, seed), seed);
}

void write_curves(const std::vector<LossBreakdown>& curves, int warmup_epochs, const fs::path& path) {
  std::ostringstream out;
  out << "epoch,phase,l_dae_x,l_dae_ex,l_ce,l_total\n";
  for (std::size_t e = 0; e < curves.size(); ++e) {
    const LossBreakdown& lb = curves[e];
    out << e << ',' << (static_cast<int>(e) < warmup_epochs ? "warmup" : "joint") << ','
        << format_double(lb.l_dae_x) << ',' << format_double(lb.l_dae_ex) << ',' << format_double(lb.l_ce) << ','
        << format_double(lb.l_total) << '\n';
  }
  write_text_file(path, out.str());
}

std::size_t SweepGrid::size() const {
  return eps_x.size() * eps_y.size() * h_x.size() * h_y.size() * topk.size() * explainers.size() *
         variants.size() * seeds.size();
}

SweepGrid parse_grid(const std::string& json_text) {
  SweepGrid grid;
  try {
    const json root = json::parse(json_text);
    reject_unknown(root, {"eps_x", "eps_y", "h_x", "h_y", "topk", "explainers", "variants", "seeds"}, "grid");
    read(root, "eps_x", grid.eps_x);
    read(root, "eps_y", grid.eps_y);
    read(root, "h_x", grid.h_x);
    read(root, "h_y", grid.h_y);
    if (root.contains("topk")) {
      grid.topk.clear();
      for (const json& v : root.at("topk")) {
        grid.topk.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
      }
    }
    if (root.contains("explainers")) {
      grid.explainers.clear();
      for (const json& v : root.at("explainers")) grid.explainers.push_back(parse_explainer(v.get<std::string>()));
    }
    if (root.contains("variants")) {
      grid.variants.clear();
      for (const json& v : root.at("variants")) grid.variants.push_back(parse_variant(v.get<std::string>()));
    }
    read(root, "seeds", grid.seeds);
  } catch (const json::exception& e) {
    throw Error(std::string("grid: ") + e.what());
  }
  if (grid.size() == 0) throw Error("grid: every axis needs at least one value");
  return grid;
}

std::vector<SweepPoint> expand_grid(const ExperimentConfig& base, const SweepGrid& grid) {
  std::vector<SweepPoint> points;
  points.reserve(grid.size());
  for (ExplainerKind explainer : grid.explainers) {
    for (Variant variant : grid.variants) {
      for (double ex : grid.eps_x) {
        for (double ey : grid.eps_y) {
          for (int hx : grid.h_x) {
            for (int hy : grid.h_y) {
              for (const auto& k : grid.topk) {
                for (std::uint64_t seed : grid.seeds) {
                  SweepPoint p{base, seed};
                  p.config.explainer = explainer;
                  set_variant(p.config.attack, variant);
                  p.config.eps_x = ex;
                  p.config.eps_y = ey;
                  p.config.attack.h_x = hx;
                  p.config.attack.h_y = hy;
                  p.config.attack.topk = k;
                  points.push_back(std::move(p));
                }
              }
            }
          }
        }
      }
    }
  }
  return points;
}

namespace {

std::string group_key(const ResultRow& r) {
  std::ostringstream k;
  k << r.dataset << ',' << r.variant << ',' << r.explainer << ',' << format_double(r.eps_x) << ','
    << format_double(r.eps_y) << ',' << r.h_x << ',' << r.h_y << ',' << opt_text(r.topk);
  return k.str();
}

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
}

}  // namespace

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const ResultRow*>> groups;
  for (const ResultRow& r : rows) {
    if (!r.error.empty() || !r.auc || !r.ap) continue;
    const std::string key = group_key(r);
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&r);
  }
  std::vector<SummaryRow> out;
  for (const std::string& key : order) {
    const auto& members = groups[key];
    SummaryRow s;
    s.key = *members.front();
    s.runs = members.size();
    std::vector<double> aucs;
    std::vector<double> aps;
    for (const ResultRow* r : members) {
      aucs.push_back(*r->auc);
      aps.push_back(*r->ap);
    }
    mean_std(aucs, s.auc_mean, s.auc_std);
    mean_std(aps, s.ap_mean, s.ap_std);
    out.push_back(s);
  }
  return out;
}

void write_summary(const std::vector<SummaryRow>& rows, const fs::path& path) {
  std::ostringstream out;
  out << "dataset,variant,explainer,eps_x,eps_y,h_x,h_y,topk,runs,auc_mean,auc_std,ap_mean,ap_std\n";
  for (const SummaryRow& s : rows) {
    out << group_key(s.key) << ',' << s.runs << ',' << format_double(s.auc_mean) << ','
        << format_double(s.auc_std) << ',' << format_double(s.ap_mean) << ',' << format_double(s.ap_std) << '\n';
  }
  write_text_file(path, out.str());
}

void write_plot_data(const std::vector<SummaryRow>& rows, const fs::path& out_dir) {
  std::ostringstream eps;
  eps << "dataset,variant,explainer,h_x,h_y,topk,eps_x,eps_y,auc_mean,auc_std\n";
  std::ostringstream topk;
  topk << "dataset,variant,explainer,eps_x,eps_y,h_x,h_y,topk,auc_mean,auc_std\n";
  std::ostringstream hhop;
  hhop << "dataset,variant,explainer,eps_x,eps_y,topk,h_x,h_y,auc,auc_no_hop,delta_auc\n";

  std::map<std::string, double> no_hop;
  auto hop_free_key = [](const ResultRow& r) {
    std::ostringstream k;
    k << r.dataset << ',' << r.variant << ',' << r.explainer << ',' << format_double(r.eps_x) << ','
      << format_double(r.eps_y) << ',' << opt_text(r.topk);
    return k.str();
  };
  for (const SummaryRow& s : rows) {
    if (s.key.h_x == 0 && s.key.h_y == 0) no_hop[hop_free_key(s.key)] = s.auc_mean;
  }
  for (const SummaryRow& s : rows) {
    const ResultRow& r = s.key;
    eps << r.dataset << ',' << r.variant << ',' << r.explainer << ',' << r.h_x << ',' << r.h_y << ','
        << opt_text(r.topk) << ',' << format_double(r.eps_x) << ',' << format_double(r.eps_y) << ','
        << format_double(s.auc_mean) << ',' << format_double(s.auc_std) << '\n';
    if (r.topk) {
      topk << group_key(r) << ',' << format_double(s.auc_mean) << ',' << format_double(s.auc_std) << '\n';
    }
    const auto base = no_hop.find(hop_free_key(r));
    if (base != no_hop.end()) {
      hhop << hop_free_key(r) << ',' << r.h_x << ',' << r.h_y << ',' << format_double(s.auc_mean) << ','
           << format_double(base->second) << ',' << format_double(s.auc_mean - base->second) << '\n';
    }
  }
  write_text_file(out_dir / "plot_eps.csv", eps.str());
  write_text_file(out_dir / "plot_topk.csv", topk.str());
  write_text_file(out_dir / "plot_hhop.csv", hhop.str());
}

std::vector<ResultRow> run_sweep(const ExperimentConfig& base, const SweepGrid& grid, int jobs,
                                 const fs::path& out_dir) {
  if (jobs < 1) throw Error("sweep: jobs must be at least 1");
  const std::vector<SweepPoint> points = expand_grid(base, grid);
  for (const SweepPoint& p : points) p.config.validate();
  fs::create_directories(out_dir);
  const fs::path results_path = out_dir / "results.csv";
  write_text_file(results_path, result_header() + "\n");

  // Graph, target model and explanation depend only on (explainer, seed).
  std::mutex cache_mutex;
  std::map<std::pair<int, std::uint64_t>, std::shared_ptr<const Base>> cache;
  auto base_for = [&](const SweepPoint& p) {
    std::lock_guard<std::mutex> lock(cache_mutex);
    auto& slot = cache[{static_cast<int>(p.config.explainer), p.seed}];
    if (!slot) slot = std::make_shared<const Base>(prepare_base(p.config, p.seed));
    return slot;
  };

  std::vector<ResultRow> rows(points.size());
  std::mutex write_mutex;
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      const SweepPoint& p = points[i];
      ResultRow row;
      try {
        const auto b = base_for(p);
        Prepared prepared{b->graph, b->target, b->explanation, privatize_for(p.config, b->graph, p.seed)};
        row = attack_and_evaluate(p.config, prepared, p.seed).row;
      } catch (const std::exception& e) {
        row.dataset = p.config.dataset_name();
        row.variant = to_string(p.config.attack.variant);
        row.explainer = to_string(p.config.explainer);
        row.eps_x = p.config.eps_x;
        row.eps_y = p.config.eps_y;
        row.h_x = p.config.attack.h_x;
        row.h_y = p.config.attack.h_y;
        row.topk = p.config.attack.topk;
        row.seed = p.seed;
        row.error = e.what();
      }
      std::lock_guard<std::mutex> lock(write_mutex);
      std::ofstream out(results_path, std::ios::app);
      out << format_row(row) << '\n';
      rows[i] = std::move(row);
    }
  };
  std::vector<std::thread> threads;
  const int count = std::min<int>(jobs, static_cast<int>(std::max<std::size_t>(1, points.size())));
  for (int t = 1; t < count; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  const std::vector<SummaryRow> summary = summarize(rows);
  write_summary(summary, out_dir / "summary.csv");
  write_plot_data(summary, out_dir);
  return rows;
}

}  // namespace reconxf
