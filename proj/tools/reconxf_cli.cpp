#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "reconxf/attack.hpp"
#include "reconxf/csv.hpp"
#include "reconxf/experiment.hpp"

namespace fs = std::filesystem;
using namespace reconxf;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> dataset;
  std::optional<std::string> variant;
  std::optional<std::string> explainer;
  std::optional<double> eps_x;
  std::optional<double> eps_y;
  std::optional<int> h_x;
  std::optional<int> h_y;
  std::optional<double> topk;

  void add_to(CLI::App* app, bool attack_flags) {
    app->add_option("--config", config, "JSON experiment configuration")->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "Global seed");
    if (!attack_flags) return;
    app->add_option("--variant", variant, "reconxf | reconx | gsef | gse | slapsfp");
    app->add_option("--hx", h_x, "Feature aggregation hops");
    app->add_option("--hy", h_y, "Label aggregation hops");
    app->add_option("--topk", topk, "TopK sparsification fraction");
  }

  ExperimentConfig resolve() const {
    ExperimentConfig c = config.empty() ? ExperimentConfig{} : load_config(config);
    if (seed) c.seed = *seed;
    if (dataset) c.dataset = *dataset;
    if (variant) {
      const AttackConfig layout = AttackConfig::for_variant(parse_variant(*variant));
      c.attack.variant = layout.variant;
      c.attack.x_branch = layout.x_branch;
      c.attack.e_branch = layout.e_branch;
    }
    if (explainer) c.explainer = parse_explainer(*explainer);
    if (eps_x) c.eps_x = *eps_x;
    if (eps_y) c.eps_y = *eps_y;
    if (h_x) c.attack.h_x = *h_x;
    if (h_y) c.attack.h_y = *h_y;
    if (topk) c.attack.topk = *topk;
    c.validate();
    return c;
  }
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

Graph load_graph_arg(const std::string& dataset) { return load_dataset(resolve_dataset(dataset)); }

void require(const fs::path& path) {
  if (!fs::exists(path)) throw Error("missing prerequisite " + path.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph reconstruction from explanations and privatized node data"};
  app.require_subcommand(1);
  Overrides ov;
  std::string out;
  std::string dataset;
  std::string model;
  std::string view_dir;
  std::string explanation_dir;
  std::string adjacency;
  std::string result_in;
  std::string grid_path;
  std::optional<double> tau;
  int jobs = 1;

  auto* synth = app.add_subcommand("synth", "Generate a stochastic block model dataset");
  ov.add_to(synth, false);
  synth->add_option("--out", out, "Output dataset directory")->required();

  auto* priv = app.add_subcommand("privatize", "Privatize features and labels (no edges are written)");
  ov.add_to(priv, false);
  priv->add_option("--dataset", dataset, "Dataset directory or name under $RECONXF_DATA_DIR")->required();
  priv->add_option("--eps-x", ov.eps_x, "Feature privacy budget");
  priv->add_option("--eps-y", ov.eps_y, "Label privacy budget");
  priv->add_option("--out", out, "Output view directory")->required();

  auto* train = app.add_subcommand("train-target", "Train the target GCN");
  ov.add_to(train, false);
  train->add_option("--dataset", dataset, "Dataset directory")->required();
  train->add_option("--out", out, "Output parameter file")->required();

  auto* expl = app.add_subcommand("explain", "Explain the target model's predictions");
  ov.add_to(expl, false);
  expl->add_option("--dataset", dataset, "Dataset directory")->required();
  expl->add_option("--model", model, "Target parameter file")->required();
  expl->add_option("--explainer", ov.explainer, "grad | gradinput | glime");
  expl->add_option("--tau", tau, "Also write a hardened mask keeping this fraction per node");
  expl->add_option("--out", out, "Output explanation directory")->required();

  auto* attack = app.add_subcommand("attack", "Reconstruct the adjacency from a view and explanations");
  ov.add_to(attack, true);
  attack->add_option("--view", view_dir, "Privatized view directory")->required();
  attack->add_option("--explanation", explanation_dir, "Explanation directory")->required();
  attack->add_option("--dataset", ov.dataset, "Dataset label for the result row");
  attack->add_option("--out", out, "Output directory")->required();

  auto* eval = app.add_subcommand("eval", "Score a reconstructed adjacency against the true edges");
  ov.add_to(eval, false);
  eval->add_option("--dataset", dataset, "Dataset directory")->required();
  eval->add_option("--adjacency", adjacency, "a_hat.csv from the attack stage")->required();
  eval->add_option("--result", result_in, "result.csv from the attack stage to complete");
  eval->add_option("--out", out, "Output directory")->required();

  auto* sweep = app.add_subcommand("sweep", "Run a hyperparameter grid");
  ov.add_to(sweep, true);
  sweep->add_option("--dataset", ov.dataset, "sbm or a dataset directory");
  sweep->add_option("--explainer", ov.explainer, "Explainer when the grid does not list any");
  sweep->add_option("--eps-x", ov.eps_x, "Feature privacy budget");
  sweep->add_option("--eps-y", ov.eps_y, "Label privacy budget");
  sweep->add_option("--grid", grid_path, "JSON grid; omitted axes use the full default grid")->check(CLI::ExistingFile);
  sweep->add_option("--jobs", jobs, "Concurrent runs")->check(CLI::PositiveNumber);
  sweep->add_option("--out", out, "Output directory")->required();

  auto* run = app.add_subcommand("run", "Full pipeline for every repetition of one configuration");
  ov.add_to(run, true);
  run->add_option("--dataset", ov.dataset, "sbm or a dataset directory");
  run->add_option("--explainer", ov.explainer, "grad | gradinput | glime");
  run->add_option("--eps-x", ov.eps_x, "Feature privacy budget");
  run->add_option("--eps-y", ov.eps_y, "Label privacy budget");
  run->add_option("--out", out, "Output directory (results.csv)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      const ExperimentConfig c = ov.resolve();
      SbmSpec spec = c.sbm;
      spec.seed = c.seed;
      save_dataset(generate_sbm(spec), out);
    } else if (*priv) {
      const ExperimentConfig c = ov.resolve();
      const Graph g = load_graph_arg(dataset);
      const PrivatizedView v = privatize(g, c.eps_x, c.eps_y, std::min(c.m, g.d), derive_seed(c.seed, 5));
      save_view(v, redact(g), out);
    } else if (*train) {
      const ExperimentConfig c = ov.resolve();
      TrainSpec spec = c.target;
      spec.seed = derive_seed(c.seed, 3);
      const TrainResult r = train_gcn(load_graph_arg(dataset), spec);
      save_params(r.params, out);
      std::printf("best epoch %d, validation accuracy %.4f\n", r.best_epoch, r.best_val_accuracy);
    } else if (*expl) {
      const ExperimentConfig c = ov.resolve();
      require(model);
      const Graph g = load_graph_arg(dataset);
      GlimeSpec glime = c.glime;
      glime.seed = derive_seed(c.seed, 4);
      ExplanationMatrix e = explain_target(load_params(model), g, c.explainer, glime);
      if (tau) e = harden(e, *tau);
      save_explanation(e, out, c.explainer == ExplainerKind::GLime ? std::optional<GlimeSpec>(glime) : std::nullopt);
    } else if (*attack) {
      const ExperimentConfig c = ov.resolve();
      require(fs::path(view_dir) / "meta.json");
      require(fs::path(explanation_dir) / "explanation.json");
      RedactedGraph meta;
      const PrivatizedView v = load_view(view_dir, &meta);
      const ExplanationMatrix e = load_explanation(explanation_dir);
      AttackConfig cfg = c.attack;
      cfg.seed = derive_seed(c.seed, 6);
      const AttackResult r = run_attack(meta, e, v, cfg);
      fs::create_directories(out);
      if (meta.n <= 5000) {
        save_adjacency_dense(r.A_hat, fs::path(out) / "a_hat.csv");
      } else {
        save_adjacency_edges(r.A_hat, 0.01, fs::path(out) / "a_hat.csv");
      }
      write_curves(r.curves, r.config.warmup_epochs, fs::path(out) / "curves.csv");
      ResultRow row;
      row.dataset = ov.dataset ? fs::path(*ov.dataset).filename().string() : std::string("dataset");
      row.variant = to_string(r.config.variant);
      row.explainer = to_string(e.kind);
      row.eps_x = v.feature_params.eps_x;
      row.eps_y = v.label_params.eps_y;
      row.h_x = r.config.h_x;
      row.h_y = r.config.h_y;
      row.topk = r.config.topk;
      row.seed = c.seed;
      row.runtime_s = r.runtime_s;
      row.l_dae_x = r.final_loss.l_dae_x;
      row.l_dae_ex = r.final_loss.l_dae_ex;
      row.l_ce = r.final_loss.l_ce;
      row.l_total = r.final_loss.l_total;
      write_text_file(fs::path(out) / "result.csv", result_header() + "\n" + format_row(row) + "\n");
    } else if (*eval) {
      const ExperimentConfig c = ov.resolve();
      const Graph g = load_graph_arg(dataset);
      const EstimatedAdjacency a = load_adjacency(adjacency, g.n);
      EvalSpec spec = default_eval_spec(g.n);
      if (c.negatives) spec.policy = *c.negatives;
      spec.seed = derive_seed(c.seed, 8);
      const LinkScores s = evaluate_links(a.values, g.A, spec);
      ResultRow row;
      if (!result_in.empty()) {
        const auto rows = read_results(result_in);
        if (rows.size() != 1) throw Error(result_in + ": expected exactly one result row");
        row = rows.front();
      } else {
        row.dataset = fs::path(dataset).filename().string();
      }
      row.auc = s.auc;
      row.ap = s.ap;
      write_text_file(fs::path(out) / "result.csv", result_header() + "\n" + format_row(row) + "\n");
      std::printf("auc %.6f ap %.6f\n", s.auc, s.ap);
    } else if (*sweep) {
      const ExperimentConfig c = ov.resolve();
      SweepGrid grid = grid_path.empty() ? SweepGrid{} : parse_grid(read_file(grid_path));
      if (ov.explainer && grid_path.empty()) grid.explainers = {c.explainer};
      const auto rows = run_sweep(c, grid, jobs, out);
      std::size_t failed = 0;
      for (const auto& r : rows) failed += !r.error.empty();
      std::printf("%zu runs, %zu failed; results in %s\n", rows.size(), failed, out.c_str());
      return failed == rows.size() && !rows.empty() ? 1 : 0;
    } else if (*run) {
      const ExperimentConfig c = ov.resolve();
      std::ostringstream csv;
      csv << result_header() << '\n';
      std::cout << result_header() << '\n';
      for (int r = 0; r < c.repetitions; ++r) {
        const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(r);
        const RunOutput o = run_experiment(c, seed);
        std::cout << format_row(o.row) << std::endl;
        csv << format_row(o.row) << '\n';
      }
      if (!out.empty()) write_text_file(fs::path(out) / "results.csv", csv.str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
