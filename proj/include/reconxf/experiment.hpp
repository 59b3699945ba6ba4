#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "reconxf/attack.hpp"
#include "reconxf/explain.hpp"
#include "reconxf/gnn.hpp"
#include "reconxf/graph.hpp"
#include "reconxf/metrics.hpp"
#include "reconxf/privacy.hpp"

namespace reconxf {

struct ExperimentConfig {
  std::string dataset = "sbm";  // "sbm" or a dataset directory
  SbmSpec sbm;
  ExplainerKind explainer = ExplainerKind::Grad;
  GlimeSpec glime;
  TrainSpec target;
  double eps_x = 0.01;
  double eps_y = 0.01;
  int m = 1;
  AttackConfig attack = AttackConfig::for_variant(Variant::ReconXF);
  std::optional<NegativePolicy> negatives;  // default chosen from the graph size
  int repetitions = 5;
  std::uint64_t seed = 0;

  void validate() const;
  /// Dataset label used in result rows.
  std::string dataset_name() const;
};

/// JSON object with optional keys; unknown keys are rejected so typos do not
/// silently fall back to defaults. The format is documented in the README.
ExperimentConfig parse_config(const std::string& json_text, const ExperimentConfig& base = {});
ExperimentConfig load_config(const std::filesystem::path& path, const ExperimentConfig& base = {});

/// Resolves a dataset argument: an existing directory, else a directory of
/// that name under $RECONXF_DATA_DIR.
std::filesystem::path resolve_dataset(const std::string& name);

/// One results.csv line. Field order is the column order.
struct ResultRow {
  std::string dataset;
  std::string variant;
  std::string explainer;
  double eps_x = 0.0;
  double eps_y = 0.0;
  int h_x = 0;
  int h_y = 0;
  std::optional<double> topk;
  std::uint64_t seed = 0;
  std::optional<double> auc;
  std::optional<double> ap;
  double runtime_s = 0.0;
  double l_dae_x = 0.0;
  double l_dae_ex = 0.0;
  double l_ce = 0.0;
  double l_total = 0.0;
  std::string error;  // empty on success
};

std::string result_header();
std::string format_row(const ResultRow& row);
ResultRow parse_row(const std::string& line);
std::vector<ResultRow> read_results(const std::filesystem::path& path);

/// Everything derived from one (dataset, seed) before the attack.
struct Prepared {
  Graph graph;
  GcnParams target;
  ExplanationMatrix explanation;
  PrivatizedView view;
};

/// Builds or loads the graph, trains the target model, explains it and
/// privatizes features and labels, all seeded from `seed`.
Graph build_graph(const ExperimentConfig& config, std::uint64_t seed);
ExplanationMatrix explain_target(const GcnParams& model, const Graph& graph, ExplainerKind kind,
                                 const GlimeSpec& glime);
Prepared prepare(const ExperimentConfig& config, std::uint64_t seed);

struct RunOutput {
  ResultRow row;
  AttackResult attack;
};

/// Full pipeline for one seed: prepare, attack, evaluate.
RunOutput run_experiment(const ExperimentConfig& config, std::uint64_t seed);
/// Attack and evaluation on already prepared inputs.
RunOutput attack_and_evaluate(const ExperimentConfig& config, const Prepared& prepared, std::uint64_t seed);

void write_curves(const std::vector<LossBreakdown>& curves, int warmup_epochs, const std::filesystem::path& path);

struct SweepGrid {
  std::vector<double> eps_x{0.01, 3.0, 8.0};
  std::vector<double> eps_y{0.01, 3.0, 8.0};
  std::vector<int> h_x{0, 2, 4, 8, 16};
  std::vector<int> h_y{0, 2};
  std::vector<std::optional<double>> topk{0.2, 0.4, 0.6, 0.8};
  std::vector<ExplainerKind> explainers{ExplainerKind::Grad};
  std::vector<Variant> variants{Variant::ReconXF};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};

  std::size_t size() const;
};

/// Filters a grid given as JSON ({"eps_x": [...], ...}) over the default.
SweepGrid parse_grid(const std::string& json_text);

struct SweepPoint {
  ExperimentConfig config;
  std::uint64_t seed = 0;
};

/// Cartesian product in a fixed order (explainer, variant, eps_x, eps_y, h_x,
/// h_y, topk, seed).
std::vector<SweepPoint> expand_grid(const ExperimentConfig& base, const SweepGrid& grid);

struct SummaryRow {
  ResultRow key;  // seed, metrics and losses unused
  std::size_t runs = 0;
  double auc_mean = 0.0;
  double auc_std = 0.0;
  double ap_mean = 0.0;
  double ap_std = 0.0;
};

/// Groups successful rows by everything except the seed; sample std (0 for
/// a single run).
std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);

/// Writes results.csv (appended as runs finish), summary.csv and the plot-data
/// files plot_eps.csv, plot_topk.csv and plot_hhop.csv into out_dir. Failed
/// runs are recorded with their error text and the sweep continues.
std::vector<ResultRow> run_sweep(const ExperimentConfig& base, const SweepGrid& grid, int jobs,
                                 const std::filesystem::path& out_dir);

void write_summary(const std::vector<SummaryRow>& rows, const std::filesystem::path& path);
void write_plot_data(const std::vector<SummaryRow>& rows, const std::filesystem::path& out_dir);

}  // namespace reconxf
