#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cssl/pipeline.hpp"
#include "cssl/synthetic.hpp"

namespace cssl {

/// Synthetic benchmark (graph + |D_u|), a real-data protocol, or a gen-data directory.
struct ExperimentConfig {
  std::optional<BenchmarkGraph> graph;
  Eigen::Index unlabelled = 1000;
  std::filesystem::path protocol;
  std::filesystem::path data_dir;  // instance_NNN/data.csv per trial, with `graph`
  std::vector<Method> methods = all_methods();
  int trials = 1;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::filesystem::path out = "out";
  PipelineConfig pipeline;
};

nlohmann::json to_json(const ExperimentConfig& c);
/// Overlay of a config file onto `base`. Throws Error{InvalidConfig}.
ExperimentConfig experiment_from_json(const nlohmann::json& j, ExperimentConfig base = {});

/// Synthetic partition sizes for a given |D_u|: 40 / |D_u| / 40 / |D_u|.
PartitionSizes synthetic_sizes(Eigen::Index unlabelled);
/// Per-instance synthetic config shared by gen-data and run.
SynthConfig instance_config(BenchmarkGraph g, Eigen::Index unlabelled, std::uint64_t master_seed, int instance);

struct ResultRow {
  std::string dataset;
  int trial = 0;
  std::uint64_t seed = 0;
  MethodResult result;
};

nlohmann::json row_to_json(const ResultRow& r);
ResultRow row_from_json(const nlohmann::json& j);
std::string row_key(const std::string& dataset, int trial, Method m);

/// Parses a JSONL result file. A trailing line that is truncated or does not
/// parse is dropped; with `repair` the file is cut back to its last complete row.
std::vector<ResultRow> read_results(const std::filesystem::path& path, bool repair = false);

struct RunSummary {
  int trials_run = 0;
  int trials_skipped = 0;
  int rows_written = 0;
  int error_rows = 0;
};

/// Executes methods x trials, appending rows to `<out>/results.jsonl` in trial
/// order (wall-clock seconds go to `<out>/timings.jsonl`). Rows already present
/// are skipped. `max_new_trials` >= 0 stops early, as an interruption would.
RunSummary run_experiment(const ExperimentConfig& cfg, int max_new_trials = -1);

struct SummaryRow {
  std::string dataset;
  Method method = Method::P_SUP;
  int n = 0;
  int errors = 0;
  double mean = 0, stddev = 0, min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
  double mean_acc = 0;
};

/// Linear-interpolation quantile (type 7) of a sorted sample.
double quantile_sorted(const std::vector<double>& sorted, double p);

/// Per (dataset, method) statistics of delta_u over non-error rows.
/// Throws Error{EmptyResults}.
std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);

/// "12.345 ± 6.789".
std::string mean_pm_std(double mean, double sd);

/// summary.csv, summary.json and deltas.csv under `dir`.
void write_report(const std::vector<ResultRow>& rows, const std::filesystem::path& dir);

}  // namespace cssl
