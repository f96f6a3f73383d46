#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "understudy/bayes_net.hpp"
#include "understudy/evaluation.hpp"
#include "understudy/training.hpp"

namespace understudy {

enum class ModelKind { kBn, kNn, kNnReg, kNnCor };

/// "BN", "NN", "NN+REG", "NN+COR".
std::string_view model_name(ModelKind kind);
/// Also accepts the lowercase CLI spellings bn, nn, nn-reg, nn-cor.
ModelKind parse_model(std::string_view text);

enum class DagMode { kBase, kRemove, kAdd };

std::string_view dag_mode_name(DagMode mode);
DagMode parse_dag_mode(std::string_view text);

struct DagVariantSpec {
  std::vector<DagMode> modes;  // kRemove and/or kAdd; base is always run
  std::size_t count = 5;       // variants per mode
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  std::filesystem::path network_path;
  std::vector<std::size_t> train_sizes = {50, 100, 250, 500, 1000, 2500, 5000, 10000};
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<ModelKind> models = {ModelKind::kBn, ModelKind::kNn, ModelKind::kNnReg,
                                   ModelKind::kNnCor};
  TrainConfig train;  // strategy and seed are set per run
  DagVariantSpec variants;
  std::filesystem::path output_dir = "results";
  std::size_t sample_query_count = 1000;
  std::uint64_t query_seed = 0;
  std::size_t max_jobs = 1;      // 0 = hardware concurrency
  bool record_runtime = false;   // false writes runtime_s as 0 so output is reproducible

  void validate() const;
};

/// JSON document mirroring ExperimentConfig; relative paths resolve
/// against `base_dir`.
ExperimentConfig parse_experiment_config(const std::string& json_text,
                                         const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct RunRecord {
  std::string model;
  std::string strategy;
  std::size_t train_size = 0;
  std::uint64_t seed = 0;
  std::string dag_variant;  // "base" or "<mode>-<i>"
  std::string dag_mode;     // "base", "remove" or "add"
  double total_mae = 0.0;
  double sample_mae = 0.0;
  std::size_t fallback_count = 0;
  double runtime_s = 0.0;
};

/// Removes one uniformly chosen edge, or adds one uniformly chosen absent
/// ordered pair that keeps the graph acyclic. Throws NetworkError when no
/// such perturbation exists.
Dag perturb_dag(const Dag& dag, DagMode mode, Rng& rng);

/// `count` pairwise distinct perturbations of one mode.
std::vector<Dag> dag_variants(const Dag& dag, DagMode mode, std::size_t count, std::uint64_t seed);

/// Training set shared by every model of a (train size, seed) cell.
Dataset training_set(const DiscreteBayesNet& truth, std::size_t size, std::uint64_t seed);

/// Query sets used by all runs: the exhaustive set and the sampled set.
struct EvaluationSets {
  QuerySet total;
  QuerySet sample;
};
EvaluationSets build_evaluation_sets(const DiscreteBayesNet& truth, const ExperimentConfig& config);

/// One record per (model, train size, seed) on the correct DAG.
std::vector<RunRecord> run_sweep(const ExperimentConfig& config, const DiscreteBayesNet& truth);
std::vector<RunRecord> run_sweep(const ExperimentConfig& config);

/// Base runs plus runs on perturbed DAGs for every configured mode. Plain
/// NN does not consume the DAG and is only run on the base setting.
std::vector<RunRecord> run_robustness(const ExperimentConfig& config,
                                      const DiscreteBayesNet& truth);
std::vector<RunRecord> run_robustness(const ExperimentConfig& config);

/// Sorted by (dag mode, variant, train size, seed, model roster order).
void sort_records(std::vector<RunRecord>& records);

struct SummaryRow {
  std::string model;
  std::size_t train_size = 0;
  std::string dag_mode;
  std::size_t n = 0;
  double total_mean = 0.0, total_sd = 0.0, total_ci_low = 0.0, total_ci_high = 0.0;
  double sample_mean = 0.0, sample_sd = 0.0, sample_ci_low = 0.0, sample_ci_high = 0.0;
};

/// Groups by model × train size × DAG mode; CI = mean ± 1.96·sd/√n with
/// the sample standard deviation.
std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records);

/// runs.csv contents: model,strategy,train_size,seed,dag_variant,dag_mode,
/// total_mae,sample_mae,fallback_count,runtime_s.
std::string runs_csv(const std::vector<RunRecord>& records);
std::string summary_csv(const std::vector<SummaryRow>& rows);

/// Writes runs.csv and summary.csv into `output_dir`.
void emit_reports(const std::vector<RunRecord>& records, const std::filesystem::path& output_dir);

}  // namespace understudy
