#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "test_support.hpp"
#include "understudy/experiments.hpp"

namespace {

using namespace understudy;

ExperimentConfig quick_config() {
  ExperimentConfig config;
  config.train_sizes = {20};
  config.seeds = {0};
  config.train.epochs = 2;
  config.train.hidden = 4;
  config.sample_query_count = 50;
  return config;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

TEST(PerturbDag, RemoveAndAddChangeEdgeCountByOne) {
  const auto net = testing_support::asia();
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const Dag removed = perturb_dag(net.dag(), DagMode::kRemove, rng);
    EXPECT_EQ(removed.edges().size(), 7u);
    const Dag added = perturb_dag(net.dag(), DagMode::kAdd, rng);
    EXPECT_EQ(added.edges().size(), 9u);
    EXPECT_TRUE(Dag::is_acyclic(added.size(), added.edges()));
    EXPECT_EQ(added.topological_order().size(), 7u);
  }
}

TEST(PerturbDag, ExhaustedModesThrow) {
  const Dag chain({{"A", {"0", "1"}}, {"B", {"0", "1"}}}, std::vector<NamedEdge>{{"A", "B"}});
  Rng rng(2);
  EXPECT_THROW(perturb_dag(chain, DagMode::kAdd, rng), NetworkError);
  const Dag empty(testing_support::binary_variables(2), std::vector<Edge>{});
  EXPECT_THROW(perturb_dag(empty, DagMode::kRemove, rng), NetworkError);
}

TEST(PerturbDag, VariantsAreDistinctAndChangeRelations) {
  const auto net = testing_support::asia();
  const auto base_count = enumerate_relations(net.dag()).size();
  for (DagMode mode : {DagMode::kRemove, DagMode::kAdd}) {
    const auto variants = dag_variants(net.dag(), mode, 5, 0);
    ASSERT_EQ(variants.size(), 5u);
    for (std::size_t i = 0; i < variants.size(); ++i) {
      EXPECT_NE(enumerate_relations(variants[i]).size(), base_count);
      for (std::size_t j = 0; j < i; ++j) EXPECT_NE(variants[i].edges(), variants[j].edges());
    }
    EXPECT_THROW(dag_variants(net.dag(), mode, 100, 0), NetworkError);
  }
}

TEST(TrainingSet, SharedAcrossModelsAndSeeded) {
  const auto net = testing_support::asia();
  EXPECT_EQ(training_set(net, 100, 3).records, training_set(net, 100, 3).records);
  EXPECT_NE(training_set(net, 100, 3).records, training_set(net, 100, 4).records);
  EXPECT_EQ(training_set(net, 100, 3).size(), 100u);
}

TEST(RunSweep, RecordCounts) {
  const auto net = testing_support::asia();
  auto config = quick_config();
  config.models = {ModelKind::kBn};
  config.train_sizes = {100};
  EXPECT_EQ(run_sweep(config, net).size(), 1u);

  config = quick_config();
  config.train_sizes = {10, 20, 30, 40, 50};
  config.seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  config.train.epochs = 1;
  const auto records = run_sweep(config, net);
  ASSERT_EQ(records.size(), 200u);
  for (const auto& r : records) {
    EXPECT_GE(r.total_mae, 0.0);
    EXPECT_LE(r.total_mae, 1.0);
    EXPECT_EQ(r.dag_variant, "base");
  }
}

TEST(RunSweep, RepeatedRunsGiveIdenticalBytes) {
  const auto net = testing_support::asia();
  auto config = quick_config();
  config.seeds = {0, 1};
  const auto first = runs_csv(run_sweep(config, net));
  const auto second = runs_csv(run_sweep(config, net));
  EXPECT_EQ(first, second);
  config.max_jobs = 3;
  EXPECT_EQ(runs_csv(run_sweep(config, net)), first);
}

TEST(RunSweep, BnOnTrueStructureBeatsUniformGuessing) {
  const auto net = testing_support::asia();
  auto config = quick_config();
  config.models = {ModelKind::kBn};
  config.train_sizes = {5000};
  const auto records = run_sweep(config, net);
  ASSERT_EQ(records.size(), 1u);
  EXPECT_LT(records[0].total_mae, 0.05);
  EXPECT_EQ(records[0].strategy, "mle-k2");
}

TEST(RunRobustness, RecordCounts) {
  const auto net = testing_support::asia();
  auto config = quick_config();
  config.seeds = {0, 1, 2, 3, 4};
  config.models = {ModelKind::kBn, ModelKind::kNnReg, ModelKind::kNnCor};
  config.train.epochs = 1;
  EXPECT_EQ(run_robustness(config, net).size(), 15u);
  config.variants.modes = {DagMode::kRemove};
  config.variants.count = 5;
  const auto records = run_robustness(config, net);
  ASSERT_EQ(records.size(), 15u + 75u);
  std::size_t miss = 0;
  for (const auto& r : records) miss += r.dag_mode == "remove";
  EXPECT_EQ(miss, 75u);
}

TEST(RunRobustness, PlainNetworkOnlyRunsOnBase) {
  const auto net = testing_support::asia();
  auto config = quick_config();
  config.models = {ModelKind::kNn, ModelKind::kBn};
  config.variants.modes = {DagMode::kAdd};
  config.variants.count = 2;
  config.train.epochs = 1;
  const auto records = run_robustness(config, net);
  std::map<std::string, int> by_model;
  for (const auto& r : records) by_model[r.model + "/" + r.dag_mode]++;
  EXPECT_EQ(by_model["NN/base"], 1);
  EXPECT_EQ(by_model["NN/add"], 0);
  EXPECT_EQ(by_model["BN/add"], 2);
}

TEST(Reports, SummaryOfOneGroup) {
  std::vector<RunRecord> records;
  for (std::uint64_t s = 0; s < 10; ++s) {
    records.push_back({"NN", "plain", 100, s, "base", "base", 0.1, 0.05, 0, 0.0});
  }
  const auto rows = summarize(records);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].n, 10u);
  EXPECT_NEAR(rows[0].total_sd, 0.0, 1e-15);
  EXPECT_NEAR(rows[0].total_ci_low, rows[0].total_ci_high, 1e-15);
}

TEST(Reports, ConfidenceInterval) {
  std::vector<RunRecord> records;
  const std::vector<double> values = {0.1, 0.2, 0.3, 0.4};
  for (std::size_t i = 0; i < values.size(); ++i) {
    records.push_back({"BN", "mle-k2", 50, i, "base", "base", values[i], values[i], 0, 0.0});
  }
  const auto row = summarize(records).at(0);
  const double sd = std::sqrt((0.0225 + 0.0025 + 0.0025 + 0.0225) / 3.0);
  EXPECT_NEAR(row.total_mean, 0.25, 1e-15);
  EXPECT_NEAR(row.total_sd, sd, 1e-15);
  EXPECT_NEAR(row.total_ci_high - row.total_mean, 1.96 * sd / 2.0, 1e-15);
}

TEST(Reports, SummaryRecomputableFromRunsCsv) {
  const auto net = testing_support::asia();
  auto config = quick_config();
  config.seeds = {0, 1, 2};
  config.train_sizes = {20, 40};
  const auto records = run_sweep(config, net);
  const auto dir = std::filesystem::temp_directory_path() / "understudy_reports_test";
  std::filesystem::remove_all(dir);
  emit_reports(records, dir);
  std::ifstream runs_in(dir / "runs.csv"), summary_in(dir / "summary.csv");
  std::stringstream runs_text, summary_text;
  runs_text << runs_in.rdbuf();
  summary_text << summary_in.rdbuf();
  std::filesystem::remove_all(dir);

  const auto runs = parse_csv(runs_text.str());
  ASSERT_EQ(runs[0].size(), 10u);
  EXPECT_EQ(runs[0][0], "model");
  EXPECT_EQ(runs[0][9], "runtime_s");
  std::map<std::string, std::pair<double, int>> sums;
  for (std::size_t i = 1; i < runs.size(); ++i) {
    auto& s = sums[runs[i][0] + "/" + runs[i][2] + "/" + runs[i][5]];
    s.first += std::stod(runs[i][6]);
    s.second += 1;
  }
  const auto summary = parse_csv(summary_text.str());
  ASSERT_EQ(summary.size(), sums.size() + 1);
  for (std::size_t i = 1; i < summary.size(); ++i) {
    const auto& s = sums.at(summary[i][0] + "/" + summary[i][1] + "/" + summary[i][2]);
    EXPECT_EQ(std::stoi(summary[i][3]), s.second);
    EXPECT_NEAR(std::stod(summary[i][4]), s.first / s.second, 1e-10);
  }
  EXPECT_THROW(emit_reports({}, dir), std::invalid_argument);
}

TEST(Config, ParsesDocumentAndResolvesPaths) {
  const auto config = parse_experiment_config(R"({
    "network": "asia.json",
    "train_sizes": [100],
    "seeds": [0, 1, 2, 3, 4],
    "models": ["BN", "NN+REG", "nn-cor"],
    "train": {"epochs": 10, "alpha": 5},
    "dag_variants": {"modes": ["remove", "add"], "count": 5, "seed": 3},
    "output_dir": "out",
    "max_jobs": 2
  })", "/data");
  EXPECT_EQ(config.network_path, std::filesystem::path("/data/asia.json"));
  EXPECT_EQ(config.output_dir, std::filesystem::path("/data/out"));
  EXPECT_EQ(config.models.size(), 3u);
  EXPECT_EQ(config.models[2], ModelKind::kNnCor);
  EXPECT_EQ(config.train.epochs, 10u);
  EXPECT_EQ(config.train.alpha, 5.0);
  EXPECT_EQ(config.train.batch_size, 16u);
  EXPECT_EQ(config.variants.modes.size(), 2u);
  EXPECT_EQ(config.variants.seed, 3u);
  EXPECT_EQ(config.max_jobs, 2u);
}

TEST(Config, RejectsInvalidDocuments) {
  EXPECT_THROW(parse_experiment_config(R"({"network": "a.json", "seeds": []})"),
               std::invalid_argument);
  EXPECT_THROW(parse_experiment_config(R"({"network": "a.json", "train_sizes": [0]})"),
               std::invalid_argument);
  EXPECT_THROW(parse_experiment_config(R"({"network": "a.json", "models": ["GP"]})"),
               std::invalid_argument);
  EXPECT_THROW(parse_experiment_config(R"({"seeds": [1]})"), std::invalid_argument);
  EXPECT_THROW(parse_experiment_config("not json"), std::invalid_argument);
}

}  // namespace
