// Command-line front end: data generation, relation enumeration, training,
// evaluation and the two experiment drivers.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "understudy/bayes_net.hpp"
#include "understudy/dsep.hpp"
#include "understudy/evaluation.hpp"
#include "understudy/experiments.hpp"
#include "understudy/model.hpp"
#include "understudy/network_io.hpp"
#include "understudy/training.hpp"

namespace us = understudy;

namespace {

struct GenerateArgs {
  std::string net, out;
  std::size_t count = 0;
  std::uint64_t seed = 0;
};

struct DsepArgs {
  std::string net, out;
};

struct TrainArgs {
  std::string net, data, model, relations, out;
  us::TrainConfig config;
};

struct EvaluateArgs {
  std::string net, model_file, queries = "total", dump;
  std::size_t count = 1000;
  std::uint64_t seed = 0;
};

struct ConfigArgs {
  std::string config;
};

int run_generate(const GenerateArgs& a) {
  const auto net = us::load_network(a.net);
  const auto data = us::forward_sample(net, a.seed, a.count);
  us::save_dataset(net.dag(), data, a.out);
  std::cout << "wrote " << data.records.size() << " samples to " << a.out << "\n";
  return 0;
}

int run_dsep(const DsepArgs& a) {
  const auto net = us::load_network(a.net);
  const auto relations = us::enumerate_relations(net.dag());
  std::size_t unconditional = 0;
  for (const auto& r : relations) {
    std::cout << us::format_relation(net.dag(), r) << "\n";
    if (r.given.empty()) ++unconditional;
  }
  std::cout << relations.size() << " relations (" << unconditional
            << " with an empty conditioning set)\n";
  if (!a.out.empty()) {
    std::ostringstream text;
    us::write_relations(net.dag(), relations, text);
    us::write_text_file(a.out, text.str());
  }
  return 0;
}

int run_train(TrainArgs a) {
  const auto net = us::load_network(a.net);
  const auto& dag = net.dag();
  const auto data = us::load_dataset(dag, a.data);
  a.config.strategy = us::parse_strategy(a.model);

  std::vector<us::IndependenceRelation> relations;
  if (a.config.strategy != us::Strategy::kPlain) {
    if (a.relations.empty()) {
      relations = us::enumerate_relations(dag);
    } else {
      std::ifstream in(a.relations);
      if (!in) throw std::runtime_error("cannot open relation file " + a.relations);
      relations = us::read_relations(dag, in);
    }
  }
  const auto result = us::train_understudy(dag, data, a.config, relations);

  us::Checkpoint checkpoint{dag.variables(), us::Layout::from_dag(dag), result.params,
                            a.config.seed, a.config.to_map()};
  us::save_checkpoint(checkpoint, a.out);
  const auto& losses = result.history.target_loss;
  std::cout << "trained " << a.config.epochs << " epochs on " << data.records.size()
            << " samples; final target loss "
            << (losses.empty() ? 0.0 : losses.back()) << "\n";
  return 0;
}

int run_evaluate(const EvaluateArgs& a) {
  const auto truth = us::load_network(a.net);
  us::QuerySet queries;
  if (a.queries == "total") {
    queries = us::build_total_query_set(truth);
  } else if (a.queries == "sample") {
    us::Rng rng = us::Rng::stream(a.seed, "query-set");
    queries = us::build_sample_query_set(truth, rng, a.count);
  } else {
    throw std::invalid_argument("--queries must be 'total' or 'sample'");
  }
  if (!a.dump.empty()) {
    std::ofstream out(a.dump);
    us::write_query_set(truth.dag(), queries, out);
  }

  // The model file is either a checkpoint or a network to score as a BN.
  const auto doc = nlohmann::json::parse(us::read_text_file(a.model_file));
  std::optional<us::DiscreteBayesNet> bn;
  std::optional<us::Checkpoint> checkpoint;
  us::Layout layout;
  us::Predictor predictor;
  if (doc.contains("cpts")) {
    bn.emplace(us::parse_network(doc.dump()));
    predictor = us::make_bn_predictor(*bn);
  } else {
    checkpoint.emplace(us::parse_checkpoint(doc.dump()));
    layout = checkpoint->layout;
    if (layout != us::Layout::from_dag(truth.dag())) {
      throw std::invalid_argument("model layout does not match the network");
    }
    predictor = us::make_understudy_predictor(checkpoint->params, layout);
  }
  const auto report = us::evaluate(predictor, queries);
  std::printf("queries %zu (empty evidence %zu)\nmae %.6f\nfallbacks %zu\n", queries.size(),
              report.empty_evidence_queries, report.aggregate, report.fallback_count);
  return 0;
}

int run_experiment(const ConfigArgs& a, bool robustness) {
  const auto config = us::load_experiment_config(a.config);
  const auto records = robustness ? us::run_robustness(config) : us::run_sweep(config);
  us::emit_reports(records, config.output_dir);
  std::cout << records.size() << " runs written to " << config.output_dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Understudy networks: BN ground truth, d-separation and trained understudies"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Forward-sample a dataset from a network");
  generate->add_option("--net", gen.net, "Network JSON")->required();
  generate->add_option("--count", gen.count, "Number of samples")->required();
  generate->add_option("--seed", gen.seed, "Sampling seed")->required();
  generate->add_option("--out", gen.out, "Output CSV")->required();

  DsepArgs ds;
  auto* dsep = app.add_subcommand("dsep", "Enumerate the d-separation relations of a network");
  dsep->add_option("--net", ds.net, "Network JSON")->required();
  dsep->add_option("--out", ds.out, "Relation list file to write");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train an understudy network");
  train->add_option("--net", tr.net, "Network JSON (structure and state labels)")->required();
  train->add_option("--data", tr.data, "Training CSV")->required();
  train->add_option("--model", tr.model, "nn, nn-reg or nn-cor")
      ->required()
      ->check(CLI::IsMember({"nn", "nn-reg", "nn-cor"}));
  train->add_option("--relations", tr.relations,
                    "Relation list; defaults to the relations of the network's DAG");
  train->add_option("--alpha", tr.config.alpha, "Regularisation weight");
  train->add_option("--epochs", tr.config.epochs, "Training epochs");
  train->add_option("--hidden", tr.config.hidden, "Hidden layer width");
  train->add_option("--batch", tr.config.batch_size, "Batch size");
  train->add_option("--lr", tr.config.learning_rate, "Adam learning rate");
  train->add_option("--seed", tr.config.seed, "Training seed")->required();
  train->add_option("--out", tr.out, "Checkpoint to write")->required();

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint or network on a query set");
  evaluate->add_option("--net", ev.net, "Ground-truth network JSON")->required();
  evaluate->add_option("--model-file", ev.model_file, "Checkpoint or network JSON")->required();
  evaluate->add_option("--queries", ev.queries, "total or sample")
      ->check(CLI::IsMember({"total", "sample"}));
  evaluate->add_option("--count", ev.count, "Sample query count");
  evaluate->add_option("--seed", ev.seed, "Query sampling seed")->required();
  evaluate->add_option("--dump-queries", ev.dump, "Write the query set as JSON lines");

  ConfigArgs sw, rb;
  auto* sweep = app.add_subcommand("sweep", "Train-size sweep on the correct DAG");
  sweep->add_option("--config", sw.config, "Experiment config JSON")->required();
  auto* robust = app.add_subcommand("robustness", "Base vs perturbed-DAG comparison");
  robust->add_option("--config", rb.config, "Experiment config JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*generate) return run_generate(gen);
    if (*dsep) return run_dsep(ds);
    if (*train) return run_train(tr);
    if (*evaluate) return run_evaluate(ev);
    if (*sweep) return run_experiment(sw, false);
    if (*robust) return run_experiment(rb, true);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
