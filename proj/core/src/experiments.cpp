#include "understudy/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "json.hpp"
#include "understudy/dsep.hpp"
#include "understudy/network_io.hpp"

namespace understudy {

std::string_view model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kBn:
      return "BN";
    case ModelKind::kNn:
      return "NN";
    case ModelKind::kNnReg:
      return "NN+REG";
    case ModelKind::kNnCor:
      return "NN+COR";
  }
  return "BN";
}

ModelKind parse_model(std::string_view text) {
  if (text == "BN" || text == "bn") return ModelKind::kBn;
  if (text == "NN" || text == "nn") return ModelKind::kNn;
  if (text == "NN+REG" || text == "nn-reg") return ModelKind::kNnReg;
  if (text == "NN+COR" || text == "nn-cor") return ModelKind::kNnCor;
  throw std::invalid_argument("unknown model '" + std::string(text) + "'");
}

std::string_view dag_mode_name(DagMode mode) {
  switch (mode) {
    case DagMode::kBase:
      return "base";
    case DagMode::kRemove:
      return "remove";
    case DagMode::kAdd:
      return "add";
  }
  return "base";
}

DagMode parse_dag_mode(std::string_view text) {
  if (text == "base") return DagMode::kBase;
  if (text == "remove" || text == "remove-one") return DagMode::kRemove;
  if (text == "add" || text == "add-one") return DagMode::kAdd;
  throw std::invalid_argument("unknown DAG mode '" + std::string(text) + "'");
}

namespace {

Strategy strategy_of(ModelKind kind) {
  switch (kind) {
    case ModelKind::kNnReg:
      return Strategy::kReg;
    case ModelKind::kNnCor:
      return Strategy::kCor;
    default:
      return Strategy::kPlain;
  }
}

std::string strategy_label(ModelKind kind) {
  return kind == ModelKind::kBn ? "mle-k2" : std::string(strategy_name(strategy_of(kind)));
}

std::size_t roster_rank(const std::string& model) {
  return static_cast<std::size_t>(parse_model(model));
}

std::size_t mode_rank(const std::string& mode) {
  return static_cast<std::size_t>(parse_dag_mode(mode));
}

}  // namespace

// ---------------------------------------------------------------- config

void ExperimentConfig::validate() const {
  if (train_sizes.empty()) throw std::invalid_argument("config: train_sizes is empty");
  for (std::size_t s : train_sizes) {
    if (s == 0) throw std::invalid_argument("config: train sizes must be at least 1");
  }
  if (seeds.empty()) throw std::invalid_argument("config: at least one seed is required");
  if (models.empty()) throw std::invalid_argument("config: models is empty");
  if (sample_query_count == 0) throw std::invalid_argument("config: sample_query_count is 0");
  for (DagMode m : variants.modes) {
    if (m == DagMode::kBase) throw std::invalid_argument("config: 'base' is not a variant mode");
  }
  TrainConfig probe = train;
  probe.strategy = Strategy::kPlain;
  probe.validate(0);
}

ExperimentConfig parse_experiment_config(const std::string& json_text,
                                         const std::filesystem::path& base_dir) {
  using nlohmann::json;
  ExperimentConfig cfg;
  try {
    const json doc = json::parse(json_text);
    auto resolve = [&](const std::string& p) {
      std::filesystem::path path(p);
      return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
    };
    cfg.network_path = resolve(doc.at("network").get<std::string>());
    if (doc.contains("train_sizes")) cfg.train_sizes = doc["train_sizes"].get<std::vector<std::size_t>>();
    if (doc.contains("seeds")) cfg.seeds = doc["seeds"].get<std::vector<std::uint64_t>>();
    if (doc.contains("models")) {
      cfg.models.clear();
      for (const auto& m : doc["models"]) cfg.models.push_back(parse_model(m.get<std::string>()));
    }
    if (doc.contains("train")) {
      const auto& t = doc["train"];
      cfg.train.epochs = t.value("epochs", cfg.train.epochs);
      cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
      cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
      cfg.train.alpha = t.value("alpha", cfg.train.alpha);
      cfg.train.reg_batch_size = t.value("reg_batch_size", cfg.train.reg_batch_size);
      cfg.train.hidden = t.value("hidden", cfg.train.hidden);
    }
    if (doc.contains("dag_variants")) {
      const auto& v = doc["dag_variants"];
      for (const auto& m : v.value("modes", json::array())) {
        cfg.variants.modes.push_back(parse_dag_mode(m.get<std::string>()));
      }
      cfg.variants.count = v.value("count", cfg.variants.count);
      cfg.variants.seed = v.value("seed", cfg.variants.seed);
    }
    if (doc.contains("output_dir")) cfg.output_dir = resolve(doc["output_dir"].get<std::string>());
    cfg.sample_query_count = doc.value("sample_query_count", cfg.sample_query_count);
    cfg.query_seed = doc.value("query_seed", cfg.query_seed);
    cfg.max_jobs = doc.value("max_jobs", cfg.max_jobs);
    cfg.record_runtime = doc.value("record_runtime", cfg.record_runtime);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed experiment config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return parse_experiment_config(read_text_file(path), path.parent_path());
}

// ---------------------------------------------------------------- DAG perturbation

Dag perturb_dag(const Dag& dag, DagMode mode, Rng& rng) {
  std::vector<Edge> edges = dag.edges();
  if (mode == DagMode::kRemove) {
    if (edges.empty()) throw NetworkError("cannot remove an edge from an edgeless DAG");
    edges.erase(edges.begin() + static_cast<std::ptrdiff_t>(rng.uniform_index(edges.size())));
    return Dag(dag.variables(), std::move(edges));
  }
  if (mode == DagMode::kAdd) {
    std::vector<Edge> candidates;
    for (std::size_t p = 0; p < dag.size(); ++p) {
      for (std::size_t c = 0; c < dag.size(); ++c) {
        if (p == c || dag.has_edge(p, c)) continue;
        edges.emplace_back(p, c);
        if (Dag::is_acyclic(dag.size(), edges)) candidates.emplace_back(p, c);
        edges.pop_back();
      }
    }
    if (candidates.empty()) throw NetworkError("no edge can be added without creating a cycle");
    edges.push_back(candidates[rng.uniform_index(candidates.size())]);
    return Dag(dag.variables(), std::move(edges));
  }
  return dag;
}

std::vector<Dag> dag_variants(const Dag& dag, DagMode mode, std::size_t count, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "dag-variant", static_cast<std::uint64_t>(mode));
  std::vector<Dag> out;
  std::set<std::vector<Edge>> seen;
  // Plenty of attempts for the handful of legal perturbations of a small DAG.
  for (std::size_t attempt = 0; out.size() < count && attempt < 1000 * (count + 1); ++attempt) {
    Dag variant = perturb_dag(dag, mode, rng);
    std::vector<Edge> key = variant.edges();
    std::sort(key.begin(), key.end());
    if (seen.insert(key).second) out.push_back(std::move(variant));
  }
  if (out.size() < count) {
    throw NetworkError("only " + std::to_string(out.size()) + " distinct '" +
                       std::string(dag_mode_name(mode)) + "' variants exist");
  }
  return out;
}

Dataset training_set(const DiscreteBayesNet& truth, std::size_t size, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "data", size);
  Dataset data = forward_sample(truth, rng, size);
  data.seed = seed;
  return data;
}

EvaluationSets build_evaluation_sets(const DiscreteBayesNet& truth,
                                     const ExperimentConfig& config) {
  Rng rng = Rng::stream(config.query_seed, "query-set");
  return {build_total_query_set(truth),
          build_sample_query_set(truth, rng, config.sample_query_count)};
}

// ---------------------------------------------------------------- runs

namespace {

struct Job {
  ModelKind model;
  std::size_t train_size;
  std::uint64_t seed;
  DagMode mode;
  std::string variant;
  const Dag* dag;
  const std::vector<IndependenceRelation>* relations;
};

RunRecord run_job(const Job& job, const ExperimentConfig& config, const DiscreteBayesNet& truth,
                  const EvaluationSets& sets) {
  const auto started = std::chrono::steady_clock::now();
  const Dataset data = training_set(truth, job.train_size, job.seed);

  RunRecord record;
  record.model = std::string(model_name(job.model));
  record.strategy = strategy_label(job.model);
  record.train_size = job.train_size;
  record.seed = job.seed;
  record.dag_variant = job.variant;
  record.dag_mode = std::string(dag_mode_name(job.mode));

  if (job.model == ModelKind::kBn) {
    const FittedNetwork fitted = fit_mle_k2(*job.dag, data);
    const Predictor predictor = make_bn_predictor(fitted.net);
    const MaeReport total = evaluate(predictor, sets.total);
    const MaeReport sample = evaluate(predictor, sets.sample);
    record.total_mae = total.aggregate;
    record.sample_mae = sample.aggregate;
    record.fallback_count = total.fallback_count + sample.fallback_count;
  } else {
    TrainConfig tc = config.train;
    tc.strategy = strategy_of(job.model);
    tc.seed = job.seed;
    static const std::vector<IndependenceRelation> kNone;
    const auto& relations = tc.strategy == Strategy::kPlain ? kNone : *job.relations;
    const TrainResult trained = train_understudy(truth.dag(), data, tc, relations);
    const Layout layout = Layout::from_dag(truth.dag());
    const Predictor predictor = make_understudy_predictor(trained.params, layout);
    record.total_mae = evaluate(predictor, sets.total).aggregate;
    record.sample_mae = evaluate(predictor, sets.sample).aggregate;
  }
  if (config.record_runtime) {
    record.runtime_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  }
  return record;
}

std::string describe(const Job& job) {
  return std::string(model_name(job.model)) + " size=" + std::to_string(job.train_size) +
         " seed=" + std::to_string(job.seed) + " dag=" + job.variant;
}

std::vector<RunRecord> run_jobs(const std::vector<Job>& jobs, const ExperimentConfig& config,
                                const DiscreteBayesNet& truth, const EvaluationSets& sets) {
  std::vector<RunRecord> records(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        records[i] = run_job(jobs[i], config, truth, sets);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::size_t threads = config.max_jobs == 0 ? std::thread::hardware_concurrency()
                                             : config.max_jobs;
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(jobs.size(), 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      throw std::runtime_error("run " + describe(jobs[i]) + " failed: " + e.what());
    }
  }
  sort_records(records);
  return records;
}

}  // namespace

std::vector<RunRecord> run_sweep(const ExperimentConfig& config, const DiscreteBayesNet& truth) {
  config.validate();
  const EvaluationSets sets = build_evaluation_sets(truth, config);
  const auto relations = enumerate_relations(truth.dag());
  std::vector<Job> jobs;
  for (std::size_t size : config.train_sizes) {
    for (std::uint64_t seed : config.seeds) {
      for (ModelKind model : config.models) {
        jobs.push_back({model, size, seed, DagMode::kBase, "base", &truth.dag(), &relations});
      }
    }
  }
  return run_jobs(jobs, config, truth, sets);
}

std::vector<RunRecord> run_sweep(const ExperimentConfig& config) {
  return run_sweep(config, load_network(config.network_path));
}

std::vector<RunRecord> run_robustness(const ExperimentConfig& config,
                                      const DiscreteBayesNet& truth) {
  config.validate();
  const EvaluationSets sets = build_evaluation_sets(truth, config);

  struct Variant {
    DagMode mode;
    std::string id;
    Dag dag;
    std::vector<IndependenceRelation> relations;
  };
  std::vector<Variant> variants;
  variants.push_back({DagMode::kBase, "base", truth.dag(), enumerate_relations(truth.dag())});
  for (DagMode mode : config.variants.modes) {
    auto dags = dag_variants(truth.dag(), mode, config.variants.count, config.variants.seed);
    for (std::size_t v = 0; v < dags.size(); ++v) {
      auto relations = enumerate_relations(dags[v]);
      variants.push_back({mode, std::string(dag_mode_name(mode)) + "-" + std::to_string(v),
                          std::move(dags[v]), std::move(relations)});
    }
  }

  std::vector<Job> jobs;
  for (const auto& variant : variants) {
    for (std::size_t size : config.train_sizes) {
      for (std::uint64_t seed : config.seeds) {
        for (ModelKind model : config.models) {
          if (model == ModelKind::kNn && variant.mode != DagMode::kBase) continue;
          jobs.push_back({model, size, seed, variant.mode, variant.id, &variant.dag,
                          &variant.relations});
        }
      }
    }
  }
  return run_jobs(jobs, config, truth, sets);
}

std::vector<RunRecord> run_robustness(const ExperimentConfig& config) {
  return run_robustness(config, load_network(config.network_path));
}

void sort_records(std::vector<RunRecord>& records) {
  auto key = [](const RunRecord& r) {
    return std::make_tuple(mode_rank(r.dag_mode), r.dag_variant, r.train_size, r.seed,
                           roster_rank(r.model));
  };
  std::stable_sort(records.begin(), records.end(),
                   [&](const RunRecord& a, const RunRecord& b) { return key(a) < key(b); });
}

// ---------------------------------------------------------------- reports

std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records) {
  using Key = std::tuple<std::size_t, std::size_t, std::size_t>;  // mode, size, model
  std::map<Key, std::vector<const RunRecord*>> groups;
  for (const auto& r : records) {
    groups[{mode_rank(r.dag_mode), r.train_size, roster_rank(r.model)}].push_back(&r);
  }
  auto stats = [](const std::vector<double>& xs, double& mean, double& sd, double& lo, double& hi) {
    const double n = static_cast<double>(xs.size());
    mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    sd = xs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    const double half = 1.96 * sd / std::sqrt(n);
    lo = mean - half;
    hi = mean + half;
  };
  std::vector<SummaryRow> rows;
  for (const auto& [key, members] : groups) {
    SummaryRow row;
    row.model = members.front()->model;
    row.train_size = members.front()->train_size;
    row.dag_mode = members.front()->dag_mode;
    row.n = members.size();
    std::vector<double> total, sample;
    for (const auto* r : members) {
      total.push_back(r->total_mae);
      sample.push_back(r->sample_mae);
    }
    stats(total, row.total_mean, row.total_sd, row.total_ci_low, row.total_ci_high);
    stats(sample, row.sample_mean, row.sample_sd, row.sample_ci_low, row.sample_ci_high);
    rows.push_back(row);
  }
  return rows;
}

namespace {

std::string fmt_double(double v, const char* spec = "%.12g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

std::string runs_csv(const std::vector<RunRecord>& records) {
  std::ostringstream out;
  out << "model,strategy,train_size,seed,dag_variant,dag_mode,total_mae,sample_mae,"
         "fallback_count,runtime_s\n";
  for (const auto& r : records) {
    out << r.model << ',' << r.strategy << ',' << r.train_size << ',' << r.seed << ','
        << r.dag_variant << ',' << r.dag_mode << ',' << fmt_double(r.total_mae) << ','
        << fmt_double(r.sample_mae) << ',' << r.fallback_count << ','
        << fmt_double(r.runtime_s, "%.3f") << '\n';
  }
  return out.str();
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::ostringstream out;
  out << "model,train_size,dag_mode,n,total_mae_mean,total_mae_sd,total_mae_ci_low,"
         "total_mae_ci_high,sample_mae_mean,sample_mae_sd,sample_mae_ci_low,sample_mae_ci_high\n";
  for (const auto& r : rows) {
    out << r.model << ',' << r.train_size << ',' << r.dag_mode << ',' << r.n << ','
        << fmt_double(r.total_mean) << ',' << fmt_double(r.total_sd) << ','
        << fmt_double(r.total_ci_low) << ',' << fmt_double(r.total_ci_high) << ','
        << fmt_double(r.sample_mean) << ',' << fmt_double(r.sample_sd) << ','
        << fmt_double(r.sample_ci_low) << ',' << fmt_double(r.sample_ci_high) << '\n';
  }
  return out.str();
}

void emit_reports(const std::vector<RunRecord>& records, const std::filesystem::path& output_dir) {
  if (records.empty()) throw std::invalid_argument("emit_reports: no records");
  std::filesystem::create_directories(output_dir);
  std::vector<RunRecord> sorted = records;
  sort_records(sorted);
  write_text_file(output_dir / "runs.csv", runs_csv(sorted));
  write_text_file(output_dir / "summary.csv", summary_csv(summarize(sorted)));
}

}  // namespace understudy
