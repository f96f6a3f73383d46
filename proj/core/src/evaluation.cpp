#include "understudy/evaluation.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "json.hpp"
#include "understudy/training.hpp"

namespace understudy {

std::size_t QuerySet::empty_evidence_count() const {
  std::size_t count = 0;
  for (const auto& q : queries) {
    bool empty = true;
    for (int s : q.evidence) empty = empty && s == kUnobserved;
    if (empty) ++count;
  }
  return count;
}

namespace {

Query make_query(const DiscreteBayesNet& net, Assignment evidence) {
  Query q;
  for (std::size_t v = 0; v < net.size(); ++v) {
    if (evidence[v] != kUnobserved) continue;
    auto dist = variable_elimination(net, evidence, v);
    if (!dist) throw std::runtime_error("ground-truth network gives the query evidence zero mass");
    q.targets.push_back(v);
    q.truth.push_back(std::move(*dist));
  }
  q.evidence = std::move(evidence);
  return q;
}

/// Odometer over the joint states of `vars`, last variable fastest.
bool next_states(const Dag& dag, const std::vector<std::size_t>& vars, std::vector<int>& states) {
  for (std::size_t i = vars.size(); i-- > 0;) {
    if (static_cast<std::size_t>(++states[i]) < dag.cardinality(vars[i])) return true;
    states[i] = 0;
  }
  return false;
}

}  // namespace

QuerySet build_total_query_set(const DiscreteBayesNet& truth) {
  const std::size_t n = truth.size();
  const Dag& dag = truth.dag();
  QuerySet out;
  for (std::size_t m = 0; m < n; ++m) {
    // Lexicographic m-subsets of the variables.
    std::vector<std::size_t> subset(m);
    for (std::size_t i = 0; i < m; ++i) subset[i] = i;
    while (true) {
      std::vector<int> states(m, 0);
      do {
        Assignment evidence = empty_assignment(n);
        for (std::size_t i = 0; i < m; ++i) evidence[subset[i]] = states[i];
        out.queries.push_back(make_query(truth, std::move(evidence)));
      } while (next_states(dag, subset, states));
      std::size_t i = m;
      while (i > 0 && subset[i - 1] == n - m + i - 1) --i;
      if (i == 0) break;
      ++subset[i - 1];
      for (std::size_t j = i; j < m; ++j) subset[j] = subset[j - 1] + 1;
    }
  }
  return out;
}

QuerySet build_sample_query_set(const DiscreteBayesNet& truth, Rng& rng, std::size_t count) {
  if (count == 0) throw std::invalid_argument("build_sample_query_set: count must be positive");
  const std::size_t n = truth.size();
  QuerySet out;
  out.queries.reserve(count);
  for (std::size_t q = 0; q < count; ++q) {
    const Assignment sample = forward_sample(truth, rng, 1).records.front();
    const MaskSplit split = sample_mask(n, rng);
    Assignment evidence = empty_assignment(n);
    for (std::size_t v = 0; v < n; ++v) {
      if (mask_has(split.evidence, v)) evidence[v] = sample[v];
    }
    out.queries.push_back(make_query(truth, std::move(evidence)));
  }
  return out;
}

double target_mae(std::span<const double> predicted, std::span<const double> truth) {
  if (predicted.size() != truth.size() || truth.empty()) {
    throw std::invalid_argument("target_mae: distributions differ in size");
  }
  double total = 0.0;
  for (std::size_t s = 0; s < truth.size(); ++s) total += std::abs(predicted[s] - truth[s]);
  return total / static_cast<double>(truth.size());
}

double query_mae(std::span<const Distribution> predicted, std::span<const Distribution> truth) {
  if (predicted.size() != truth.size() || truth.empty()) {
    throw std::invalid_argument("query_mae: predicted and true targets differ");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if (predicted[t].variable != truth[t].variable) {
      throw std::invalid_argument("query_mae: predicted and true targets differ");
    }
    total += target_mae(predicted[t].probs, truth[t].probs);
  }
  return total / static_cast<double>(truth.size());
}

Predictor make_bn_predictor(const DiscreteBayesNet& net) {
  return [&net](const Assignment& evidence, std::span<const std::size_t> targets) {
    BnPrediction p = bn_predict(net, evidence, targets);
    return Prediction{std::move(p.marginals), p.fallback};
  };
}

Predictor make_understudy_predictor(const ModelParams& params, const Layout& layout) {
  return [&params, &layout](const Assignment& evidence, std::span<const std::size_t> targets) {
    return Prediction{understudy_predict(params, layout, evidence, targets), false};
  };
}

MaeReport evaluate(const Predictor& predictor, const QuerySet& queries) {
  MaeReport report;
  report.per_query.reserve(queries.size());
  double total = 0.0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const Query& q = queries.queries[i];
    try {
      const Prediction p = predictor(q.evidence, q.targets);
      const double mae = query_mae(p.marginals, q.truth);
      report.per_query.push_back(mae);
      total += mae;
      if (p.fallback) ++report.fallback_count;
    } catch (const std::exception& e) {
      throw std::runtime_error("predictor failed on query " + std::to_string(i) + ": " + e.what());
    }
  }
  report.aggregate = report.per_query.empty() ? 0.0 : total / static_cast<double>(queries.size());
  report.empty_evidence_queries = queries.empty_evidence_count();
  report.metadata["mae_convention"] = "mean-over-states";
  return report;
}

void write_query_set(const Dag& dag, const QuerySet& queries, std::ostream& out) {
  using nlohmann::json;
  for (const auto& q : queries.queries) {
    json evidence = json::object();
    for (std::size_t v = 0; v < dag.size(); ++v) {
      if (q.evidence[v] != kUnobserved) {
        evidence[dag.variable(v).name] =
            dag.variable(v).states[static_cast<std::size_t>(q.evidence[v])];
      }
    }
    json targets = json::array();
    json truth = json::object();
    for (std::size_t t = 0; t < q.targets.size(); ++t) {
      const auto& name = dag.variable(q.targets[t]).name;
      targets.push_back(name);
      truth[name] = q.truth[t].probs;
    }
    out << json{{"evidence", evidence}, {"targets", targets}, {"truth", truth}}.dump() << '\n';
  }
}

}  // namespace understudy
