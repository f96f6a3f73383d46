#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "understudy/bayes_net.hpp"
#include "understudy/model.hpp"
#include "understudy/rng.hpp"

namespace understudy {

/// Evidence assignment plus ground-truth marginals of every other variable.
struct Query {
  Assignment evidence;
  std::vector<std::size_t> targets;
  std::vector<Distribution> truth;  // aligned with targets
};

struct QuerySet {
  std::vector<Query> queries;

  std::size_t size() const { return queries.size(); }
  /// Queries without any evidence variable.
  std::size_t empty_evidence_count() const;
};

/// One query per evidence subset of size 0..N−1 and per joint state of that
/// subset; Σ_m C(N,m)·s^m queries for N variables with s states each.
QuerySet build_total_query_set(const DiscreteBayesNet& truth);

/// `count` queries: a forward sample supplies the evidence values and the
/// evidence subset follows the training mask law.
QuerySet build_sample_query_set(const DiscreteBayesNet& truth, Rng& rng, std::size_t count = 1000);

/// Mean over states of |p̂ − p|.
double target_mae(std::span<const double> predicted, std::span<const double> truth);

/// Mean over targets of target_mae. Throws std::invalid_argument when the
/// two lists are not aligned on the same targets.
double query_mae(std::span<const Distribution> predicted, std::span<const Distribution> truth);

struct Prediction {
  std::vector<Distribution> marginals;
  bool fallback = false;
};

/// Answers P(target | evidence) for each requested target.
using Predictor =
    std::function<Prediction(const Assignment& evidence, std::span<const std::size_t> targets)>;

/// Wraps bn_predict; the network must outlive the predictor.
Predictor make_bn_predictor(const DiscreteBayesNet& net);
/// Wraps understudy_predict; params and layout must outlive the predictor.
Predictor make_understudy_predictor(const ModelParams& params, const Layout& layout);

struct MaeReport {
  std::vector<double> per_query;
  double aggregate = 0.0;
  std::size_t fallback_count = 0;
  std::size_t empty_evidence_queries = 0;
  std::map<std::string, std::string> metadata;
};

/// Scores a predictor on every query. A predictor exception is rethrown as
/// std::runtime_error naming the failing query index.
MaeReport evaluate(const Predictor& predictor, const QuerySet& queries);

/// One JSON object per line: {"evidence": {...}, "targets": [...], "truth": {...}}.
void write_query_set(const Dag& dag, const QuerySet& queries, std::ostream& out);

}  // namespace understudy
