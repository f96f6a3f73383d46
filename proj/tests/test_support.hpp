#pragma once

// Reference implementations used only by tests: brute-force inference,
// path-enumeration d-separation, finite differences and small fixtures.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "understudy/bayes_net.hpp"
#include "understudy/model.hpp"
#include "understudy/network_io.hpp"
#include "understudy/rng.hpp"

namespace testing_support {

using namespace understudy;

inline DiscreteBayesNet asia() {
  return load_network(std::string(UNDERSTUDY_TEST_DATA_DIR) + "/asia.json");
}

/// Advances `states` as an odometer over `cards`; false after the last one.
inline bool next_full_state(std::vector<int>& states, const std::vector<std::size_t>& cards) {
  for (std::size_t i = states.size(); i-- > 0;) {
    if (static_cast<std::size_t>(++states[i]) < cards[i]) return true;
    states[i] = 0;
  }
  return false;
}

inline std::vector<std::size_t> cardinalities(const Dag& dag) {
  std::vector<std::size_t> cards;
  for (std::size_t i = 0; i < dag.size(); ++i) cards.push_back(dag.cardinality(i));
  return cards;
}

/// P(target | evidence) by summing the joint over every full assignment.
/// Empty result when the evidence has zero probability.
inline std::vector<double> brute_force_marginal(const DiscreteBayesNet& net,
                                                const Assignment& evidence, std::size_t target) {
  const auto cards = cardinalities(net.dag());
  std::vector<double> acc(cards[target], 0.0);
  std::vector<int> full(cards.size(), 0);
  do {
    bool consistent = true;
    for (std::size_t i = 0; i < full.size(); ++i) {
      if (evidence[i] != kUnobserved && evidence[i] != full[i]) consistent = false;
    }
    if (consistent) acc[static_cast<std::size_t>(full[target])] += joint_probability(net, full);
  } while (next_full_state(full, cards));
  double total = 0.0;
  for (double v : acc) total += v;
  if (total == 0.0) return {};
  for (double& v : acc) v /= total;
  return acc;
}

/// d-separation by listing every simple undirected path and checking
/// whether each one is blocked.
class PathOracle {
 public:
  explicit PathOracle(const Dag& dag) : dag_(dag) {
    const std::size_t n = dag.size();
    desc_.assign(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i) mark_descendants(i, i);
  }

  bool separated(std::size_t x, std::size_t y, const std::vector<std::size_t>& given) const {
    std::vector<bool> observed(dag_.size(), false);
    for (std::size_t g : given) observed[g] = true;
    std::vector<std::size_t> path{x};
    std::vector<bool> on_path(dag_.size(), false);
    on_path[x] = true;
    return !open_path_exists(path, on_path, y, observed);
  }

 private:
  void mark_descendants(std::size_t root, std::size_t node) {
    desc_[root][node] = true;
    for (std::size_t c : dag_.children(node)) {
      if (!desc_[root][c]) mark_descendants(root, c);
    }
  }

  bool adjacent(std::size_t a, std::size_t b) const {
    return dag_.has_edge(a, b) || dag_.has_edge(b, a);
  }

  bool blocked(const std::vector<std::size_t>& path, const std::vector<bool>& observed) const {
    for (std::size_t i = 1; i + 1 < path.size(); ++i) {
      const std::size_t prev = path[i - 1], mid = path[i], next = path[i + 1];
      const bool collider = dag_.has_edge(prev, mid) && dag_.has_edge(next, mid);
      if (collider) {
        bool active = false;
        for (std::size_t d = 0; d < dag_.size(); ++d) {
          if (desc_[mid][d] && observed[d]) active = true;
        }
        if (!active) return true;
      } else if (observed[mid]) {
        return true;
      }
    }
    return false;
  }

  bool open_path_exists(std::vector<std::size_t>& path, std::vector<bool>& on_path,
                        std::size_t target, const std::vector<bool>& observed) const {
    const std::size_t last = path.back();
    for (std::size_t next = 0; next < dag_.size(); ++next) {
      if (on_path[next] || !adjacent(last, next)) continue;
      path.push_back(next);
      bool open = false;
      if (next == target) {
        open = !blocked(path, observed);
      } else {
        on_path[next] = true;
        open = open_path_exists(path, on_path, target, observed);
        on_path[next] = false;
      }
      path.pop_back();
      if (open) return true;
    }
    return false;
  }

  const Dag& dag_;
  std::vector<std::vector<bool>> desc_;
};

inline std::vector<VariableSpec> binary_variables(std::size_t n) {
  std::vector<VariableSpec> vars;
  for (std::size_t i = 0; i < n; ++i) vars.push_back({"V" + std::to_string(i), {"0", "1"}});
  return vars;
}

/// Random DAG: edges only go forward in a random permutation.
inline Dag random_dag(std::size_t n, double edge_prob, Rng& rng) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  rng.shuffle(perm);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (rng.uniform() < edge_prob) edges.emplace_back(perm[i], perm[j]);
    }
  }
  return Dag(binary_variables(n), std::move(edges));
}

/// Random strictly positive CPTs on an arbitrary DAG.
inline DiscreteBayesNet random_network(const Dag& dag, Rng& rng) {
  std::vector<Cpt> cpts;
  for (std::size_t i = 0; i < dag.size(); ++i) {
    Cpt cpt;
    cpt.variable = i;
    cpt.parents = dag.parents(i);
    cpt.cardinality = dag.cardinality(i);
    std::size_t rows = 1;
    for (std::size_t p : cpt.parents) rows *= dag.cardinality(p);
    for (std::size_t r = 0; r < rows; ++r) {
      std::vector<double> row(cpt.cardinality);
      double total = 0.0;
      for (double& v : row) total += (v = rng.uniform(0.05, 1.0));
      for (double v : row) cpt.table.push_back(v / total);
    }
    cpts.push_back(std::move(cpt));
  }
  return DiscreteBayesNet(dag, std::move(cpts));
}

/// Central differences of `loss` with respect to every parameter.
inline std::vector<double> numeric_gradient(ModelParams params,
                                            const std::function<double(const ModelParams&)>& loss,
                                            double step = 1e-5) {
  std::vector<double> out;
  auto flat = params.flat();
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double saved = flat[i];
    flat[i] = saved + step;
    const double up = loss(params);
    flat[i] = saved - step;
    const double down = loss(params);
    flat[i] = saved;
    out.push_back((up - down) / (2.0 * step));
  }
  return out;
}

/// max |a − n| / max(|a|, |n|, floor) over all coordinates.
inline double max_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                                 double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double scale = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / scale);
  }
  return worst;
}

/// The two-binary-variable dataset with counts n00, n01, n10, n11.
inline Dataset two_variable_counts(int n00, int n01, int n10, int n11) {
  Dataset data;
  auto add = [&](int x, int y, int count) {
    for (int i = 0; i < count; ++i) data.records.push_back({x, y});
  };
  add(0, 0, n00);
  add(0, 1, n01);
  add(1, 0, n10);
  add(1, 1, n11);
  return data;
}

inline Dag two_variable_dag() { return Dag({{"X", {"0", "1"}}, {"Y", {"0", "1"}}}, std::vector<Edge>{}); }

}  // namespace testing_support
