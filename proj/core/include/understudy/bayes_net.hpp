#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "understudy/rng.hpp"

namespace understudy {

/// Raised when a network, DAG or CPT violates its structural invariants.
class NetworkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// State index marking an unobserved variable in an Assignment.
inline constexpr int kUnobserved = -1;

/// One state index per network variable (declaration order); kUnobserved
/// for variables that are not part of the assignment.
using Assignment = std::vector<int>;

struct VariableSpec {
  std::string name;
  std::vector<std::string> states;

  std::size_t cardinality() const { return states.size(); }
  /// Index of a state label; throws NetworkError if unknown.
  std::size_t state_index(const std::string& label) const;
};

/// Directed edge given by (parent, child) variable names.
using NamedEdge = std::pair<std::string, std::string>;
/// Directed edge given by (parent, child) variable indices.
using Edge = std::pair<std::size_t, std::size_t>;

/// Validated directed acyclic graph over named discrete variables.
class Dag {
 public:
  Dag(std::vector<VariableSpec> variables, const std::vector<NamedEdge>& edges);
  Dag(std::vector<VariableSpec> variables, std::vector<Edge> edges);

  std::size_t size() const { return variables_.size(); }
  const std::vector<VariableSpec>& variables() const { return variables_; }
  const VariableSpec& variable(std::size_t i) const { return variables_.at(i); }
  std::size_t cardinality(std::size_t i) const { return variables_[i].cardinality(); }

  /// Index of a variable; throws NetworkError if undeclared.
  std::size_t index_of(const std::string& name) const;
  std::optional<std::size_t> find(const std::string& name) const;

  /// Edges in the order they were declared.
  const std::vector<Edge>& edges() const { return edges_; }
  bool has_edge(std::size_t parent, std::size_t child) const;

  /// Parents and children, sorted by declaration order.
  const std::vector<std::size_t>& parents(std::size_t i) const { return parents_[i]; }
  const std::vector<std::size_t>& children(std::size_t i) const { return children_[i]; }

  /// Kahn's algorithm; ties go to the earliest declared variable.
  std::vector<std::size_t> topological_order() const;

  /// True if the edge set over n nodes has no directed cycle.
  static bool is_acyclic(std::size_t n, std::span<const Edge> edges);

 private:
  void validate_and_index();

  std::vector<VariableSpec> variables_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> parents_;
  std::vector<std::vector<std::size_t>> children_;
};

/// CPT as read from a network file: names instead of indices.
struct CptSpec {
  std::string variable;
  std::vector<std::string> parents;
  std::vector<std::vector<double>> rows;
};

/// Conditional probability table.
///
/// Rows enumerate parent-state combinations lexicographically with the
/// parents in `parents` order and the last parent varying fastest. Each
/// row holds one probability per state of `variable`.
struct Cpt {
  std::size_t variable = 0;
  std::vector<std::size_t> parents;
  std::size_t cardinality = 0;
  std::vector<double> table;  // row-major, rows × cardinality

  std::size_t row_count() const { return cardinality == 0 ? 0 : table.size() / cardinality; }
  std::span<const double> row(std::size_t r) const {
    return {table.data() + r * cardinality, cardinality};
  }
  /// Row index for the parent states found in `assignment`.
  std::size_t row_index(const Dag& dag, const Assignment& assignment) const;
};

/// Immutable discrete Bayesian network: a Dag plus one Cpt per variable.
class DiscreteBayesNet {
 public:
  /// Validates that each CPT's parent set equals the DAG parents, row count
  /// equals the product of parent cardinalities, and every row is a
  /// probability vector (entries in [0,1], sum within 1e-9 of 1).
  DiscreteBayesNet(Dag dag, std::vector<Cpt> cpts);

  static DiscreteBayesNet build(std::vector<VariableSpec> variables,
                                const std::vector<NamedEdge>& edges,
                                const std::vector<CptSpec>& cpts);

  const Dag& dag() const { return dag_; }
  std::size_t size() const { return dag_.size(); }
  /// CPT of variable i (declaration order).
  const Cpt& cpt(std::size_t i) const { return cpts_[i]; }
  const std::vector<Cpt>& cpts() const { return cpts_; }

  /// Σ over variables of rows × (cardinality − 1).
  std::size_t free_parameter_count() const;

  /// P(X_i = assignment[i] | parents) for a fully assigned parent set.
  double conditional(std::size_t i, const Assignment& assignment) const;

 private:
  Dag dag_;
  std::vector<Cpt> cpts_;
};

struct Dataset {
  std::vector<Assignment> records;
  std::uint64_t seed = 0;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

struct Distribution {
  std::size_t variable = 0;
  std::vector<double> probs;
};

/// ∏ P(x_i | parents(x_i)); throws std::invalid_argument when incomplete.
double joint_probability(const DiscreteBayesNet& net, const Assignment& full);

/// Ancestral sampling in topological order. count must be ≥ 1.
Dataset forward_sample(const DiscreteBayesNet& net, Rng& rng, std::size_t count);
/// Same, from a fresh Rng(seed); the seed is recorded on the dataset.
Dataset forward_sample(const DiscreteBayesNet& net, std::uint64_t seed, std::size_t count);

/// Exact P(target | evidence) by variable elimination (min-degree order,
/// ties by declaration order). Returns std::nullopt when the evidence has
/// zero probability under the network.
std::optional<Distribution> variable_elimination(const DiscreteBayesNet& net,
                                                 const Assignment& evidence,
                                                 std::size_t target);

struct FittedNetwork {
  DiscreteBayesNet net;
  std::size_t sample_count = 0;
  bool fitted_on_empty() const { return sample_count == 0; }
};

/// Maximum-likelihood CPTs with a K2 (add-one Dirichlet) prior:
/// P(j | c) = (count(j, c) + 1) / (count(c) + n_i).
FittedNetwork fit_mle_k2(const Dag& dag, const Dataset& data);

struct BnPrediction {
  std::vector<Distribution> marginals;  // one per requested target
  bool fallback = false;               // evidence dropped (P(e) = 0)
};

/// Per-target VE. When the evidence has zero probability the evidence is
/// discarded and the unconditional marginals are returned instead.
BnPrediction bn_predict(const DiscreteBayesNet& net, const Assignment& evidence,
                        std::span<const std::size_t> targets);

/// All-unobserved assignment for a network of n variables.
inline Assignment empty_assignment(std::size_t n) { return Assignment(n, kUnobserved); }

}  // namespace understudy
