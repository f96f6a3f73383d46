#include "understudy/bayes_net.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <unordered_set>

namespace understudy {

std::size_t VariableSpec::state_index(const std::string& label) const {
  auto it = std::find(states.begin(), states.end(), label);
  if (it == states.end()) {
    throw NetworkError("variable '" + name + "' has no state '" + label + "'");
  }
  return static_cast<std::size_t>(it - states.begin());
}

// ---------------------------------------------------------------- Dag

namespace {

std::vector<Edge> resolve_edges(const std::vector<VariableSpec>& variables,
                                const std::vector<NamedEdge>& edges) {
  auto lookup = [&](const std::string& name) {
    for (std::size_t i = 0; i < variables.size(); ++i) {
      if (variables[i].name == name) return i;
    }
    throw NetworkError("edge references undeclared variable '" + name + "'");
  };
  std::vector<Edge> out;
  out.reserve(edges.size());
  for (const auto& [parent, child] : edges) out.emplace_back(lookup(parent), lookup(child));
  return out;
}

}  // namespace

Dag::Dag(std::vector<VariableSpec> variables, const std::vector<NamedEdge>& edges)
    : variables_(std::move(variables)) {
  edges_ = resolve_edges(variables_, edges);
  validate_and_index();
}

Dag::Dag(std::vector<VariableSpec> variables, std::vector<Edge> edges)
    : variables_(std::move(variables)), edges_(std::move(edges)) {
  validate_and_index();
}

void Dag::validate_and_index() {
  std::unordered_set<std::string> names;
  for (const auto& v : variables_) {
    if (v.name.empty()) throw NetworkError("variable with empty name");
    if (!names.insert(v.name).second) throw NetworkError("duplicate variable '" + v.name + "'");
    if (v.states.size() < 2) throw NetworkError("variable '" + v.name + "' needs at least 2 states");
    std::unordered_set<std::string> labels(v.states.begin(), v.states.end());
    if (labels.size() != v.states.size()) {
      throw NetworkError("variable '" + v.name + "' has duplicate state labels");
    }
  }
  const std::size_t n = variables_.size();
  parents_.assign(n, {});
  children_.assign(n, {});
  std::set<Edge> seen;
  for (const auto& [p, c] : edges_) {
    if (p >= n || c >= n) throw NetworkError("edge references undeclared variable");
    if (p == c) throw NetworkError("self-loop on '" + variables_[p].name + "'");
    if (!seen.insert({p, c}).second) {
      throw NetworkError("duplicate edge " + variables_[p].name + " -> " + variables_[c].name);
    }
    parents_[c].push_back(p);
    children_[p].push_back(c);
  }
  for (auto& ps : parents_) std::sort(ps.begin(), ps.end());
  for (auto& cs : children_) std::sort(cs.begin(), cs.end());
  if (!is_acyclic(n, edges_)) throw NetworkError("graph contains a directed cycle");
}

std::size_t Dag::index_of(const std::string& name) const {
  if (auto i = find(name)) return *i;
  throw NetworkError("undeclared variable '" + name + "'");
}

std::optional<std::size_t> Dag::find(const std::string& name) const {
  for (std::size_t i = 0; i < variables_.size(); ++i) {
    if (variables_[i].name == name) return i;
  }
  return std::nullopt;
}

bool Dag::has_edge(std::size_t parent, std::size_t child) const {
  const auto& cs = children_.at(parent);
  return std::binary_search(cs.begin(), cs.end(), child);
}

std::vector<std::size_t> Dag::topological_order() const {
  const std::size_t n = size();
  std::vector<std::size_t> indegree(n);
  for (std::size_t i = 0; i < n; ++i) indegree[i] = parents_[i].size();
  // Ready set ordered by declaration index.
  std::set<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.insert(i);
  }
  std::vector<std::size_t> order;
  order.reserve(n);
  while (!ready.empty()) {
    const std::size_t v = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(v);
    for (std::size_t c : children_[v]) {
      if (--indegree[c] == 0) ready.insert(c);
    }
  }
  return order;
}

bool Dag::is_acyclic(std::size_t n, std::span<const Edge> edges) {
  std::vector<std::size_t> indegree(n, 0);
  std::vector<std::vector<std::size_t>> out(n);
  for (const auto& [p, c] : edges) {
    if (p >= n || c >= n) return false;
    out[p].push_back(c);
    ++indegree[c];
  }
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) stack.push_back(i);
  }
  std::size_t visited = 0;
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    ++visited;
    for (std::size_t c : out[v]) {
      if (--indegree[c] == 0) stack.push_back(c);
    }
  }
  return visited == n;
}

// ---------------------------------------------------------------- Cpt / net

std::size_t Cpt::row_index(const Dag& dag, const Assignment& assignment) const {
  std::size_t row = 0;
  for (std::size_t p : parents) {
    row = row * dag.cardinality(p) + static_cast<std::size_t>(assignment[p]);
  }
  return row;
}

DiscreteBayesNet::DiscreteBayesNet(Dag dag, std::vector<Cpt> cpts) : dag_(std::move(dag)) {
  const std::size_t n = dag_.size();
  cpts_.resize(n);
  std::vector<bool> have(n, false);
  for (auto& cpt : cpts) {
    if (cpt.variable >= n) throw NetworkError("CPT for undeclared variable");
    const auto& name = dag_.variable(cpt.variable).name;
    if (have[cpt.variable]) throw NetworkError("duplicate CPT for '" + name + "'");
    have[cpt.variable] = true;

    auto sorted = cpt.parents;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end() ||
        sorted != dag_.parents(cpt.variable)) {
      throw NetworkError("CPT parents of '" + name + "' do not match the DAG parents");
    }
    if (cpt.cardinality != dag_.cardinality(cpt.variable)) {
      throw NetworkError("CPT of '" + name + "' has wrong state count");
    }
    std::size_t rows = 1;
    for (std::size_t p : cpt.parents) rows *= dag_.cardinality(p);
    if (cpt.table.size() != rows * cpt.cardinality) {
      throw NetworkError("CPT of '" + name + "' has " + std::to_string(cpt.row_count()) +
                         " rows, expected " + std::to_string(rows));
    }
    for (std::size_t r = 0; r < rows; ++r) {
      double sum = 0.0;
      for (double p : cpt.row(r)) {
        if (!(p >= 0.0 && p <= 1.0)) {
          throw NetworkError("CPT of '" + name + "' has an entry outside [0,1]");
        }
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-9) {
        throw NetworkError("CPT row " + std::to_string(r) + " of '" + name +
                           "' is not normalized");
      }
    }
    cpts_[cpt.variable] = std::move(cpt);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!have[i]) throw NetworkError("missing CPT for '" + dag_.variable(i).name + "'");
  }
}

DiscreteBayesNet DiscreteBayesNet::build(std::vector<VariableSpec> variables,
                                         const std::vector<NamedEdge>& edges,
                                         const std::vector<CptSpec>& specs) {
  Dag dag(std::move(variables), edges);
  std::vector<Cpt> cpts;
  cpts.reserve(specs.size());
  for (const auto& spec : specs) {
    Cpt cpt;
    cpt.variable = dag.index_of(spec.variable);
    for (const auto& p : spec.parents) cpt.parents.push_back(dag.index_of(p));
    cpt.cardinality = dag.cardinality(cpt.variable);
    for (const auto& row : spec.rows) {
      if (row.size() != cpt.cardinality) {
        throw NetworkError("CPT row width of '" + spec.variable + "' does not match its states");
      }
      cpt.table.insert(cpt.table.end(), row.begin(), row.end());
    }
    cpts.push_back(std::move(cpt));
  }
  return DiscreteBayesNet(std::move(dag), std::move(cpts));
}

std::size_t DiscreteBayesNet::free_parameter_count() const {
  std::size_t total = 0;
  for (const auto& cpt : cpts_) total += cpt.row_count() * (cpt.cardinality - 1);
  return total;
}

double DiscreteBayesNet::conditional(std::size_t i, const Assignment& assignment) const {
  const Cpt& cpt = cpts_[i];
  return cpt.row(cpt.row_index(dag_, assignment))[static_cast<std::size_t>(assignment[i])];
}

// ---------------------------------------------------------------- joint / sampling

double joint_probability(const DiscreteBayesNet& net, const Assignment& full) {
  if (full.size() != net.size()) throw std::invalid_argument("joint_probability: size mismatch");
  for (std::size_t i = 0; i < full.size(); ++i) {
    if (full[i] < 0 || static_cast<std::size_t>(full[i]) >= net.dag().cardinality(i)) {
      throw std::invalid_argument("joint_probability: assignment is not full");
    }
  }
  double p = 1.0;
  for (std::size_t i = 0; i < net.size(); ++i) p *= net.conditional(i, full);
  return p;
}

Dataset forward_sample(const DiscreteBayesNet& net, Rng& rng, std::size_t count) {
  if (count == 0) throw std::invalid_argument("forward_sample: count must be at least 1");
  const auto order = net.dag().topological_order();
  Dataset data;
  data.records.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    Assignment record(net.size(), kUnobserved);
    for (std::size_t v : order) {
      const Cpt& cpt = net.cpt(v);
      record[v] = static_cast<int>(rng.categorical(cpt.row(cpt.row_index(net.dag(), record))));
    }
    data.records.push_back(std::move(record));
  }
  return data;
}

Dataset forward_sample(const DiscreteBayesNet& net, std::uint64_t seed, std::size_t count) {
  Rng rng(seed);
  Dataset data = forward_sample(net, rng, count);
  data.seed = seed;
  return data;
}

// ---------------------------------------------------------------- variable elimination

namespace {

/// Table over a sorted variable scope; the last scope variable varies fastest.
struct Factor {
  std::vector<std::size_t> scope;
  std::vector<std::size_t> cards;
  std::vector<double> values;

  bool contains(std::size_t v) const {
    return std::binary_search(scope.begin(), scope.end(), v);
  }
};

std::vector<std::size_t> strides_of(const std::vector<std::size_t>& cards) {
  std::vector<std::size_t> strides(cards.size());
  std::size_t s = 1;
  for (std::size_t i = cards.size(); i-- > 0;) {
    strides[i] = s;
    s *= cards[i];
  }
  return strides;
}

/// CPT of variable v restricted to the evidence.
Factor cpt_factor(const DiscreteBayesNet& net, std::size_t v, const Assignment& evidence) {
  const Dag& dag = net.dag();
  const Cpt& cpt = net.cpt(v);

  // Family in CPT order: parents then the variable itself.
  std::vector<std::size_t> family = cpt.parents;
  family.push_back(v);
  std::vector<std::size_t> family_cards;
  for (std::size_t u : family) family_cards.push_back(dag.cardinality(u));
  const auto family_strides = strides_of(family_cards);  // matches table layout

  Factor f;
  for (std::size_t u : family) {
    if (evidence[u] == kUnobserved) f.scope.push_back(u);
  }
  std::sort(f.scope.begin(), f.scope.end());
  for (std::size_t u : f.scope) f.cards.push_back(dag.cardinality(u));
  std::size_t size = 1;
  for (std::size_t c : f.cards) size *= c;
  f.values.resize(size);

  std::size_t base = 0;
  for (std::size_t k = 0; k < family.size(); ++k) {
    if (evidence[family[k]] != kUnobserved) {
      base += static_cast<std::size_t>(evidence[family[k]]) * family_strides[k];
    }
  }
  std::vector<std::size_t> table_stride(f.scope.size());
  for (std::size_t j = 0; j < f.scope.size(); ++j) {
    const auto k = static_cast<std::size_t>(
        std::find(family.begin(), family.end(), f.scope[j]) - family.begin());
    table_stride[j] = family_strides[k];
  }
  std::vector<std::size_t> counter(f.scope.size(), 0);
  std::size_t offset = base;
  for (std::size_t i = 0; i < size; ++i) {
    f.values[i] = cpt.table[offset];
    for (std::size_t j = f.scope.size(); j-- > 0;) {
      if (++counter[j] < f.cards[j]) {
        offset += table_stride[j];
        break;
      }
      offset -= (f.cards[j] - 1) * table_stride[j];
      counter[j] = 0;
    }
  }
  return f;
}

Factor multiply(const Factor& a, const Factor& b) {
  Factor out;
  std::set_union(a.scope.begin(), a.scope.end(), b.scope.begin(), b.scope.end(),
                 std::back_inserter(out.scope));
  auto card_of = [&](std::size_t v) {
    for (std::size_t i = 0; i < a.scope.size(); ++i) {
      if (a.scope[i] == v) return a.cards[i];
    }
    for (std::size_t i = 0; i < b.scope.size(); ++i) {
      if (b.scope[i] == v) return b.cards[i];
    }
    return std::size_t{0};
  };
  std::size_t size = 1;
  for (std::size_t v : out.scope) {
    out.cards.push_back(card_of(v));
    size *= out.cards.back();
  }
  out.values.resize(size);

  const auto sa = strides_of(a.cards);
  const auto sb = strides_of(b.cards);
  std::vector<std::size_t> step_a(out.scope.size(), 0), step_b(out.scope.size(), 0);
  for (std::size_t j = 0; j < out.scope.size(); ++j) {
    for (std::size_t i = 0; i < a.scope.size(); ++i) {
      if (a.scope[i] == out.scope[j]) step_a[j] = sa[i];
    }
    for (std::size_t i = 0; i < b.scope.size(); ++i) {
      if (b.scope[i] == out.scope[j]) step_b[j] = sb[i];
    }
  }
  std::vector<std::size_t> counter(out.scope.size(), 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t i = 0; i < size; ++i) {
    out.values[i] = a.values[ia] * b.values[ib];
    for (std::size_t j = out.scope.size(); j-- > 0;) {
      if (++counter[j] < out.cards[j]) {
        ia += step_a[j];
        ib += step_b[j];
        break;
      }
      ia -= (out.cards[j] - 1) * step_a[j];
      ib -= (out.cards[j] - 1) * step_b[j];
      counter[j] = 0;
    }
  }
  return out;
}

Factor sum_out(const Factor& f, std::size_t v) {
  const auto pos = static_cast<std::size_t>(
      std::find(f.scope.begin(), f.scope.end(), v) - f.scope.begin());
  Factor out;
  out.scope = f.scope;
  out.cards = f.cards;
  out.scope.erase(out.scope.begin() + static_cast<std::ptrdiff_t>(pos));
  out.cards.erase(out.cards.begin() + static_cast<std::ptrdiff_t>(pos));
  const auto strides = strides_of(f.cards);
  const std::size_t inner = strides[pos];
  const std::size_t card = f.cards[pos];
  const std::size_t outer = f.values.size() / (inner * card);
  out.values.assign(outer * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t s = 0; s < card; ++s) {
      const double* src = f.values.data() + (o * card + s) * inner;
      double* dst = out.values.data() + o * inner;
      for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
  }
  return out;
}

}  // namespace

std::optional<Distribution> variable_elimination(const DiscreteBayesNet& net,
                                                 const Assignment& evidence,
                                                 std::size_t target) {
  const Dag& dag = net.dag();
  const std::size_t n = dag.size();
  if (evidence.size() != n) throw std::invalid_argument("variable_elimination: evidence size");
  if (target >= n) throw std::invalid_argument("variable_elimination: unknown target");
  if (evidence[target] != kUnobserved) {
    throw std::invalid_argument("variable_elimination: target is part of the evidence");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (evidence[i] != kUnobserved &&
        (evidence[i] < 0 || static_cast<std::size_t>(evidence[i]) >= dag.cardinality(i))) {
      throw std::invalid_argument("variable_elimination: evidence state out of range");
    }
  }

  std::vector<Factor> factors;
  factors.reserve(n);
  for (std::size_t v = 0; v < n; ++v) factors.push_back(cpt_factor(net, v, evidence));

  std::vector<std::size_t> hidden;
  for (std::size_t v = 0; v < n; ++v) {
    if (v != target && evidence[v] == kUnobserved) hidden.push_back(v);
  }

  while (!hidden.empty()) {
    // Min-degree over the current interaction graph; ties by declaration order.
    std::size_t best_pos = 0;
    std::size_t best_degree = std::numeric_limits<std::size_t>::max();
    for (std::size_t h = 0; h < hidden.size(); ++h) {
      std::vector<std::size_t> neighbours;
      for (const auto& f : factors) {
        if (!f.contains(hidden[h])) continue;
        neighbours.insert(neighbours.end(), f.scope.begin(), f.scope.end());
      }
      std::sort(neighbours.begin(), neighbours.end());
      neighbours.erase(std::unique(neighbours.begin(), neighbours.end()), neighbours.end());
      const std::size_t degree = neighbours.empty() ? 0 : neighbours.size() - 1;
      if (degree < best_degree) {
        best_degree = degree;
        best_pos = h;
      }
    }
    const std::size_t var = hidden[best_pos];
    hidden.erase(hidden.begin() + static_cast<std::ptrdiff_t>(best_pos));

    std::vector<Factor> rest;
    std::optional<Factor> product;
    for (auto& f : factors) {
      if (!f.contains(var)) {
        rest.push_back(std::move(f));
      } else if (!product) {
        product = std::move(f);
      } else {
        product = multiply(*product, f);
      }
    }
    if (product) rest.push_back(sum_out(*product, var));
    factors = std::move(rest);
  }

  Factor result = std::move(factors.front());
  for (std::size_t i = 1; i < factors.size(); ++i) result = multiply(result, factors[i]);
  // Only the target can remain in scope.
  Distribution dist;
  dist.variable = target;
  dist.probs.assign(dag.cardinality(target), 0.0);
  if (result.scope.empty()) {
    for (double& p : dist.probs) p = result.values.front();
  } else {
    dist.probs = result.values;
  }
  const double total = std::accumulate(dist.probs.begin(), dist.probs.end(), 0.0);
  if (!(total > 0.0) || !std::isfinite(total)) return std::nullopt;
  for (double& p : dist.probs) p /= total;
  return dist;
}

// ---------------------------------------------------------------- fitting / prediction

FittedNetwork fit_mle_k2(const Dag& dag, const Dataset& data) {
  const std::size_t n = dag.size();
  std::vector<Cpt> cpts;
  cpts.reserve(n);
  for (std::size_t v = 0; v < n; ++v) {
    Cpt cpt;
    cpt.variable = v;
    cpt.parents = dag.parents(v);
    cpt.cardinality = dag.cardinality(v);
    std::size_t rows = 1;
    for (std::size_t p : cpt.parents) rows *= dag.cardinality(p);
    cpt.table.assign(rows * cpt.cardinality, 0.0);
    cpts.push_back(std::move(cpt));
  }
  for (const auto& record : data.records) {
    if (record.size() != n) throw std::invalid_argument("fit_mle_k2: record width mismatch");
    for (std::size_t v = 0; v < n; ++v) {
      if (record[v] < 0 || static_cast<std::size_t>(record[v]) >= dag.cardinality(v)) {
        throw std::invalid_argument("fit_mle_k2: record is not a full assignment");
      }
      Cpt& cpt = cpts[v];
      cpt.table[cpt.row_index(dag, record) * cpt.cardinality +
                static_cast<std::size_t>(record[v])] += 1.0;
    }
  }
  for (auto& cpt : cpts) {
    const double classes = static_cast<double>(cpt.cardinality);
    for (std::size_t r = 0; r < cpt.row_count(); ++r) {
      double* row = cpt.table.data() + r * cpt.cardinality;
      double count = 0.0;
      for (std::size_t j = 0; j < cpt.cardinality; ++j) count += row[j];
      for (std::size_t j = 0; j < cpt.cardinality; ++j) row[j] = (row[j] + 1.0) / (count + classes);
    }
  }
  return FittedNetwork{DiscreteBayesNet(dag, std::move(cpts)), data.size()};
}

BnPrediction bn_predict(const DiscreteBayesNet& net, const Assignment& evidence,
                        std::span<const std::size_t> targets) {
  for (std::size_t t : targets) {
    if (t >= net.size() || evidence.at(t) != kUnobserved) {
      throw std::invalid_argument("bn_predict: targets must be disjoint from the evidence");
    }
  }
  BnPrediction out;
  out.marginals.reserve(targets.size());
  for (std::size_t t : targets) {
    auto dist = variable_elimination(net, evidence, t);
    if (!dist) {
      out.fallback = true;
      break;
    }
    out.marginals.push_back(std::move(*dist));
  }
  if (out.fallback) {
    out.marginals.clear();
    const Assignment none = empty_assignment(net.size());
    for (std::size_t t : targets) {
      auto dist = variable_elimination(net, none, t);
      out.marginals.push_back(std::move(*dist));
    }
  }
  return out;
}

}  // namespace understudy
