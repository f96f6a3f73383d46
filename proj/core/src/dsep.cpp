#include "understudy/dsep.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace understudy {

IndependenceRelation make_relation(std::size_t x, std::size_t y, std::vector<std::size_t> given) {
  if (x == y) throw std::invalid_argument("relation endpoints must differ");
  if (x > y) std::swap(x, y);
  std::sort(given.begin(), given.end());
  given.erase(std::unique(given.begin(), given.end()), given.end());
  if (std::binary_search(given.begin(), given.end(), x) ||
      std::binary_search(given.begin(), given.end(), y)) {
    throw std::invalid_argument("relation endpoint inside its conditioning set");
  }
  return {x, y, std::move(given)};
}

bool is_d_separated(const Dag& dag, std::size_t x, std::size_t y,
                    std::span<const std::size_t> given) {
  const std::size_t n = dag.size();
  if (x >= n || y >= n) throw std::invalid_argument("is_d_separated: unknown variable");
  if (x == y) throw std::invalid_argument("is_d_separated: x and y must differ");
  std::vector<bool> observed(n, false);
  for (std::size_t z : given) {
    if (z >= n) throw std::invalid_argument("is_d_separated: unknown conditioning variable");
    observed[z] = true;
  }
  if (observed[x] || observed[y]) {
    throw std::invalid_argument("is_d_separated: endpoint inside the conditioning set");
  }

  // Observed nodes and their ancestors: colliders here let the ball bounce.
  std::vector<bool> opens_collider(n, false);
  std::vector<std::size_t> stack(given.begin(), given.end());
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    if (opens_collider[v]) continue;
    opens_collider[v] = true;
    for (std::size_t p : dag.parents(v)) stack.push_back(p);
  }

  // States (node, arrived_from_child). Index 2*v + dir.
  enum : std::size_t { kFromParent = 0, kFromChild = 1 };
  std::vector<bool> visited(2 * n, false);
  std::vector<std::pair<std::size_t, std::size_t>> frontier{{x, kFromChild}};
  while (!frontier.empty()) {
    const auto [v, dir] = frontier.back();
    frontier.pop_back();
    if (visited[2 * v + dir]) continue;
    visited[2 * v + dir] = true;
    if (v == y) return false;

    if (dir == kFromChild) {
      if (observed[v]) continue;
      for (std::size_t p : dag.parents(v)) frontier.emplace_back(p, kFromChild);
      for (std::size_t c : dag.children(v)) frontier.emplace_back(c, kFromParent);
    } else {
      if (!observed[v]) {
        for (std::size_t c : dag.children(v)) frontier.emplace_back(c, kFromParent);
      }
      if (opens_collider[v]) {
        for (std::size_t p : dag.parents(v)) frontier.emplace_back(p, kFromChild);
      }
    }
  }
  return true;
}

bool is_d_separated(const Dag& dag, const std::string& x, const std::string& y,
                    const std::vector<std::string>& given) {
  std::vector<std::size_t> idx;
  for (const auto& g : given) idx.push_back(dag.index_of(g));
  return is_d_separated(dag, dag.index_of(x), dag.index_of(y), idx);
}

void for_each_candidate(
    std::size_t n,
    const std::function<void(std::size_t, std::size_t, const std::vector<std::size_t>&)>& visit) {
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = x + 1; y < n; ++y) {
      std::vector<std::size_t> rest;
      for (std::size_t v = 0; v < n; ++v) {
        if (v != x && v != y) rest.push_back(v);
      }
      for (std::size_t size = 0; size <= rest.size(); ++size) {
        // Lexicographic combinations of `size` positions in `rest`.
        std::vector<std::size_t> pos(size);
        for (std::size_t i = 0; i < size; ++i) pos[i] = i;
        std::vector<std::size_t> subset(size);
        while (true) {
          for (std::size_t i = 0; i < size; ++i) subset[i] = rest[pos[i]];
          visit(x, y, subset);
          std::size_t i = size;
          while (i > 0 && pos[i - 1] == rest.size() - size + i - 1) --i;
          if (i == 0) break;
          ++pos[i - 1];
          for (std::size_t j = i; j < size; ++j) pos[j] = pos[j - 1] + 1;
        }
      }
    }
  }
}

std::vector<IndependenceRelation> enumerate_relations(const Dag& dag) {
  std::vector<IndependenceRelation> out;
  for_each_candidate(dag.size(), [&](std::size_t x, std::size_t y,
                                     const std::vector<std::size_t>& given) {
    if (is_d_separated(dag, x, y, given)) out.push_back({x, y, given});
  });
  return out;
}

std::string format_relation(const Dag& dag, const IndependenceRelation& rel, bool braces) {
  std::string s = dag.variable(rel.x).name + " _|_ " + dag.variable(rel.y).name + " | ";
  if (braces) s += '{';
  for (std::size_t i = 0; i < rel.given.size(); ++i) {
    if (i) s += ',';
    s += dag.variable(rel.given[i]).name;
  }
  if (braces) s += '}';
  return s;
}

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

}  // namespace

IndependenceRelation parse_relation(const Dag& dag, const std::string& line) {
  const auto sep = line.find("_|_");
  const auto bar = line.find('|', sep == std::string::npos ? 0 : sep + 3);
  if (sep == std::string::npos || bar == std::string::npos) {
    throw std::invalid_argument("malformed relation line: '" + line + "'");
  }
  const std::string x = trim(line.substr(0, sep));
  const std::string y = trim(line.substr(sep + 3, bar - sep - 3));
  std::string rest = trim(line.substr(bar + 1));
  if (!rest.empty() && rest.front() == '{') {
    if (rest.back() != '}') throw std::invalid_argument("unbalanced braces: '" + line + "'");
    rest = trim(rest.substr(1, rest.size() - 2));
  }
  std::vector<std::size_t> given;
  std::istringstream ss(rest);
  std::string name;
  while (std::getline(ss, name, ',')) {
    name = trim(name);
    if (!name.empty()) given.push_back(dag.index_of(name));
  }
  return make_relation(dag.index_of(x), dag.index_of(y), std::move(given));
}

void write_relations(const Dag& dag, std::span<const IndependenceRelation> relations,
                     std::ostream& out) {
  for (const auto& rel : relations) out << format_relation(dag, rel, false) << '\n';
}

std::vector<IndependenceRelation> read_relations(const Dag& dag, std::istream& in) {
  std::vector<IndependenceRelation> out;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    out.push_back(parse_relation(dag, t));
  }
  return out;
}

}  // namespace understudy
