#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "understudy/bayes_net.hpp"

namespace understudy {

/// X ⊥ Y | given, over variable indices. x < y (declaration order) and
/// `given` is sorted, so the pair is unordered and the set canonical.
struct IndependenceRelation {
  std::size_t x = 0;
  std::size_t y = 0;
  std::vector<std::size_t> given;

  friend bool operator==(const IndependenceRelation&, const IndependenceRelation&) = default;
};

/// Canonicalizes (swaps x/y, sorts the conditioning set) and checks that
/// neither endpoint is conditioned on.
IndependenceRelation make_relation(std::size_t x, std::size_t y, std::vector<std::size_t> given);

/// Reachability ("Bayes ball") test. Throws std::invalid_argument for
/// unknown variables, x == y, or endpoints inside the conditioning set.
bool is_d_separated(const Dag& dag, std::size_t x, std::size_t y,
                    std::span<const std::size_t> given);
bool is_d_separated(const Dag& dag, const std::string& x, const std::string& y,
                    const std::vector<std::string>& given);

/// Calls `visit(x, y, given)` for every unordered pair x < y and every
/// subset of the remaining variables: subsets by size, then lexicographic.
void for_each_candidate(
    std::size_t n,
    const std::function<void(std::size_t, std::size_t, const std::vector<std::size_t>&)>& visit);

/// All d-separation relations implied by the DAG, in candidate order.
std::vector<IndependenceRelation> enumerate_relations(const Dag& dag);

/// "X _|_ Y | {A1,A2}" when braces is true, "X _|_ Y | A1,A2" otherwise.
std::string format_relation(const Dag& dag, const IndependenceRelation& rel, bool braces = true);
/// Accepts both forms produced by format_relation.
IndependenceRelation parse_relation(const Dag& dag, const std::string& line);

/// Relation list file: one relation per line, blank lines and lines
/// starting with '#' ignored.
void write_relations(const Dag& dag, std::span<const IndependenceRelation> relations,
                     std::ostream& out);
std::vector<IndependenceRelation> read_relations(const Dag& dag, std::istream& in);

}  // namespace understudy
