#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "understudy/bayes_net.hpp"
#include "understudy/dsep.hpp"
#include "understudy/model.hpp"
#include "understudy/rng.hpp"

namespace understudy {

enum class Strategy { kPlain, kReg, kCor };

std::string_view strategy_name(Strategy s);
/// Accepts "plain"/"nn", "reg"/"nn-reg", "cor"/"nn-cor".
Strategy parse_strategy(std::string_view text);

struct TrainConfig {
  std::size_t epochs = 500;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  Strategy strategy = Strategy::kPlain;
  double alpha = 10.0;
  std::size_t reg_batch_size = 16;
  std::size_t hidden = 50;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument; reg/cor need a non-empty relation list.
  void validate(std::size_t relation_count) const;
  std::map<std::string, std::string> to_map() const;
};

/// Evidence/target partition of the variables.
struct MaskSplit {
  VariableMask evidence = 0;
  VariableMask targets = 0;
};

/// m ~ U{0..n−1}, then a uniformly chosen evidence subset of size m.
MaskSplit sample_mask(std::size_t n, Rng& rng);
/// Uniform evidence subset of a fixed size m < n.
MaskSplit sample_mask_of_size(std::size_t n, std::size_t m, Rng& rng);

/// Instance scoring every target of the split.
MaskedInstance encode(const Assignment& sample, const MaskSplit& split);

// ------------------------------------------------------------------ REG

/// One instantiation of a relation's conditioning set with a pair y ≠ y′.
struct RegDraw {
  MaskedInstance with_y;        // evidence A=a, Y=y
  MaskedInstance with_y_prime;  // evidence A=a, Y=y′
};

/// Conditioning values uniform per variable; y uniform, y′ uniform over
/// the other states. Throws if Y has fewer than 2 states.
std::vector<RegDraw> sample_reg_draws(const Layout& layout, const IndependenceRelation& relation,
                                      Rng& rng, std::size_t count);

/// Mean over draws of (1/n) Σ_j (p̂(x_j | a, y) − p̂(x_j | a, y′))².
double reg_term(const ModelParams& params, const Layout& layout,
                const IndependenceRelation& relation, std::span<const RegDraw> draws);
double reg_term(const ModelParams& params, const Layout& layout,
                const IndependenceRelation& relation, Rng& rng, std::size_t reg_batch_size);

/// Adds weight × reg_term gradients to `grads` and returns the unweighted
/// term. v0 gradients stay in `ctx` until ctx.finish().
double accumulate_reg(BatchContext& ctx, const Layout& layout, const IndependenceRelation& relation,
                      std::span<const RegDraw> draws, double weight, ModelParams& grads);

// ------------------------------------------------------------------ COR

/// A relation whose conditions hold for a split: `protect`'s prediction
/// must not depend on evidence variable `corrupt`.
struct CorruptionMatch {
  std::size_t relation = 0;  // index into the relation list
  std::size_t protect = 0;
  std::size_t corrupt = 0;

  friend bool operator==(const CorruptionMatch&, const CorruptionMatch&) = default;
};

/// Relations with {Y} ∪ A = E and X ∈ T (protect X, corrupt Y) or
/// {X} ∪ A = E and Y ∈ T (protect Y, corrupt X). Linear scan.
std::vector<CorruptionMatch> applicable_relations(const MaskSplit& split,
                                                  std::span<const IndependenceRelation> relations);

/// Relations keyed by the evidence set that triggers them.
class RelationIndex {
 public:
  explicit RelationIndex(std::span<const IndependenceRelation> relations);

  /// Same result as applicable_relations(split, relations), for splits
  /// whose targets are the complement of the evidence.
  std::span<const CorruptionMatch> lookup(VariableMask evidence) const;

 private:
  std::unordered_map<VariableMask, std::vector<CorruptionMatch>> by_evidence_;
};

/// Training passes for one sample under COR. Targets are grouped by the
/// set of evidence variables matched relations mark irrelevant to them;
/// each group gets one instance with those evidence values re-drawn
/// uniformly, scoring only that group's targets.
SampleGroup corruption_passes(const Assignment& sample, const MaskSplit& split,
                              const RelationIndex& relations, const Layout& layout, Rng& rng);
SampleGroup corruption_passes(const Assignment& sample, const MaskSplit& split,
                              std::span<const IndependenceRelation> relations,
                              const Layout& layout, Rng& rng);

// ------------------------------------------------------------------ training

struct TrainHistory {
  std::vector<double> target_loss;  // per-epoch mean L^T over batches
  std::vector<double> reg_loss;     // per-epoch mean L^REG (reg only)
  std::size_t corrupted_samples = 0;  // cor only: samples with a matched relation
};

struct TrainResult {
  ModelParams params;
  TrainHistory history;
};

/// Trains from `initial`. Every epoch reshuffles the dataset and draws a
/// fresh mask per sample. Randomness comes from streams derived from
/// config.seed, so identical inputs give identical parameters.
TrainResult train(ModelParams initial, const Dataset& data, const Layout& layout,
                  const TrainConfig& config, std::span<const IndependenceRelation> relations);

/// Initializes from the "model-init" stream of config.seed, then trains.
TrainResult train_understudy(const Dag& dag, const Dataset& data, const TrainConfig& config,
                             std::span<const IndependenceRelation> relations);

/// Predicted distributions of `targets` given an evidence assignment.
std::vector<Distribution> understudy_predict(const ModelParams& params, const Layout& layout,
                                             const Assignment& evidence,
                                             std::span<const std::size_t> targets);

}  // namespace understudy
