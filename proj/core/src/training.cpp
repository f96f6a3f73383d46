#include "understudy/training.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <numeric>
#include <optional>
#include <stdexcept>

namespace understudy {

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kPlain:
      return "plain";
    case Strategy::kReg:
      return "reg";
    case Strategy::kCor:
      return "cor";
  }
  return "plain";
}

Strategy parse_strategy(std::string_view text) {
  if (text == "plain" || text == "nn" || text == "NN") return Strategy::kPlain;
  if (text == "reg" || text == "nn-reg" || text == "NN+REG") return Strategy::kReg;
  if (text == "cor" || text == "nn-cor" || text == "NN+COR") return Strategy::kCor;
  throw std::invalid_argument("unknown strategy '" + std::string(text) + "'");
}

void TrainConfig::validate(std::size_t relation_count) const {
  if (epochs == 0) throw std::invalid_argument("epochs must be at least 1");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be at least 1");
  if (hidden == 0) throw std::invalid_argument("hidden width must be at least 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be non-negative");
  if (strategy == Strategy::kReg && reg_batch_size == 0) {
    throw std::invalid_argument("reg_batch_size must be at least 1");
  }
  if (strategy != Strategy::kPlain && relation_count == 0) {
    throw std::invalid_argument("strategy " + std::string(strategy_name(strategy)) +
                                " requires a non-empty relation list");
  }
}

std::map<std::string, std::string> TrainConfig::to_map() const {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  return {{"epochs", std::to_string(epochs)},
          {"batch_size", std::to_string(batch_size)},
          {"learning_rate", num(learning_rate)},
          {"strategy", std::string(strategy_name(strategy))},
          {"alpha", num(alpha)},
          {"reg_batch_size", std::to_string(reg_batch_size)},
          {"hidden", std::to_string(hidden)},
          {"seed", std::to_string(seed)}};
}

// ---------------------------------------------------------------- masking

MaskSplit sample_mask_of_size(std::size_t n, std::size_t m, Rng& rng) {
  if (n < 2 || n > kMaxVariables) throw std::invalid_argument("sample_mask: need 2..64 variables");
  if (m >= n) throw std::invalid_argument("sample_mask: evidence must leave a target");
  const auto chosen = rng.subset(n, m);
  MaskSplit split;
  split.evidence = mask_from(chosen);
  const VariableMask all = n == 64 ? ~VariableMask{0} : (VariableMask{1} << n) - 1;
  split.targets = all & ~split.evidence;
  return split;
}

MaskSplit sample_mask(std::size_t n, Rng& rng) {
  if (n < 2) throw std::invalid_argument("sample_mask: need at least 2 variables");
  const std::size_t m = rng.uniform_index(n);
  return sample_mask_of_size(n, m, rng);
}

MaskedInstance encode(const Assignment& sample, const MaskSplit& split) {
  return MaskedInstance{sample, split.evidence, split.targets};
}

// ---------------------------------------------------------------- REG

std::vector<RegDraw> sample_reg_draws(const Layout& layout, const IndependenceRelation& relation,
                                      Rng& rng, std::size_t count) {
  const std::size_t n = layout.variables();
  if (relation.x >= n || relation.y >= n) throw std::invalid_argument("relation outside layout");
  const std::size_t y_states = layout.widths[relation.y];
  if (y_states < 2) throw std::invalid_argument("REG needs Y with at least 2 states");

  VariableMask evidence = mask_of(relation.y);
  for (std::size_t a : relation.given) evidence |= mask_of(a);

  std::vector<RegDraw> draws;
  draws.reserve(count);
  for (std::size_t d = 0; d < count; ++d) {
    Assignment values(n, 0);
    for (std::size_t a : relation.given) {
      values[a] = static_cast<int>(rng.uniform_index(layout.widths[a]));
    }
    const std::size_t y = rng.uniform_index(y_states);
    const std::size_t y_prime = (y + 1 + rng.uniform_index(y_states - 1)) % y_states;
    RegDraw draw;
    draw.with_y = MaskedInstance{values, evidence, mask_of(relation.x)};
    draw.with_y.values[relation.y] = static_cast<int>(y);
    draw.with_y_prime = MaskedInstance{std::move(values), evidence, mask_of(relation.x)};
    draw.with_y_prime.values[relation.y] = static_cast<int>(y_prime);
    draws.push_back(std::move(draw));
  }
  return draws;
}

namespace {

/// Shared by the value-only and gradient paths.
double reg_pass(BatchContext& ctx, const Layout& layout, const IndependenceRelation& relation,
                std::span<const RegDraw> draws, double weight, ModelParams* grads) {
  if (draws.empty()) return 0.0;
  const std::size_t off = layout.offsets[relation.x];
  const std::size_t n = layout.widths[relation.x];
  const double per_draw = 1.0 / static_cast<double>(draws.size());
  PassCache a, b;
  std::vector<double> dprob(layout.k), dlogits(layout.k);
  double total = 0.0;
  for (const auto& draw : draws) {
    ctx.forward(draw.with_y, a);
    ctx.forward(draw.with_y_prime, b);
    double term = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = a.output[off + j] - b.output[off + j];
      term += d * d;
    }
    total += term / static_cast<double>(n);
    if (grads == nullptr) continue;

    const double scale = weight * per_draw * 2.0 / static_cast<double>(n);
    for (int side = 0; side < 2; ++side) {
      const PassCache& cache = side == 0 ? a : b;
      const double sign = side == 0 ? 1.0 : -1.0;
      std::fill(dprob.begin(), dprob.end(), 0.0);
      std::fill(dlogits.begin(), dlogits.end(), 0.0);
      for (std::size_t j = 0; j < n; ++j) {
        dprob[off + j] = sign * scale * (a.output[off + j] - b.output[off + j]);
      }
      softmax_backward(layout, cache.output, dprob, mask_of(relation.x), dlogits);
      ctx.backward(cache, dlogits, *grads);
    }
  }
  return total * per_draw;
}

}  // namespace

double reg_term(const ModelParams& params, const Layout& layout,
                const IndependenceRelation& relation, std::span<const RegDraw> draws) {
  BatchContext ctx(params, layout);
  return reg_pass(ctx, layout, relation, draws, 0.0, nullptr);
}

double reg_term(const ModelParams& params, const Layout& layout,
                const IndependenceRelation& relation, Rng& rng, std::size_t reg_batch_size) {
  const auto draws = sample_reg_draws(layout, relation, rng, reg_batch_size);
  return reg_term(params, layout, relation, draws);
}

double accumulate_reg(BatchContext& ctx, const Layout& layout, const IndependenceRelation& relation,
                      std::span<const RegDraw> draws, double weight, ModelParams& grads) {
  return reg_pass(ctx, layout, relation, draws, weight, &grads);
}

// ---------------------------------------------------------------- COR

namespace {

struct RelationMasks {
  VariableMask with_y;  // {Y} ∪ A
  VariableMask with_x;  // {X} ∪ A
};

RelationMasks masks_of(const IndependenceRelation& rel) {
  const VariableMask given = mask_from(rel.given);
  return {given | mask_of(rel.y), given | mask_of(rel.x)};
}

}  // namespace

std::vector<CorruptionMatch> applicable_relations(const MaskSplit& split,
                                                  std::span<const IndependenceRelation> relations) {
  std::vector<CorruptionMatch> out;
  for (std::size_t r = 0; r < relations.size(); ++r) {
    const auto& rel = relations[r];
    const auto masks = masks_of(rel);
    if (masks.with_y == split.evidence && mask_has(split.targets, rel.x)) {
      out.push_back({r, rel.x, rel.y});
    }
    if (masks.with_x == split.evidence && mask_has(split.targets, rel.y)) {
      out.push_back({r, rel.y, rel.x});
    }
  }
  return out;
}

RelationIndex::RelationIndex(std::span<const IndependenceRelation> relations) {
  for (std::size_t r = 0; r < relations.size(); ++r) {
    const auto& rel = relations[r];
    const auto masks = masks_of(rel);
    by_evidence_[masks.with_y].push_back({r, rel.x, rel.y});
    by_evidence_[masks.with_x].push_back({r, rel.y, rel.x});
  }
}

std::span<const CorruptionMatch> RelationIndex::lookup(VariableMask evidence) const {
  auto it = by_evidence_.find(evidence);
  if (it == by_evidence_.end()) return {};
  return it->second;
}

namespace {

SampleGroup build_passes(const Assignment& sample, const MaskSplit& split,
                         std::span<const CorruptionMatch> matches, const Layout& layout,
                         Rng& rng) {
  const std::size_t n = layout.variables();
  if (matches.empty()) return {encode(sample, split)};

  std::vector<VariableMask> pattern(n, 0);
  for (const auto& m : matches) {
    if (mask_has(split.targets, m.protect) && mask_has(split.evidence, m.corrupt)) {
      pattern[m.protect] |= mask_of(m.corrupt);
    }
  }
  SampleGroup passes;
  VariableMask assigned = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (!mask_has(split.targets, t) || mask_has(assigned, t)) continue;
    VariableMask scored = 0;
    for (std::size_t u = t; u < n; ++u) {
      if (mask_has(split.targets, u) && pattern[u] == pattern[t]) scored |= mask_of(u);
    }
    assigned |= scored;
    MaskedInstance inst{sample, split.evidence, scored};
    for (std::size_t v = 0; v < n; ++v) {
      if (mask_has(pattern[t], v)) {
        inst.values[v] = static_cast<int>(rng.uniform_index(layout.widths[v]));
      }
    }
    passes.push_back(std::move(inst));
  }
  return passes;
}

}  // namespace

SampleGroup corruption_passes(const Assignment& sample, const MaskSplit& split,
                              const RelationIndex& relations, const Layout& layout, Rng& rng) {
  return build_passes(sample, split, relations.lookup(split.evidence), layout, rng);
}

SampleGroup corruption_passes(const Assignment& sample, const MaskSplit& split,
                              std::span<const IndependenceRelation> relations,
                              const Layout& layout, Rng& rng) {
  const auto matches = applicable_relations(split, relations);
  return build_passes(sample, split, matches, layout, rng);
}

// ---------------------------------------------------------------- training loop

TrainResult train(ModelParams initial, const Dataset& data, const Layout& layout,
                  const TrainConfig& config, std::span<const IndependenceRelation> relations) {
  config.validate(relations.size());
  if (data.empty()) throw std::invalid_argument("train: dataset is empty");
  if (initial.k() != layout.k) throw std::invalid_argument("train: model does not match layout");
  const std::size_t n = layout.variables();

  Rng shuffle_rng = Rng::stream(config.seed, "shuffle");
  Rng mask_rng = Rng::stream(config.seed, "masking");
  Rng reg_rng = Rng::stream(config.seed, "regularisation");
  Rng cor_rng = Rng::stream(config.seed, "corruption");

  std::optional<RelationIndex> index;
  if (config.strategy == Strategy::kCor) index.emplace(relations);

  TrainResult result{std::move(initial), {}};
  ModelParams& params = result.params;
  AdamState adam(params, config.learning_rate);
  ModelParams grads(params.k(), params.h());
  PassCache cache;

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_target = 0.0, epoch_reg = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double per_sample = 1.0 / static_cast<double>(end - start);
      grads.set_zero();
      BatchContext ctx(params, layout);
      double batch_loss = 0.0;
      for (std::size_t s = start; s < end; ++s) {
        const Assignment& sample = data.records[order[s]];
        const MaskSplit split = sample_mask(n, mask_rng);
        const double weight =
            per_sample / static_cast<double>(std::popcount(split.targets));
        if (config.strategy == Strategy::kCor) {
          if (!index->lookup(split.evidence).empty()) ++result.history.corrupted_samples;
          const SampleGroup passes = corruption_passes(sample, split, *index, layout, cor_rng);
          for (const auto& pass : passes) {
            batch_loss += accumulate_cross_entropy(ctx, layout, pass, weight, cache, grads);
          }
        } else {
          batch_loss +=
              accumulate_cross_entropy(ctx, layout, encode(sample, split), weight, cache, grads);
        }
      }
      if (config.strategy == Strategy::kReg) {
        const auto& relation = relations[reg_rng.uniform_index(relations.size())];
        const auto draws = sample_reg_draws(layout, relation, reg_rng, config.reg_batch_size);
        epoch_reg += accumulate_reg(ctx, layout, relation, draws, config.alpha, grads);
      }
      ctx.finish(grads);
      adam_step(adam, params, grads);
      epoch_target += batch_loss;
      ++batches;
    }
    result.history.target_loss.push_back(epoch_target / static_cast<double>(batches));
    if (config.strategy == Strategy::kReg) {
      result.history.reg_loss.push_back(epoch_reg / static_cast<double>(batches));
    }
  }
  return result;
}

TrainResult train_understudy(const Dag& dag, const Dataset& data, const TrainConfig& config,
                             std::span<const IndependenceRelation> relations) {
  const Layout layout = Layout::from_dag(dag);
  Rng init_rng = Rng::stream(config.seed, "model-init");
  ModelParams initial = init_model(layout, config.hidden, init_rng);
  return train(std::move(initial), data, layout, config, relations);
}

std::vector<Distribution> understudy_predict(const ModelParams& params, const Layout& layout,
                                             const Assignment& evidence,
                                             std::span<const std::size_t> targets) {
  const std::size_t n = layout.variables();
  if (evidence.size() != n) throw std::invalid_argument("understudy_predict: evidence size");
  MaskedInstance inst{Assignment(n, 0), 0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    if (evidence[i] == kUnobserved) continue;
    if (evidence[i] < 0 || static_cast<std::size_t>(evidence[i]) >= layout.widths[i]) {
      throw std::invalid_argument("understudy_predict: evidence state out of range");
    }
    inst.values[i] = evidence[i];
    inst.evidence |= mask_of(i);
  }
  const auto out = forward(params, layout, inst);
  std::vector<Distribution> dists;
  dists.reserve(targets.size());
  for (std::size_t t : targets) {
    if (t >= n || mask_has(inst.evidence, t)) {
      throw std::invalid_argument("understudy_predict: target must be unobserved");
    }
    const auto first = out.begin() + static_cast<std::ptrdiff_t>(layout.offsets[t]);
    dists.push_back({t, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(layout.widths[t]))});
  }
  return dists;
}

}  // namespace understudy
