#include "understudy/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "understudy/network_io.hpp"

namespace understudy {

VariableMask mask_from(std::span<const std::size_t> indices) {
  VariableMask m = 0;
  for (std::size_t i : indices) m |= mask_of(i);
  return m;
}

std::vector<std::size_t> mask_members(VariableMask m, std::size_t n) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (mask_has(m, i)) out.push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------- Layout

Layout Layout::from_cardinalities(std::span<const std::size_t> cards) {
  if (cards.size() > kMaxVariables) {
    throw std::invalid_argument("layouts support at most 64 variables");
  }
  Layout layout;
  for (std::size_t c : cards) {
    layout.offsets.push_back(layout.k);
    layout.widths.push_back(c);
    layout.k += c;
  }
  return layout;
}

Layout Layout::from_dag(const Dag& dag) {
  std::vector<std::size_t> cards;
  for (std::size_t i = 0; i < dag.size(); ++i) cards.push_back(dag.cardinality(i));
  return from_cardinalities(cards);
}

VariableMask Layout::all() const {
  const std::size_t n = variables();
  return n == 64 ? ~VariableMask{0} : (VariableMask{1} << n) - 1;
}

// ---------------------------------------------------------------- ModelParams

ModelParams::ModelParams(std::size_t k, std::size_t h) : k_(k), h_(h) {
  const std::array<std::size_t, 7> sizes = {k * h, h, h * h, h, h * k, k, h};
  bounds_[0] = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) bounds_[i + 1] = bounds_[i] + sizes[i];
  data_.assign(bounds_[7], 0.0);
}

std::span<double> ModelParams::field(std::size_t i) {
  return std::span<double>(data_).subspan(bounds_.at(i), bounds_.at(i + 1) - bounds_[i]);
}

std::span<const double> ModelParams::field(std::size_t i) const {
  return std::span<const double>(data_).subspan(bounds_.at(i), bounds_.at(i + 1) - bounds_[i]);
}

std::size_t ModelParams::linear_parameter_count() const { return bounds_[6]; }

void ModelParams::set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

std::vector<double> MaskedInstance::one_hot(const Layout& layout) const {
  std::vector<double> v(layout.k, 0.0);
  for (std::size_t i = 0; i < layout.variables(); ++i) {
    v[layout.offsets[i] + static_cast<std::size_t>(values.at(i))] = 1.0;
  }
  return v;
}

ModelParams init_model(const Layout& layout, std::size_t hidden, Rng& rng) {
  if (hidden == 0) throw std::invalid_argument("hidden width must be at least 1");
  const std::size_t k = layout.k;
  ModelParams params(k, hidden);
  auto glorot = [&](std::span<double> w, std::size_t fan_in, std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& x : w) x = rng.uniform(-limit, limit);
  };
  glorot(params.w1(), k, hidden);
  glorot(params.w2(), hidden, hidden);
  glorot(params.w3(), hidden, k);
  for (double& x : params.u()) x = rng.uniform(-0.1, 0.1);
  return params;
}

// ---------------------------------------------------------------- forward

namespace {

void softmax_slots(const Layout& layout, std::span<double> values) {
  for (std::size_t i = 0; i < layout.variables(); ++i) {
    double* slot = values.data() + layout.offsets[i];
    const std::size_t w = layout.widths[i];
    const double peak = *std::max_element(slot, slot + w);
    double total = 0.0;
    for (std::size_t s = 0; s < w; ++s) {
      slot[s] = std::exp(slot[s] - peak);
      total += slot[s];
    }
    for (std::size_t s = 0; s < w; ++s) slot[s] /= total;
  }
}

/// out[j] = bias[j] + Σ_i in[i] · W[i, j] for row-major W (rows × cols).
void affine(std::span<const double> in, std::span<const double> w, std::span<const double> bias,
            std::span<double> out) {
  const std::size_t cols = out.size();
  std::copy(bias.begin(), bias.end(), out.begin());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double x = in[i];
    if (x == 0.0) continue;
    const double* row = w.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) out[j] += x * row[j];
  }
}

/// out[i] = Σ_j W[i, j] · d[j].
void transpose_apply(std::span<const double> w, std::span<const double> d,
                     std::span<double> out) {
  const std::size_t cols = d.size();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double* row = w.data() + i * cols;
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc += row[j] * d[j];
    out[i] = acc;
  }
}

/// W[i, j] += a[i] · d[j].
void outer_accumulate(std::span<const double> a, std::span<const double> d, std::span<double> w) {
  const std::size_t cols = d.size();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i];
    if (x == 0.0) continue;
    double* row = w.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) row[j] += x * d[j];
  }
}

}  // namespace

std::vector<double> compute_v0(const ModelParams& params, const Layout& layout) {
  std::vector<double> v0(layout.k);
  affine(params.u(), params.w3(), params.b3(), v0);
  softmax_slots(layout, v0);
  return v0;
}

BatchContext::BatchContext(const ModelParams& params, const Layout& layout)
    : params_(params),
      layout_(layout),
      v0_(compute_v0(params, layout)),
      dv0_(layout.k, 0.0),
      scratch_h1_(params.h()),
      scratch_h2_(params.h()) {
  if (params.k() != layout.k) throw std::invalid_argument("model and layout widths differ");
}

void BatchContext::forward(const MaskedInstance& instance, PassCache& cache) const {
  const std::size_t k = layout_.k;
  const std::size_t h = params_.h();
  cache.evidence = instance.evidence;
  cache.input.assign(k, 0.0);
  for (std::size_t i = 0; i < layout_.variables(); ++i) {
    const std::size_t off = layout_.offsets[i];
    if (mask_has(instance.evidence, i)) {
      cache.input[off + static_cast<std::size_t>(instance.values[i])] = 1.0;
    } else {
      std::copy_n(v0_.begin() + static_cast<std::ptrdiff_t>(off), layout_.widths[i],
                  cache.input.begin() + static_cast<std::ptrdiff_t>(off));
    }
  }
  cache.hidden1.resize(h);
  cache.hidden2.resize(h);
  cache.output.resize(k);
  affine(cache.input, params_.w1(), params_.b1(), cache.hidden1);
  for (double& x : cache.hidden1) x = std::tanh(x);
  affine(cache.hidden1, params_.w2(), params_.b2(), cache.hidden2);
  for (double& x : cache.hidden2) x = std::tanh(x);
  affine(cache.hidden2, params_.w3(), params_.b3(), cache.output);
  softmax_slots(layout_, cache.output);
  for (std::size_t i = 0; i < layout_.variables(); ++i) {
    if (!mask_has(instance.evidence, i)) continue;
    const std::size_t off = layout_.offsets[i];
    std::copy_n(cache.input.begin() + static_cast<std::ptrdiff_t>(off), layout_.widths[i],
                cache.output.begin() + static_cast<std::ptrdiff_t>(off));
  }
}

void BatchContext::backward(const PassCache& cache, std::span<const double> dlogits,
                            ModelParams& grads) {
  const std::size_t h = params_.h();
  auto& d2 = scratch_h2_;
  auto& d1 = scratch_h1_;

  outer_accumulate(cache.hidden2, dlogits, grads.w3());
  auto db3 = grads.b3();
  for (std::size_t j = 0; j < dlogits.size(); ++j) db3[j] += dlogits[j];
  transpose_apply(params_.w3(), dlogits, d2);
  for (std::size_t j = 0; j < h; ++j) d2[j] *= 1.0 - cache.hidden2[j] * cache.hidden2[j];

  outer_accumulate(cache.hidden1, d2, grads.w2());
  auto db2 = grads.b2();
  for (std::size_t j = 0; j < h; ++j) db2[j] += d2[j];
  transpose_apply(params_.w2(), d2, d1);
  for (std::size_t j = 0; j < h; ++j) d1[j] *= 1.0 - cache.hidden1[j] * cache.hidden1[j];

  outer_accumulate(cache.input, d1, grads.w1());
  auto db1 = grads.b1();
  for (std::size_t j = 0; j < h; ++j) db1[j] += d1[j];

  // Input gradient only matters where the input came from v0.
  const auto w1 = params_.w1();
  for (std::size_t i = 0; i < layout_.variables(); ++i) {
    if (mask_has(cache.evidence, i)) continue;
    for (std::size_t s = 0; s < layout_.widths[i]; ++s) {
      const std::size_t row = layout_.offsets[i] + s;
      const double* w = w1.data() + row * h;
      double acc = 0.0;
      for (std::size_t j = 0; j < h; ++j) acc += w[j] * d1[j];
      dv0_[row] += acc;
    }
  }
}

void BatchContext::finish(ModelParams& grads) {
  std::vector<double> dz(layout_.k, 0.0);
  softmax_backward(layout_, v0_, dv0_, layout_.all(), dz);
  outer_accumulate(params_.u(), dz, grads.w3());
  auto db3 = grads.b3();
  for (std::size_t j = 0; j < dz.size(); ++j) db3[j] += dz[j];
  std::vector<double> du(params_.h());
  transpose_apply(params_.w3(), dz, du);
  auto gu = grads.u();
  for (std::size_t i = 0; i < du.size(); ++i) gu[i] += du[i];
  std::fill(dv0_.begin(), dv0_.end(), 0.0);
}

void softmax_backward(const Layout& layout, std::span<const double> probs,
                      std::span<const double> dprobs, VariableMask vars,
                      std::span<double> dlogits) {
  for (std::size_t i = 0; i < layout.variables(); ++i) {
    if (!mask_has(vars, i)) continue;
    const std::size_t off = layout.offsets[i];
    const std::size_t w = layout.widths[i];
    double dot = 0.0;
    for (std::size_t s = 0; s < w; ++s) dot += dprobs[off + s] * probs[off + s];
    for (std::size_t s = 0; s < w; ++s) {
      dlogits[off + s] += probs[off + s] * (dprobs[off + s] - dot);
    }
  }
}

std::vector<double> forward(const ModelParams& params, const Layout& layout,
                            const MaskedInstance& instance) {
  BatchContext ctx(params, layout);
  PassCache cache;
  ctx.forward(instance, cache);
  return std::move(cache.output);
}

// ---------------------------------------------------------------- loss

double accumulate_cross_entropy(BatchContext& ctx, const Layout& layout,
                                const MaskedInstance& instance, double weight,
                                PassCache& cache, ModelParams& grads) {
  if (instance.scored & instance.evidence) {
    throw std::invalid_argument("scored variables must not be evidence");
  }
  ctx.forward(instance, cache);
  std::vector<double> dlogits(layout.k, 0.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < layout.variables(); ++i) {
    if (!mask_has(instance.scored, i)) continue;
    const std::size_t off = layout.offsets[i];
    const auto observed = static_cast<std::size_t>(instance.values[i]);
    const double p = cache.output[off + observed];
    if (p < kProbabilityFloor) {
      // Clamped: the loss is flat in the parameters here.
      loss -= weight * std::log(kProbabilityFloor);
      continue;
    }
    loss -= weight * std::log(p);
    for (std::size_t s = 0; s < layout.widths[i]; ++s) {
      dlogits[off + s] = weight * (cache.output[off + s] - (s == observed ? 1.0 : 0.0));
    }
  }
  ctx.backward(cache, dlogits, grads);
  return loss;
}

LossAndGrads loss_and_grads(const ModelParams& params, const Layout& layout,
                            std::span<const MaskedInstance> batch) {
  if (batch.empty()) throw std::invalid_argument("loss_and_grads: empty batch");
  LossAndGrads out{0.0, ModelParams(params.k(), params.h())};
  BatchContext ctx(params, layout);
  PassCache cache;
  const double per_instance = 1.0 / static_cast<double>(batch.size());
  for (const auto& inst : batch) {
    const auto scored = static_cast<double>(std::popcount(inst.scored));
    if (scored == 0) throw std::invalid_argument("instance has no scored variable");
    out.loss += accumulate_cross_entropy(ctx, layout, inst, per_instance / scored, cache, out.grads);
  }
  ctx.finish(out.grads);
  return out;
}

LossAndGrads loss_and_grads(const ModelParams& params, const Layout& layout,
                            std::span<const SampleGroup> batch) {
  if (batch.empty()) throw std::invalid_argument("loss_and_grads: empty batch");
  LossAndGrads out{0.0, ModelParams(params.k(), params.h())};
  BatchContext ctx(params, layout);
  PassCache cache;
  const double per_sample = 1.0 / static_cast<double>(batch.size());
  for (const auto& group : batch) {
    double scored = 0;
    for (const auto& inst : group) scored += std::popcount(inst.scored);
    if (scored == 0) throw std::invalid_argument("sample has no scored variable");
    for (const auto& inst : group) {
      out.loss += accumulate_cross_entropy(ctx, layout, inst, per_sample / scored, cache, out.grads);
    }
  }
  ctx.finish(out.grads);
  return out;
}

// ---------------------------------------------------------------- Adam

AdamState::AdamState(const ModelParams& params, double lr)
    : learning_rate(lr),
      first_moment(params.total_parameter_count(), 0.0),
      second_moment(params.total_parameter_count(), 0.0) {}

void adam_step(AdamState& state, ModelParams& params, const ModelParams& grads) {
  auto p = params.flat();
  auto g = grads.flat();
  if (p.size() != g.size() || p.size() != state.first_moment.size()) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < p.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * g[i];
    v = state.beta2 * v + (1.0 - state.beta2) * g[i] * g[i];
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    p[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

// ---------------------------------------------------------------- checkpoint

using nlohmann::json;

std::string checkpoint_to_json(const Checkpoint& checkpoint) {
  json doc;
  json vars = json::array();
  for (const auto& v : checkpoint.variables) vars.push_back({{"name", v.name}, {"states", v.states}});
  doc["layout"] = {{"variables", vars},
                   {"offsets", checkpoint.layout.offsets},
                   {"widths", checkpoint.layout.widths},
                   {"k", checkpoint.layout.k}};
  doc["h"] = checkpoint.params.h();
  json params = json::object();
  for (std::size_t i = 0; i < ModelParams::kFieldNames.size(); ++i) {
    auto f = checkpoint.params.field(i);
    params[std::string(ModelParams::kFieldNames[i])] = std::vector<double>(f.begin(), f.end());
  }
  doc["params"] = params;
  doc["seed"] = checkpoint.seed;
  doc["config"] = checkpoint.config;
  return doc.dump(1) + "\n";
}

Checkpoint parse_checkpoint(const std::string& json_text) {
  try {
    const json doc = json::parse(json_text);
    Checkpoint out;
    const auto& layout = doc.at("layout");
    for (const auto& v : layout.at("variables")) {
      out.variables.push_back(
          {v.at("name").get<std::string>(), v.at("states").get<std::vector<std::string>>()});
    }
    out.layout.offsets = layout.at("offsets").get<std::vector<std::size_t>>();
    out.layout.widths = layout.at("widths").get<std::vector<std::size_t>>();
    out.layout.k = layout.at("k").get<std::size_t>();
    std::vector<std::size_t> cards;
    for (const auto& v : out.variables) cards.push_back(v.states.size());
    if (Layout::from_cardinalities(cards) != out.layout) {
      throw std::runtime_error("checkpoint layout does not match its variables");
    }
    out.params = ModelParams(out.layout.k, doc.at("h").get<std::size_t>());
    for (std::size_t i = 0; i < ModelParams::kFieldNames.size(); ++i) {
      const auto values =
          doc.at("params").at(std::string(ModelParams::kFieldNames[i])).get<std::vector<double>>();
      auto f = out.params.field(i);
      if (values.size() != f.size()) {
        throw std::runtime_error("checkpoint field " + std::string(ModelParams::kFieldNames[i]) +
                                 " has the wrong size");
      }
      std::copy(values.begin(), values.end(), f.begin());
    }
    out.seed = doc.value("seed", std::uint64_t{0});
    out.config = doc.value("config", std::map<std::string, std::string>{});
    return out;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  write_text_file(path, checkpoint_to_json(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_text_file(path));
}

}  // namespace understudy
