#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "understudy/bayes_net.hpp"
#include "understudy/rng.hpp"

namespace understudy {

/// Set of variables as a bitmask over declaration indices (at most 64).
using VariableMask = std::uint64_t;

inline constexpr std::size_t kMaxVariables = 64;

inline bool mask_has(VariableMask m, std::size_t i) { return (m >> i) & 1U; }
inline VariableMask mask_of(std::size_t i) { return VariableMask{1} << i; }
VariableMask mask_from(std::span<const std::size_t> indices);
std::vector<std::size_t> mask_members(VariableMask m, std::size_t n);

/// Slot of every variable inside the concatenated one-hot vector.
struct Layout {
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> widths;
  std::size_t k = 0;

  static Layout from_cardinalities(std::span<const std::size_t> cards);
  static Layout from_dag(const Dag& dag);

  std::size_t variables() const { return offsets.size(); }
  VariableMask all() const;

  friend bool operator==(const Layout&, const Layout&) = default;
};

/// Parameters of the three-layer masked network plus the v0 source vector.
///
/// All fields live in one contiguous buffer in the order W1, b1, W2, b2, W3,
/// b3, u; weight matrices are row-major with the input dimension first
/// (W1 is k×h, W2 is h×h, W3 is h×k). The same type doubles as a gradient
/// buffer.
class ModelParams {
 public:
  static constexpr std::array<std::string_view, 7> kFieldNames = {"W1", "b1", "W2", "b2",
                                                                  "W3", "b3", "u"};

  ModelParams() = default;
  ModelParams(std::size_t k, std::size_t h);

  std::size_t k() const { return k_; }
  std::size_t h() const { return h_; }

  std::span<double> field(std::size_t i);
  std::span<const double> field(std::size_t i) const;

  std::span<double> w1() { return field(0); }
  std::span<double> b1() { return field(1); }
  std::span<double> w2() { return field(2); }
  std::span<double> b2() { return field(3); }
  std::span<double> w3() { return field(4); }
  std::span<double> b3() { return field(5); }
  std::span<double> u() { return field(6); }
  std::span<const double> w1() const { return field(0); }
  std::span<const double> b1() const { return field(1); }
  std::span<const double> w2() const { return field(2); }
  std::span<const double> b2() const { return field(3); }
  std::span<const double> w3() const { return field(4); }
  std::span<const double> b3() const { return field(5); }
  std::span<const double> u() const { return field(6); }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  /// kh + h + h² + h + hk + k: the three linear layers with biases.
  std::size_t linear_parameter_count() const;
  /// Linear layers plus the h entries of u.
  std::size_t total_parameter_count() const { return data_.size(); }

  void set_zero();

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  std::size_t k_ = 0;
  std::size_t h_ = 0;
  std::array<std::size_t, 8> bounds_{};
  std::vector<double> data_;
};

/// One training or query instance.
///
/// `values` holds a state per variable; only evidence entries (and scored
/// targets, for the loss) are read. Target slots are fed from v0.
struct MaskedInstance {
  Assignment values;
  VariableMask evidence = 0;
  VariableMask scored = 0;  // loss mask; must not intersect evidence

  /// Concatenated one-hot vector of `values` (k entries).
  std::vector<double> one_hot(const Layout& layout) const;
};

/// Glorot-uniform weights, zero biases, u ~ U[-0.1, 0.1].
ModelParams init_model(const Layout& layout, std::size_t hidden, Rng& rng);

/// Per-variable softmax of W3ᵀu + b3.
std::vector<double> compute_v0(const ModelParams& params, const Layout& layout);

/// v_out for one instance: target slots of the input replaced by v0, two
/// tanh layers, per-variable softmax, evidence slots overwritten by their
/// one-hots.
std::vector<double> forward(const ModelParams& params, const Layout& layout,
                            const MaskedInstance& instance);

/// Activations of one forward pass, kept for backpropagation.
struct PassCache {
  std::vector<double> input;
  std::vector<double> hidden1;
  std::vector<double> hidden2;
  std::vector<double> output;  // v_out
  VariableMask evidence = 0;
};

/// Forward/backward over one parameter snapshot. v0 is computed once on
/// construction; gradients reaching v0 through target input slots are
/// accumulated and pushed into W3, b3 and u by finish().
class BatchContext {
 public:
  BatchContext(const ModelParams& params, const Layout& layout);

  std::span<const double> v0() const { return v0_; }

  void forward(const MaskedInstance& instance, PassCache& cache) const;

  /// Accumulates parameter gradients for a loss whose derivative with
  /// respect to the output logits of this pass is `dlogits`.
  void backward(const PassCache& cache, std::span<const double> dlogits, ModelParams& grads);

  /// Propagates the accumulated dL/dv0; call once after all backward().
  void finish(ModelParams& grads);

 private:
  const ModelParams& params_;
  const Layout& layout_;
  std::vector<double> v0_;
  std::vector<double> dv0_;
  std::vector<double> scratch_h1_, scratch_h2_;
};

/// dL/dlogits given dL/dprobs, through each variable's softmax, for the
/// variables in `vars` (other slots left at zero).
void softmax_backward(const Layout& layout, std::span<const double> probs,
                      std::span<const double> dprobs, VariableMask vars,
                      std::span<double> dlogits);

/// Probability floor inside the cross-entropy log.
inline constexpr double kProbabilityFloor = 1e-12;

struct LossAndGrads {
  double loss = 0.0;
  ModelParams grads;
};

/// Mean over instances of the mean cross-entropy over scored variables.
LossAndGrads loss_and_grads(const ModelParams& params, const Layout& layout,
                            std::span<const MaskedInstance> batch);

/// Passes derived from a single observed sample; their scored sets
/// partition the sample's targets.
using SampleGroup = std::vector<MaskedInstance>;

/// Mean over samples of the mean cross-entropy over all scored variables
/// of the sample's passes. Equals the flat overload when every group holds
/// one instance.
LossAndGrads loss_and_grads(const ModelParams& params, const Layout& layout,
                            std::span<const SampleGroup> batch);

/// Adds `weight` × cross-entropy terms of one pass to `grads`; returns the
/// weighted loss. `weight` multiplies each scored variable's −log p.
double accumulate_cross_entropy(BatchContext& ctx, const Layout& layout,
                                const MaskedInstance& instance, double weight,
                                PassCache& cache, ModelParams& grads);

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t step = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;

  explicit AdamState(const ModelParams& params, double lr = 1e-3);
};

/// Bias-corrected Adam update.
void adam_step(AdamState& state, ModelParams& params, const ModelParams& grads);

/// Model checkpoint (JSON). Doubles are written in shortest round-trip
/// form, so reading a written checkpoint reproduces every parameter bit.
struct Checkpoint {
  std::vector<VariableSpec> variables;
  Layout layout;
  ModelParams params;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> config;
};

std::string checkpoint_to_json(const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(const std::string& json_text);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace understudy
