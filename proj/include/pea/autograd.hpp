#pragma once

// Define-by-run reverse-mode differentiation over the fixed op vocabulary the
// model zoo needs. A Tape is rebuilt for every step; ops append nodes whose
// values are immutable once recorded.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pea/activations.hpp"
#include "pea/kernels.hpp"
#include "pea/tensor.hpp"

namespace pea {

/// Parameter groups drive weight-decay exclusions.
enum class ParamGroup { Weight, DepthwiseWeight, Bias, BatchNormScale, BatchNormShift };

std::string to_string(ParamGroup group);
ParamGroup parse_param_group(std::string_view text);

template <typename T>
struct Parameter {
  std::string name;
  ParamGroup group = ParamGroup::Weight;
  BasicTensor<T> value;
};

/// Gradients keyed by parameter name.
template <typename T>
using GradientMap = std::map<std::string, BasicTensor<T>>;

template <typename T>
class Tape;

/// Handle to a node on a tape.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  const BasicTensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape<T>& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <typename T>
class Tape {
 public:
  /// Receives the gradient of the node's output and accumulates into inputs.
  using Backward = std::function<void(Tape&, const BasicTensor<T>&)>;

  /// With `record` false no backward closures are kept (inference).
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return record_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  Var<T> constant(BasicTensor<T> value);
  /// Leaf whose gradient is retained and readable through grad().
  Var<T> variable(BasicTensor<T> value);
  /// Leaf tied to a named parameter; its gradient appears in backward()'s map.
  Var<T> parameter(const Parameter<T>& p);

  /// Appends an op node. `inputs` lists the nodes the op reads.
  Var<T> push(BasicTensor<T> value, std::initializer_list<Var<T>> inputs, Backward backward);

  bool requires_grad(Var<T> v) const { return nodes_.at(v.id()).requires_grad; }
  const BasicTensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }

  /// Reverse sweep from a single-element loss. Throws StateError when the
  /// loss is not on this tape, the tape is empty or not recording, or
  /// backward already ran.
  GradientMap<T> backward(Var<T> loss);

  /// Gradient of a variable() leaf; StateError before backward().
  BasicTensor<T> grad(Var<T> v) const;

  void accumulate(Var<T> v, const BasicTensor<T>& g);

 private:
  struct Node {
    BasicTensor<T> value;
    BasicTensor<T> grad;
    Backward backward;
    const Parameter<T>* param = nullptr;
    bool requires_grad = false;
    bool retain = false;
  };

  Var<T> add_leaf(BasicTensor<T> value, bool requires_grad, const Parameter<T>* param);

  bool record_;
  bool backward_done_ = false;
  std::vector<Node> nodes_;
};

template <typename T>
const BasicTensor<T>& Var<T>::value() const {
  return tape_->value(id_);
}

namespace ops {

template <typename T>
Var<T> add(Var<T> a, Var<T> b);
template <typename T>
Var<T> mul(Var<T> a, Var<T> b);
/// Sum of all elements, accumulated in 64-bit.
template <typename T>
Var<T> sum(Var<T> a);
template <typename T>
Var<T> matmul(Var<T> a, Var<T> b);
/// Adds a per-channel bias to a rank-2 [N×C] or rank-4 [N×C×H×W] input.
template <typename T>
Var<T> add_bias(Var<T> x, Var<T> bias);
/// Affine layer: x viewed as [N × K], w[K × F], b[F].
template <typename T>
Var<T> dense(Var<T> x, Var<T> w, Var<T> b);
template <typename T>
Var<T> conv2d(Var<T> x, Var<T> w, const kernels::ConvParams& p);
template <typename T>
Var<T> max_pool2x2(Var<T> x);
template <typename T>
Var<T> global_avg_pool(Var<T> x);
template <typename T>
Var<T> flatten(Var<T> x);

template <typename T>
struct BatchStats {
  BasicTensor<T> mean;
  BasicTensor<T> var;  // unbiased
};

/// Training-mode batch normalization over all axes but the channel axis.
/// `stats`, when given, receives the batch mean and unbiased variance.
template <typename T>
Var<T> batch_norm_train(Var<T> x, Var<T> gamma, Var<T> beta, double eps, BatchStats<T>* stats);
/// Per-channel affine with constant scale/shift (folded inference batch norm).
template <typename T>
Var<T> channel_affine(Var<T> x, const BasicTensor<T>& scale, const BasicTensor<T>& shift);

template <typename T>
Var<T> activation(Var<T> x, const ActivationKind& kind);
/// α·relu(x) + (1−α)·sota(x); exact ReLU at α=1, exact sota at α=0.
template <typename T>
Var<T> weighted_ensemble(Var<T> x, const ActivationKind& sota, double alpha);
/// Element i uses relu when relu_mask[i] != 0, sota otherwise; the same
/// routing is used for the gradient.
template <typename T>
Var<T> masked_ensemble(Var<T> x, const ActivationKind& sota, std::span<const std::uint8_t> relu_mask);
/// y = x · mask · scale with a 0/1 keep mask.
template <typename T>
Var<T> dropout(Var<T> x, std::span<const std::uint8_t> keep_mask, double scale);

template <typename T>
Var<T> softmax(Var<T> x);

/// Mean over the batch of cross-entropy against
/// (1 − smoothing)·onehot + smoothing/C.
template <typename T>
Var<T> softmax_cross_entropy(Var<T> logits, std::span<const int> labels, double smoothing);

}  // namespace ops

/// Weighted ensemble on a plain tensor (same rounding as the op).
template <typename T>
BasicTensor<T> weighted_ensemble_values(const BasicTensor<T>& x, const ActivationKind& sota, double alpha);

/// Loss value of softmax_cross_entropy in 64-bit; also writes d(loss)/d(logits)
/// when `grad` is given.
template <typename T>
double label_smoothed_cross_entropy(const BasicTensor<T>& logits, std::span<const int> labels,
                                    double smoothing, BasicTensor<T>* grad = nullptr);

}  // namespace pea
