#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "pea/ensemble.hpp"
#include "pea/layers.hpp"

namespace pea {

enum class Architecture { MLP, SmallCNN, TinyResNet, TinyDepthwiseNet };

std::string to_string(Architecture a);
Architecture parse_architecture(const std::string& text);

/// What fills every activation position of a network.
struct ActivationSlot {
  enum class Kind { PlainReLU, Plain, Ensemble };

  Kind kind = Kind::PlainReLU;
  ActivationKind activation = ActivationKind::relu();
  EnsembleConfig ensemble{};
  double initial_alpha = 0.0;

  static ActivationSlot plain_relu() { return {}; }
  static ActivationSlot plain(ActivationKind kind);
  static ActivationSlot ensemble_of(EnsembleConfig config, double initial_alpha = 0.0);

  /// "relu", "gelu", "pea-weighted(gelu)", "pea-stochastic(swish(1.5))".
  std::string describe() const;
  bool operator==(const ActivationSlot&) const = default;
};

struct ModelSpec {
  Architecture architecture = Architecture::SmallCNN;
  std::size_t in_channels = 1;
  std::size_t in_height = 16;
  std::size_t in_width = 16;
  /// MLP: every layer width, input and classes included (e.g. 784,128,10).
  /// Convolutional nets: channels per stage/block.
  std::vector<std::size_t> widths{8, 16, 32};
  std::size_t num_classes = 10;
  double dropout_rate = 0.0;
  ActivationSlot slot{};

  /// ConfigError on inconsistent widths or an ill-formed slot.
  void validate() const;
  std::size_t input_size() const { return in_channels * in_height * in_width; }
  bool operator==(const ModelSpec&) const = default;
};

/// Reasonable widths for an architecture at the given input geometry.
ModelSpec default_model_spec(Architecture a, std::size_t channels, std::size_t height, std::size_t width,
                             std::size_t num_classes);

template <typename T>
class BasicModel {
 public:
  using Replacer = std::function<std::unique_ptr<Layer<T>>(const Layer<T>&)>;

  BasicModel(ModelSpec spec, std::uint64_t seed, std::unique_ptr<Sequential<T>> root);
  BasicModel(const BasicModel& other);
  BasicModel& operator=(const BasicModel& other);
  BasicModel(BasicModel&&) noexcept = default;
  BasicModel& operator=(BasicModel&&) noexcept = default;

  const ModelSpec& spec() const { return spec_; }
  void set_spec(ModelSpec spec) { spec_ = std::move(spec); }
  std::uint64_t seed() const { return seed_; }

  /// DimensionError when x does not match the input geometry.
  Var<T> forward(Var<T> x, ForwardContext<T>& ctx);
  /// Forward on a non-recording tape.
  BasicTensor<T> logits(const BasicTensor<T>& x, Mode mode = Mode::Eval);

  std::vector<Parameter<T>*> parameters();
  std::vector<const Parameter<T>*> parameters() const;
  std::vector<Buffer<T>*> buffers();
  std::vector<const Buffer<T>*> buffers() const;
  /// Pre-order, containers included.
  std::vector<Layer<T>*> layers();
  std::vector<const Layer<T>*> layers() const;
  std::vector<EnsembleActivation<T>*> ensemble_layers();
  std::vector<const EnsembleActivation<T>*> ensemble_layers() const;
  /// (layer name, stream) for every layer that consumes randomness in training.
  std::vector<std::pair<std::string, RandomStream*>> random_streams();
  std::size_t parameter_count() const;

  void set_alpha(double alpha);
  /// Calls fn on every layer held in a container slot; a non-null result replaces it.
  void replace_slots(const Replacer& fn);

  const Sequential<T>& root() const { return *root_; }

 private:
  ModelSpec spec_;
  std::uint64_t seed_;
  std::unique_ptr<Sequential<T>> root_;
};

using Model = BasicModel<float>;
using Model64 = BasicModel<double>;

/// Builds and He-initialises a network. Same (spec, seed) ⇒ same weights.
template <typename T>
BasicModel<T> build(const ModelSpec& spec, std::uint64_t seed);

/// Layer placed in one activation position.
template <typename T>
std::unique_ptr<Layer<T>> make_slot_layer(const ActivationSlot& slot, const std::string& name, std::uint64_t seed);

/// Replaces every activation position with `slot`; weights are untouched.
template <typename T>
void swap_activation(BasicModel<T>& model, const ActivationSlot& slot);

/// Same network in another precision: weights, buffers, alphas and RNG state copied.
template <typename U, typename T>
BasicModel<U> convert(const BasicModel<T>& model);

}  // namespace pea
