#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "pea/activations.hpp"
#include "pea/autograd.hpp"
#include "pea/rng.hpp"

namespace pea {

enum class Mode { Train, Eval };

template <typename T>
struct ForwardContext {
  Tape<T>& tape;
  Mode mode = Mode::Eval;
  bool training() const noexcept { return mode == Mode::Train; }
};

/// Non-trainable state (batch-norm running statistics).
template <typename T>
struct Buffer {
  std::string name;
  BasicTensor<T> value;
};

enum class LayerKind { Dense, Conv2d, BatchNorm, Activation, Ensemble, MaxPool, GlobalAvgPool, Dropout, Sequential, Residual };

template <typename T>
class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  const std::string& name() const noexcept { return name_; }

  virtual Var<T> forward(Var<T> x, ForwardContext<T>& ctx) = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;

  virtual void collect_parameters(std::vector<Parameter<T>*>&) {}
  virtual void collect_buffers(std::vector<Buffer<T>*>&) {}
  /// Owned child slots of containers; replacement through the pointer is allowed.
  virtual void collect_children(std::vector<std::unique_ptr<Layer>*>&) {}
  /// Stream consumed in training mode, if any.
  virtual RandomStream* random_stream() { return nullptr; }

  /// True for layers filling a model's activation slot.
  bool is_activation_slot() const { return kind() == LayerKind::Activation || kind() == LayerKind::Ensemble; }

 protected:
  Layer(const Layer&) = default;

 private:
  std::string name_;
};

template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(std::string name, std::size_t in, std::size_t out);
  LayerKind kind() const override { return LayerKind::Dense; }
  Var<T> forward(Var<T> x, ForwardContext<T>& ctx) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Dense>(*this); }
  void collect_parameters(std::vector<Parameter<T>*>& out) override;

  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }
  const Parameter<T>& weight() const { return weight_; }
  const Parameter<T>& bias() const { return bias_; }

 private:
  Parameter<T> weight_;  // [in × out]
  Parameter<T> bias_;    // [out]
};

template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(std::string name, std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
         kernels::ConvParams params);
  LayerKind kind() const override { return LayerKind::Conv2d; }
  Var<T> forward(Var<T> x, ForwardContext<T>& ctx) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv2d>(*this); }
  void collect_parameters(std::vector<Parameter<T>*>& out) override;

  const kernels::ConvParams& params() const { return params_; }
  Parameter<T>& weight() { return weight_; }
  const Parameter<T>& weight() const { return weight_; }

 private:
  kernels::ConvParams params_;
  Parameter<T> weight_;  // [out × in/groups × k × k]
};

template <typename T>
class BatchNorm final : public Layer<T> {
 public:
  static constexpr double kMomentum = 0.9;
  static constexpr double kEps = 1e-5;

  BatchNorm(std::string name, std::size_t channels);
  LayerKind kind() const override { return LayerKind::BatchNorm; }
  /// Train: batch statistics, running stats ← 0.9·running + 0.1·batch.
  /// Eval: folded per-channel affine of the running statistics.
  Var<T> forward(Var<T> x, ForwardContext<T>& ctx) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<BatchNorm>(*this); }
  void collect_parameters(std::vector<Parameter<T>*>& out) override;
  void collect_buffers(std::vector<Buffer<T>*>& out) override;

  /// (scale, shift) used in eval mode and by the exporter.
  std::pair<BasicTensor<T>, BasicTensor<T>> folded() const;

 private:
  Parameter<T> gamma_;
  Parameter<T> beta_;
  Buffer<T> running_mean_;
  Buffer<T> running_var_;
};

template <typename T>
class Activation final : public Layer<T> {
 public:
  Activation(std::string name, ActivationKind kind) : Layer<T>(std::move(name)), activation_(kind) {}
  LayerKind kind() const override { return LayerKind::Activation; }
  Var<T> forward(Var<T> x, ForwardContext<T>&) override { return ops::activation(x, activation_); }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Activation>(*this); }
  const ActivationKind& activation() const { return activation_; }

 private:
  ActivationKind activation_;
};

template <typename T>
class MaxPool2x2 final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  LayerKind kind() const override { return LayerKind::MaxPool; }
  Var<T> forward(Var<T> x, ForwardContext<T>&) override { return ops::max_pool2x2(x); }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<MaxPool2x2>(*this); }
};

template <typename T>
class GlobalAvgPool final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  LayerKind kind() const override { return LayerKind::GlobalAvgPool; }
  Var<T> forward(Var<T> x, ForwardContext<T>&) override { return ops::global_avg_pool(x); }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<GlobalAvgPool>(*this); }
};

/// Inverted dropout; identity in eval mode and at rate 0.
template <typename T>
class Dropout final : public Layer<T> {
 public:
  Dropout(std::string name, double rate, RandomStream stream);
  LayerKind kind() const override { return LayerKind::Dropout; }
  Var<T> forward(Var<T> x, ForwardContext<T>& ctx) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Dropout>(*this); }
  RandomStream* random_stream() override { return &stream_; }
  double rate() const { return rate_; }

 private:
  double rate_;
  RandomStream stream_;
};

template <typename T>
class Sequential final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  Sequential(const Sequential& other);
  LayerKind kind() const override { return LayerKind::Sequential; }
  Var<T> forward(Var<T> x, ForwardContext<T>& ctx) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Sequential>(*this); }
  void collect_children(std::vector<std::unique_ptr<Layer<T>>*>& out) override;

  void add(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }
  const std::vector<std::unique_ptr<Layer<T>>>& layers() const { return layers_; }
  bool empty() const { return layers_.empty(); }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

/// post(body(x) + shortcut(x)); an empty shortcut is the identity.
template <typename T>
class Residual final : public Layer<T> {
 public:
  Residual(std::string name, std::unique_ptr<Layer<T>> body, std::unique_ptr<Layer<T>> shortcut,
           std::unique_ptr<Layer<T>> post);
  Residual(const Residual& other);
  LayerKind kind() const override { return LayerKind::Residual; }
  Var<T> forward(Var<T> x, ForwardContext<T>& ctx) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Residual>(*this); }
  void collect_children(std::vector<std::unique_ptr<Layer<T>>*>& out) override;

  const Layer<T>& body() const { return *body_; }
  const Layer<T>& shortcut() const { return *shortcut_; }
  const Layer<T>& post() const { return *post_; }

 private:
  std::unique_ptr<Layer<T>> body_;
  std::unique_ptr<Layer<T>> shortcut_;
  std::unique_ptr<Layer<T>> post_;
};

}  // namespace pea
