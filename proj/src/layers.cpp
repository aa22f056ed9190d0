#include "pea/layers.hpp"

namespace pea {

template <typename T>
Dense<T>::Dense(std::string name, std::size_t in, std::size_t out) : Layer<T>(std::move(name)) {
  weight_ = {this->name() + ".weight", ParamGroup::Weight, BasicTensor<T>({in, out})};
  bias_ = {this->name() + ".bias", ParamGroup::Bias, BasicTensor<T>({out})};
}

template <typename T>
Var<T> Dense<T>::forward(Var<T> x, ForwardContext<T>& ctx) {
  return ops::dense(x, ctx.tape.parameter(weight_), ctx.tape.parameter(bias_));
}

template <typename T>
void Dense<T>::collect_parameters(std::vector<Parameter<T>*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

template <typename T>
Conv2d<T>::Conv2d(std::string name, std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                  kernels::ConvParams params)
    : Layer<T>(std::move(name)), params_(params) {
  if (params.groups == 0 || in_channels % params.groups || out_channels % params.groups) {
    throw ConfigError("conv layer " + this->name() + ": groups must divide channel counts");
  }
  if (params.stride == 0) throw ConfigError("conv layer " + this->name() + ": stride must be positive");
  const bool depthwise = params.groups > 1 && params.groups == in_channels;
  weight_ = {this->name() + ".weight", depthwise ? ParamGroup::DepthwiseWeight : ParamGroup::Weight,
             BasicTensor<T>({out_channels, in_channels / params.groups, kernel, kernel})};
}

template <typename T>
Var<T> Conv2d<T>::forward(Var<T> x, ForwardContext<T>& ctx) {
  return ops::conv2d(x, ctx.tape.parameter(weight_), params_);
}

template <typename T>
void Conv2d<T>::collect_parameters(std::vector<Parameter<T>*>& out) {
  out.push_back(&weight_);
}

template <typename T>
BatchNorm<T>::BatchNorm(std::string name, std::size_t channels) : Layer<T>(std::move(name)) {
  gamma_ = {this->name() + ".gamma", ParamGroup::BatchNormScale, BasicTensor<T>({channels}, T{1})};
  beta_ = {this->name() + ".beta", ParamGroup::BatchNormShift, BasicTensor<T>({channels})};
  running_mean_ = {this->name() + ".running_mean", BasicTensor<T>({channels})};
  running_var_ = {this->name() + ".running_var", BasicTensor<T>({channels}, T{1})};
}

template <typename T>
Var<T> BatchNorm<T>::forward(Var<T> x, ForwardContext<T>& ctx) {
  if (!ctx.training()) {
    auto [scale, shift] = folded();
    return ops::channel_affine(x, scale, shift);
  }
  ops::BatchStats<T> stats;
  Var<T> y = ops::batch_norm_train(x, ctx.tape.parameter(gamma_), ctx.tape.parameter(beta_), kEps, &stats);
  for (std::size_t c = 0; c < stats.mean.size(); ++c) {
    running_mean_.value[c] =
        static_cast<T>(kMomentum * running_mean_.value[c] + (1.0 - kMomentum) * stats.mean[c]);
    running_var_.value[c] =
        static_cast<T>(kMomentum * running_var_.value[c] + (1.0 - kMomentum) * stats.var[c]);
  }
  return y;
}

template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> BatchNorm<T>::folded() const {
  return kernels::fold_batch_norm(gamma_.value, beta_.value, running_mean_.value, running_var_.value, kEps);
}

template <typename T>
void BatchNorm<T>::collect_parameters(std::vector<Parameter<T>*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

template <typename T>
void BatchNorm<T>::collect_buffers(std::vector<Buffer<T>*>& out) {
  out.push_back(&running_mean_);
  out.push_back(&running_var_);
}

template <typename T>
Dropout<T>::Dropout(std::string name, double rate, RandomStream stream)
    : Layer<T>(std::move(name)), rate_(rate), stream_(std::move(stream)) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
}

template <typename T>
Var<T> Dropout<T>::forward(Var<T> x, ForwardContext<T>& ctx) {
  if (!ctx.training() || rate_ == 0.0) return x;
  std::vector<std::uint8_t> keep(x.value().size());
  for (auto& k : keep) k = stream_.uniform() >= rate_ ? 1 : 0;
  return ops::dropout(x, keep, 1.0 / (1.0 - rate_));
}

template <typename T>
Sequential<T>::Sequential(const Sequential& other) : Layer<T>(other) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

template <typename T>
Var<T> Sequential<T>::forward(Var<T> x, ForwardContext<T>& ctx) {
  for (auto& l : layers_) x = l->forward(x, ctx);
  return x;
}

template <typename T>
void Sequential<T>::collect_children(std::vector<std::unique_ptr<Layer<T>>*>& out) {
  for (auto& l : layers_) out.push_back(&l);
}

template <typename T>
Residual<T>::Residual(std::string name, std::unique_ptr<Layer<T>> body, std::unique_ptr<Layer<T>> shortcut,
                      std::unique_ptr<Layer<T>> post)
    : Layer<T>(std::move(name)), body_(std::move(body)), shortcut_(std::move(shortcut)), post_(std::move(post)) {}

template <typename T>
Residual<T>::Residual(const Residual& other)
    : Layer<T>(other), body_(other.body_->clone()), shortcut_(other.shortcut_->clone()), post_(other.post_->clone()) {}

template <typename T>
Var<T> Residual<T>::forward(Var<T> x, ForwardContext<T>& ctx) {
  Var<T> main = body_->forward(x, ctx);
  Var<T> skip = shortcut_->forward(x, ctx);
  return post_->forward(ops::add(main, skip), ctx);
}

template <typename T>
void Residual<T>::collect_children(std::vector<std::unique_ptr<Layer<T>>*>& out) {
  out.push_back(&body_);
  out.push_back(&shortcut_);
  out.push_back(&post_);
}

#define PEA_INSTANTIATE_LAYERS(T) \
  template class Dense<T>;        \
  template class Conv2d<T>;       \
  template class BatchNorm<T>;    \
  template class Dropout<T>;      \
  template class Sequential<T>;   \
  template class Residual<T>;

PEA_INSTANTIATE_LAYERS(float)
PEA_INSTANTIATE_LAYERS(double)

}  // namespace pea
