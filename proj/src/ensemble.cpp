#include "pea/ensemble.hpp"

#include "pea/model.hpp"

namespace pea {
namespace {

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ContractError("ensemble alpha must lie in [0, 1], got " + std::to_string(alpha));
  }
}

}  // namespace

std::string to_string(EnsembleMode mode) { return mode == EnsembleMode::Weighted ? "weighted" : "stochastic"; }

std::string to_string(SamplingGranularity g) {
  return g == SamplingGranularity::PerElement ? "per_element" : "per_tensor";
}

EnsembleMode parse_ensemble_mode(const std::string& text) {
  if (text == "weighted") return EnsembleMode::Weighted;
  if (text == "stochastic") return EnsembleMode::Stochastic;
  throw ConfigError("unknown ensemble mode '" + text + "' (expected weighted or stochastic)");
}

SamplingGranularity parse_sampling_granularity(const std::string& text) {
  if (text == "per_element") return SamplingGranularity::PerElement;
  if (text == "per_tensor") return SamplingGranularity::PerTensor;
  throw ConfigError("unknown sampling granularity '" + text + "' (expected per_element or per_tensor)");
}

void EnsembleConfig::validate() const {
  if (sota.is_relu()) throw ConfigError("ensemble partner activation must differ from ReLU");
}

template <typename T>
BasicTensor<T> weighted_forward(const BasicTensor<T>& x, const ActivationKind& sota, double alpha) {
  return weighted_ensemble_values(x, sota, alpha);
}

std::vector<std::uint8_t> draw_relu_mask(std::size_t n, double alpha, SamplingGranularity granularity,
                                         RandomStream& rng) {
  check_alpha(alpha);
  std::vector<std::uint8_t> mask(n);
  if (granularity == SamplingGranularity::PerTensor) {
    const std::uint8_t r = rng.bernoulli(alpha) ? 1 : 0;
    std::fill(mask.begin(), mask.end(), r);
  } else {
    for (auto& m : mask) m = rng.bernoulli(alpha) ? 1 : 0;
  }
  return mask;
}

template <typename T>
StochasticOutput<T> stochastic_forward(const BasicTensor<T>& x, const ActivationKind& sota, double alpha,
                                       SamplingGranularity granularity, RandomStream& rng, bool training) {
  check_alpha(alpha);
  if (!training) return {weighted_forward(x, sota, alpha), {}};
  StochasticOutput<T> out;
  out.relu_mask = draw_relu_mask(x.size(), alpha, granularity, rng);
  Tape<T> tape(false);
  out.values = ops::masked_ensemble(tape.constant(x), sota, out.relu_mask).value();
  return out;
}

template <typename T>
EnsembleActivation<T>::EnsembleActivation(std::string name, EnsembleConfig config, double alpha, RandomStream stream)
    : Layer<T>(std::move(name)), config_(config), alpha_(alpha), stream_(std::move(stream)) {
  config_.validate();
  check_alpha(alpha);
}

template <typename T>
Var<T> EnsembleActivation<T>::forward(Var<T> x, ForwardContext<T>& ctx) {
  const double a = alpha();
  if (config_.mode == EnsembleMode::Stochastic && ctx.training()) {
    const auto mask = draw_relu_mask(x.value().size(), a, config_.granularity, stream_);
    return ops::masked_ensemble(x, config_.sota, mask);
  }
  return ops::weighted_ensemble(x, config_.sota, a);
}

template <typename T>
RandomStream* EnsembleActivation<T>::random_stream() {
  return config_.mode == EnsembleMode::Stochastic ? &stream_ : nullptr;
}

template <typename T>
void EnsembleActivation<T>::set_alpha(double alpha) {
  check_alpha(alpha);
  alpha_ = alpha;
}

template <typename T>
void EnsembleActivation<T>::set_alpha_override(std::optional<double> alpha) {
  if (alpha) check_alpha(*alpha);
  override_ = alpha;
}

template <typename T>
BasicModel<T> collapse_to_relu(BasicModel<T> model) {
  std::vector<CollapseError::Offender> offenders;
  for (EnsembleActivation<T>* e : model.ensemble_layers()) {
    if (e->alpha() < 1.0) offenders.emplace_back(e->name(), e->alpha());
  }
  if (!offenders.empty()) throw CollapseError(std::move(offenders));
  model.replace_slots([](const Layer<T>& old) -> std::unique_ptr<Layer<T>> {
    if (old.kind() != LayerKind::Ensemble) return nullptr;
    return std::make_unique<Activation<T>>(old.name(), ActivationKind::relu());
  });
  if (model.spec().slot.kind == ActivationSlot::Kind::Ensemble) {
    ModelSpec spec = model.spec();
    spec.slot = ActivationSlot::plain_relu();
    model.set_spec(spec);
  }
  return model;
}

template BasicTensor<float> weighted_forward(const BasicTensor<float>&, const ActivationKind&, double);
template BasicTensor<double> weighted_forward(const BasicTensor<double>&, const ActivationKind&, double);
template StochasticOutput<float> stochastic_forward(const BasicTensor<float>&, const ActivationKind&, double,
                                                    SamplingGranularity, RandomStream&, bool);
template StochasticOutput<double> stochastic_forward(const BasicTensor<double>&, const ActivationKind&, double,
                                                     SamplingGranularity, RandomStream&, bool);
template class EnsembleActivation<float>;
template class EnsembleActivation<double>;
template BasicModel<float> collapse_to_relu(BasicModel<float>);
template BasicModel<double> collapse_to_relu(BasicModel<double>);

}  // namespace pea
