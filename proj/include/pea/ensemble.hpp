#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pea/layers.hpp"

namespace pea {

enum class EnsembleMode { Weighted, Stochastic };
enum class SamplingGranularity { PerElement, PerTensor };

std::string to_string(EnsembleMode mode);
std::string to_string(SamplingGranularity g);
EnsembleMode parse_ensemble_mode(const std::string& text);
SamplingGranularity parse_sampling_granularity(const std::string& text);

/// The ReLU partner and variant of an ensemble activation.
struct EnsembleConfig {
  EnsembleMode mode = EnsembleMode::Weighted;
  ActivationKind sota = ActivationKind::gelu();
  SamplingGranularity granularity = SamplingGranularity::PerElement;

  /// Throws ConfigError when sota is ReLU.
  void validate() const;
  bool operator==(const EnsembleConfig&) const = default;
};

/// α·relu(x) + (1−α)·sota(x). ContractError when α ∉ [0, 1].
template <typename T>
BasicTensor<T> weighted_forward(const BasicTensor<T>& x, const ActivationKind& sota, double alpha);

/// r ~ Bern(α) per element (or one draw broadcast for PerTensor); 1 routes to ReLU.
std::vector<std::uint8_t> draw_relu_mask(std::size_t n, double alpha, SamplingGranularity granularity,
                                         RandomStream& rng);

template <typename T>
struct StochasticOutput {
  BasicTensor<T> values;
  std::vector<std::uint8_t> relu_mask;  ///< empty in eval mode
};

/// Training: sample the routing mask and apply the selected activation per
/// element. Eval: the expectation, i.e. weighted_forward with the same α.
template <typename T>
StochasticOutput<T> stochastic_forward(const BasicTensor<T>& x, const ActivationKind& sota, double alpha,
                                       SamplingGranularity granularity, RandomStream& rng, bool training);

/// Ensemble activation layer. Alpha is managed by the training loop (shared
/// across layers through BasicModel::set_alpha) unless a per-layer override is set.
template <typename T>
class EnsembleActivation final : public Layer<T> {
 public:
  EnsembleActivation(std::string name, EnsembleConfig config, double alpha, RandomStream stream);

  LayerKind kind() const override { return LayerKind::Ensemble; }
  Var<T> forward(Var<T> x, ForwardContext<T>& ctx) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<EnsembleActivation>(*this); }
  RandomStream* random_stream() override;

  const EnsembleConfig& config() const { return config_; }
  /// Effective alpha (override if set).
  double alpha() const { return override_.value_or(alpha_); }
  double scheduled_alpha() const { return alpha_; }
  void set_alpha(double alpha);
  std::optional<double> alpha_override() const { return override_; }
  void set_alpha_override(std::optional<double> alpha);

 private:
  EnsembleConfig config_;
  double alpha_;
  std::optional<double> override_;
  RandomStream stream_;
};

template <typename T>
class BasicModel;

/// Replaces every ensemble layer with a plain ReLU. CollapseError listing the
/// offending layers when any has alpha < 1.
template <typename T>
BasicModel<T> collapse_to_relu(BasicModel<T> model);

}  // namespace pea
