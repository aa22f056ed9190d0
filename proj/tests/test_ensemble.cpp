#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "pea/ensemble.hpp"
#include "pea/model.hpp"
#include "test_util.hpp"

namespace pea {
namespace {

using testing::random_tensor;

std::vector<ActivationKind> sotas() {
  return {ActivationKind::gelu(), ActivationKind::swish(), ActivationKind::mish(), ActivationKind::elu()};
}

Tensor layer_forward(EnsembleActivation<float>& layer, const Tensor& x, Mode mode) {
  Tape<float> tape(false);
  ForwardContext<float> ctx{tape, mode};
  return layer.forward(tape.constant(x), ctx).value();
}

TEST(Ensemble, BoundaryAlphasAreExact) {
  const auto x = random_tensor({50000}, 1, -10, 10);
  const auto relu = forward(ActivationKind::relu(), x);
  for (const auto& sota : sotas()) {
    EXPECT_TRUE(bit_identical(weighted_forward(x, sota, 1.0), relu)) << sota.name();
    EXPECT_TRUE(bit_identical(weighted_forward(x, sota, 0.0), forward(sota, x))) << sota.name();
    for (auto mode : {EnsembleMode::Weighted, EnsembleMode::Stochastic}) {
      for (auto m : {Mode::Train, Mode::Eval}) {
        EnsembleActivation<float> one("e", {mode, sota, SamplingGranularity::PerElement}, 1.0, RandomStream(3, 4));
        EnsembleActivation<float> zero("e", {mode, sota, SamplingGranularity::PerElement}, 0.0, RandomStream(3, 4));
        EXPECT_TRUE(bit_identical(layer_forward(one, x, m), relu));
        EXPECT_TRUE(bit_identical(layer_forward(zero, x, m), forward(sota, x)));
      }
    }
  }
}

TEST(Ensemble, WeightedIsConvexCombination) {
  const auto x = random_tensor<double>({2000}, 2, -6, 6);
  for (const auto& sota : sotas()) {
    for (double a : {0.1, 0.5, 0.75}) {
      const auto y = weighted_forward(x, sota, a);
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double want = a * std::max(0.0, x[i]) + (1 - a) * activate(sota, x[i]);
        ASSERT_NEAR(y[i], want, 1e-13);
      }
    }
  }
}

TEST(Ensemble, StochasticElementsComeFromOneBranch) {
  const auto x = random_tensor({4000}, 3, -5, 5);
  RandomStream rng(8, 9);
  const auto out = stochastic_forward(x, ActivationKind::gelu(), 0.4, SamplingGranularity::PerElement, rng, true);
  ASSERT_EQ(out.relu_mask.size(), x.size());
  const auto relu = forward(ActivationKind::relu(), x);
  const auto gelu = forward(ActivationKind::gelu(), x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const float want = out.relu_mask[i] ? relu[i] : gelu[i];
    ASSERT_EQ(out.values[i], want);
  }
}

TEST(Ensemble, StochasticEvalUsesExpectation) {
  const auto x = random_tensor({500}, 4, -5, 5);
  RandomStream rng(1, 1), before = rng;
  const auto out = stochastic_forward(x, ActivationKind::swish(), 0.3, SamplingGranularity::PerElement, rng, false);
  EXPECT_TRUE(out.relu_mask.empty());
  EXPECT_TRUE(bit_identical(out.values, weighted_forward(x, ActivationKind::swish(), 0.3)));
  EXPECT_TRUE(rng == before);
}

TEST(Ensemble, ReluRateMatchesAlpha) {
  const std::size_t n = 200000;
  for (double a : {0.05, 0.3, 0.8}) {
    RandomStream rng(11, stream_id("rate"));
    const auto mask = draw_relu_mask(n, a, SamplingGranularity::PerElement, rng);
    const double rate = std::accumulate(mask.begin(), mask.end(), 0.0) / static_cast<double>(n);
    const double sigma = std::sqrt(a * (1 - a) / static_cast<double>(n));
    EXPECT_LE(std::abs(rate - a), 3 * sigma) << a;
  }
}

TEST(Ensemble, PerTensorSamplingSharesOneDraw) {
  RandomStream rng(5, 6);
  int relu_tensors = 0;
  for (int k = 0; k < 2000; ++k) {
    const auto mask = draw_relu_mask(64, 0.25, SamplingGranularity::PerTensor, rng);
    for (auto m : mask) ASSERT_EQ(m, mask[0]);
    relu_tensors += mask[0];
  }
  EXPECT_NEAR(relu_tensors / 2000.0, 0.25, 3 * std::sqrt(0.25 * 0.75 / 2000));
}

TEST(Ensemble, MaskDrawsAreReproducible) {
  RandomStream a(77, 1), b(77, 1);
  EXPECT_EQ(draw_relu_mask(1000, 0.5, SamplingGranularity::PerElement, a),
            draw_relu_mask(1000, 0.5, SamplingGranularity::PerElement, b));
}

TEST(Ensemble, RejectsAlphaOutsideUnitInterval) {
  RandomStream rng;
  EXPECT_THROW(draw_relu_mask(4, 1.5, SamplingGranularity::PerElement, rng), ContractError);
  EXPECT_THROW(draw_relu_mask(4, -0.1, SamplingGranularity::PerElement, rng), ContractError);
  EnsembleActivation<float> layer("e", {}, 0.5, RandomStream());
  EXPECT_THROW(layer.set_alpha(1.01), ContractError);
  EXPECT_THROW(layer.set_alpha_override(std::nan("")), ContractError);
}

TEST(Ensemble, ConfigValidation) {
  EnsembleConfig bad;
  bad.sota = ActivationKind::relu();
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_THROW(EnsembleActivation<float>("e", bad, 0.0, RandomStream()), ConfigError);
  EXPECT_EQ(parse_ensemble_mode(to_string(EnsembleMode::Stochastic)), EnsembleMode::Stochastic);
  EXPECT_EQ(parse_sampling_granularity(to_string(SamplingGranularity::PerTensor)), SamplingGranularity::PerTensor);
  EXPECT_THROW(parse_ensemble_mode("random"), ConfigError);
  EXPECT_THROW(parse_sampling_granularity("per_batch"), ConfigError);
}

TEST(Ensemble, OverrideWinsOverSchedule) {
  EnsembleActivation<float> layer("e", {}, 0.2, RandomStream());
  layer.set_alpha_override(0.9);
  layer.set_alpha(0.4);
  EXPECT_EQ(layer.alpha(), 0.9);
  EXPECT_EQ(layer.scheduled_alpha(), 0.4);
  layer.set_alpha_override(std::nullopt);
  EXPECT_EQ(layer.alpha(), 0.4);
}

TEST(Ensemble, OnlyStochasticExposesStream) {
  EnsembleActivation<float> w("e", {EnsembleMode::Weighted}, 0.5, RandomStream());
  EnsembleActivation<float> s("e", {EnsembleMode::Stochastic}, 0.5, RandomStream());
  EXPECT_EQ(w.random_stream(), nullptr);
  EXPECT_NE(s.random_stream(), nullptr);
}

TEST(Collapse, RefusesUnfinishedTransition) {
  ModelSpec spec;
  spec.slot = ActivationSlot::ensemble_of({EnsembleMode::Weighted, ActivationKind::gelu()}, 0.0);
  auto model = build<float>(spec, 1);
  model.set_alpha(0.75);
  try {
    (void)collapse_to_relu(model);
    FAIL() << "expected CollapseError";
  } catch (const CollapseError& e) {
    ASSERT_EQ(e.offenders().size(), 3u);
    EXPECT_EQ(e.offenders()[0].first, "block0.act");
    EXPECT_EQ(e.offenders()[0].second, 0.75);
  }
}

TEST(Collapse, FinishedModelKeepsOutputsBitExact) {
  for (auto arch : {Architecture::MLP, Architecture::SmallCNN, Architecture::TinyResNet, Architecture::TinyDepthwiseNet}) {
    auto spec = default_model_spec(arch, 1, 16, 16, 10);
    spec.slot = ActivationSlot::ensemble_of({EnsembleMode::Stochastic, ActivationKind::mish()}, 0.0);
    auto model = build<float>(spec, 2);
    model.set_alpha(1.0);
    const auto x = random_tensor({3, 1, 16, 16}, 5, -2, 2);
    const auto before = model.logits(x);
    auto collapsed = collapse_to_relu(model);
    EXPECT_TRUE(collapsed.ensemble_layers().empty());
    EXPECT_EQ(collapsed.spec().slot, ActivationSlot::plain_relu());
    EXPECT_TRUE(bit_identical(collapsed.logits(x), before)) << to_string(arch);
  }
}

}  // namespace
}  // namespace pea
