#include <gtest/gtest.h>

#include <cmath>

#include "pea/gradcheck.hpp"
#include "pea/trainer.hpp"
#include "test_util.hpp"

namespace pea {
namespace {

using testing::random_tensor;

std::vector<ActivationKind> all_activations() {
  return {ActivationKind::relu(), ActivationKind::relu6(), ActivationKind::gelu(), ActivationKind::swish(),
          ActivationKind::silu(), ActivationKind::mish(), ActivationKind::elu()};
}

TEST(GradCheck, AgreementRule) {
  GradCheckOptions o;
  EXPECT_TRUE(gradients_agree(1.0, 1.009, o));
  EXPECT_FALSE(gradients_agree(1.0, 1.02, o));
  EXPECT_TRUE(gradients_agree(0.0, 5e-5, o));
  EXPECT_FALSE(gradients_agree(0.0, 5e-4, o));
}

TEST(GradCheck, Activations) {
  for (const auto& k : all_activations()) {
    const auto r = check_activation(k);
    EXPECT_TRUE(r.passed()) << r.name << " max rel " << r.max_rel_err;
  }
}

TEST(GradCheck, Ensembles) {
  for (auto mode : {EnsembleMode::Weighted, EnsembleMode::Stochastic}) {
    for (auto sota : {ActivationKind::gelu(), ActivationKind::mish()}) {
      for (double a : {0.0, 0.3, 1.0}) {
        const auto r = check_ensemble({mode, sota, SamplingGranularity::PerElement}, a);
        EXPECT_TRUE(r.passed()) << r.name;
      }
    }
  }
}

class ArchGrad : public ::testing::TestWithParam<Architecture> {};

TEST_P(ArchGrad, PassesWithEverySlotKind) {
  for (const auto& slot : {ActivationSlot::plain_relu(), ActivationSlot::plain(ActivationKind::swish()),
                           ActivationSlot::ensemble_of({EnsembleMode::Stochastic, ActivationKind::gelu()}, 0.5)}) {
    const auto r = check_architecture(GetParam(), slot);
    EXPECT_TRUE(r.passed()) << r.name << " failures " << r.failures << "/" << r.checked;
  }
}

INSTANTIATE_TEST_SUITE_P(All, ArchGrad,
                         ::testing::Values(Architecture::MLP, Architecture::SmallCNN, Architecture::TinyResNet,
                                           Architecture::TinyDepthwiseNet),
                         [](const auto& info) { return to_string(info.param); });

TEST(GradCheck, InjectedFaultIsCaught) {
  GradCheckOptions bad;
  bad.fault_scale = 1.1;
  EXPECT_FALSE(check_activation(ActivationKind::gelu(), bad).passed());
  EXPECT_FALSE(check_ensemble({}, 0.5, bad).passed());
  EXPECT_FALSE(check_architecture(Architecture::SmallCNN, ActivationSlot::plain_relu(), bad).passed());
}

TEST(GradCheck, SuiteFilter) {
  GradSuiteFilter f;
  f.activation = ActivationTag::Mish;
  f.architecture = Architecture::MLP;
  const auto results = run_grad_suite(f);
  ASSERT_FALSE(results.empty());
  for (const auto& r : results) EXPECT_TRUE(r.passed()) << r.name;
}

// The float training path computes the same gradients as the 64-bit path.
TEST(GradCheck, FloatGradientsTrackDouble) {
  auto spec = default_model_spec(Architecture::SmallCNN, 1, 8, 8, 3);
  spec.widths = {3, 4};
  spec.slot = ActivationSlot::ensemble_of({EnsembleMode::Weighted, ActivationKind::gelu()}, 0.4);
  auto m32 = build<float>(spec, 5);
  auto m64 = convert<double>(m32);
  const auto x = random_tensor<float>({6, 1, 8, 8}, 9, -1, 1);
  const std::vector<int> labels{0, 1, 2, 0, 1, 2};

  Tape<float> t32;
  ForwardContext<float> c32{t32, Mode::Train};
  auto g32 = t32.backward(ops::softmax_cross_entropy(m32.forward(t32.constant(x), c32), labels, 0.1));
  Tape<double> t64;
  ForwardContext<double> c64{t64, Mode::Train};
  auto g64 = t64.backward(ops::softmax_cross_entropy(m64.forward(t64.constant(x.cast<double>()), c64), labels, 0.1));

  ASSERT_EQ(g32.size(), g64.size());
  for (const auto& [name, g] : g64) {
    const auto& f = g32.at(name);
    double scale = 0.0;
    for (double v : g.data()) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(f[i], g[i], 1e-4 * std::max(scale, 1e-3)) << name;
  }
}

}  // namespace
}  // namespace pea
