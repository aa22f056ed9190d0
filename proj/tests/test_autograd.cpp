#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "pea/autograd.hpp"
#include "test_util.hpp"

namespace pea {
namespace {

using testing::random_tensor;
using Fn = std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>;

// loss = Σ r ⊙ f(inputs) with a fixed random r, so every output element matters.
double eval_loss(const Fn& fn, const std::vector<Tensor64>& inputs, const Tensor64& r) {
  Tape<double> tape(false);
  std::vector<Var<double>> vars;
  for (const auto& x : inputs) vars.push_back(tape.constant(x));
  const auto out = fn(tape, vars);
  double s = 0.0;
  for (std::size_t i = 0; i < out.value().size(); ++i) s += out.value()[i] * r[i];
  return s;
}

void expect_gradients(const Fn& fn, std::vector<Tensor64> inputs, double h = 1e-6, double tol = 1e-6) {
  Tape<double> probe(false);
  std::vector<Var<double>> pv;
  for (const auto& x : inputs) pv.push_back(probe.constant(x));
  const Shape out_shape = fn(probe, pv).shape();
  const auto r = random_tensor<double>(out_shape, 4242);

  Tape<double> tape;
  std::vector<Var<double>> vars;
  for (const auto& x : inputs) vars.push_back(tape.variable(x));
  auto out = fn(tape, vars);
  auto loss = ops::sum(ops::mul(out, tape.constant(r)));
  tape.backward(loss);

  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const auto g = tape.grad(vars[k]);
    ASSERT_EQ(g.shape(), inputs[k].shape());
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      auto plus = inputs, minus = inputs;
      plus[k][i] += h;
      minus[k][i] -= h;
      const double fd = (eval_loss(fn, plus, r) - eval_loss(fn, minus, r)) / (2 * h);
      EXPECT_NEAR(g[i], fd, tol * std::max(1.0, std::abs(fd))) << "input " << k << " index " << i;
    }
  }
}

TEST(AutogradOps, AddMulSum) {
  expect_gradients([](auto&, const auto& v) { return ops::add(v[0], v[1]); },
                   {random_tensor<double>({3, 4}, 1), random_tensor<double>({3, 4}, 2)});
  expect_gradients([](auto&, const auto& v) { return ops::mul(v[0], v[1]); },
                   {random_tensor<double>({3, 4}, 3), random_tensor<double>({3, 4}, 4)});
  expect_gradients([](auto&, const auto& v) { return ops::sum(v[0]); }, {random_tensor<double>({5}, 5)});
}

TEST(AutogradOps, Matmul) {
  expect_gradients([](auto&, const auto& v) { return ops::matmul(v[0], v[1]); },
                   {random_tensor<double>({3, 5}, 6), random_tensor<double>({5, 2}, 7)});
}

TEST(AutogradOps, BiasAndDense) {
  expect_gradients([](auto&, const auto& v) { return ops::add_bias(v[0], v[1]); },
                   {random_tensor<double>({2, 3, 2, 2}, 8), random_tensor<double>({3}, 9)});
  expect_gradients([](auto&, const auto& v) { return ops::dense(v[0], v[1], v[2]); },
                   {random_tensor<double>({4, 6}, 10), random_tensor<double>({6, 3}, 11),
                    random_tensor<double>({3}, 12)});
}

TEST(AutogradOps, Conv2dVariants) {
  for (kernels::ConvParams p : {kernels::ConvParams{1, 1, 1}, kernels::ConvParams{2, 1, 1},
                                kernels::ConvParams{1, 0, 2}}) {
    const std::size_t cin = 4, cout = 2;
    expect_gradients([p](auto&, const auto& v) { return ops::conv2d(v[0], v[1], p); },
                     {random_tensor<double>({2, cin, 5, 5}, 13),
                      random_tensor<double>({cout, cin / p.groups, 3, 3}, 14)});
  }
}

TEST(AutogradOps, PoolingAndFlatten) {
  // distinct values keep max pooling away from ties
  Tensor64 x({1, 2, 4, 5});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(1.7 * static_cast<double>(i)) + 0.01 * i;
  expect_gradients([](auto&, const auto& v) { return ops::max_pool2x2(v[0]); }, {x});
  expect_gradients([](auto&, const auto& v) { return ops::global_avg_pool(v[0]); },
                   {random_tensor<double>({2, 3, 3, 2}, 15)});
  expect_gradients([](auto&, const auto& v) { return ops::flatten(v[0]); },
                   {random_tensor<double>({2, 3, 2, 2}, 16)});
}

TEST(AutogradOps, BatchNormTrain) {
  expect_gradients([](auto&, const auto& v) { return ops::batch_norm_train(v[0], v[1], v[2], 1e-5, static_cast<ops::BatchStats<double>*>(nullptr)); },
                   {random_tensor<double>({4, 3, 2, 2}, 17), random_tensor<double>({3}, 18, 0.5, 1.5),
                    random_tensor<double>({3}, 19)},
                   1e-6, 1e-5);
  expect_gradients([](auto&, const auto& v) { return ops::batch_norm_train(v[0], v[1], v[2], 1e-5, static_cast<ops::BatchStats<double>*>(nullptr)); },
                   {random_tensor<double>({6, 4}, 20), random_tensor<double>({4}, 21, 0.5, 1.5),
                    random_tensor<double>({4}, 22)},
                   1e-6, 1e-5);
}

TEST(AutogradOps, BatchNormStatsAreUnbiased) {
  Tape<double> tape(false);
  Tensor64 x({4, 1}, std::vector<double>{1, 2, 3, 6});
  ops::BatchStats<double> st;
  ops::batch_norm_train(tape.constant(x), tape.constant(Tensor64({1}, 1.0)), tape.constant(Tensor64({1}, 0.0)),
                        1e-5, &st);
  EXPECT_DOUBLE_EQ(st.mean[0], 3.0);
  EXPECT_DOUBLE_EQ(st.var[0], 14.0 / 3.0);
}

TEST(AutogradOps, ChannelAffine) {
  const auto scale = random_tensor<double>({3}, 23);
  const auto shift = random_tensor<double>({3}, 24);
  expect_gradients([&](auto&, const auto& v) { return ops::channel_affine(v[0], scale, shift); },
                   {random_tensor<double>({2, 3, 2, 2}, 25)});
}

TEST(AutogradOps, SmoothActivations) {
  for (auto kind : {ActivationKind::gelu(), ActivationKind::swish(1.5), ActivationKind::mish(), ActivationKind::elu(0.7)}) {
    expect_gradients([kind](auto&, const auto& v) { return ops::activation(v[0], kind); },
                     {random_tensor<double>({3, 7}, 26, -4, 4)});
  }
}

TEST(AutogradOps, EnsembleOps) {
  // keep inputs off the ReLU kink at 0
  auto x = random_tensor<double>({4, 5}, 27, 0.1, 3.0);
  for (std::size_t i = 0; i < x.size(); i += 2) x[i] = -x[i];
  for (double a : {0.0, 0.3, 1.0}) {
    expect_gradients([a](auto&, const auto& v) { return ops::weighted_ensemble(v[0], ActivationKind::mish(), a); },
                     {x});
  }
  std::vector<std::uint8_t> mask(x.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = (i * 7 % 3) == 0;
  expect_gradients([&](auto&, const auto& v) { return ops::masked_ensemble(v[0], ActivationKind::gelu(), mask); },
                   {x});
  expect_gradients([&](auto&, const auto& v) { return ops::dropout(v[0], mask, 1.5); }, {x});
}

TEST(AutogradOps, MaskedEnsembleRoutesPerElement) {
  Tape<double> tape(false);
  Tensor64 x({4}, std::vector<double>{-1.0, -1.0, 2.0, 2.0});
  const std::vector<std::uint8_t> mask{1, 0, 1, 0};
  const auto y = ops::masked_ensemble(tape.constant(x), ActivationKind::elu(), mask).value();
  EXPECT_EQ(y[0], 0.0);
  EXPECT_DOUBLE_EQ(y[1], std::expm1(-1.0));
  EXPECT_EQ(y[2], 2.0);
  EXPECT_EQ(y[3], 2.0);
}

TEST(AutogradOps, Softmax) {
  expect_gradients([](auto&, const auto& v) { return ops::softmax(v[0]); }, {random_tensor<double>({3, 4}, 28, -3, 3)});
}

TEST(AutogradOps, SoftmaxCrossEntropy) {
  const std::vector<int> labels{0, 2, 1};
  for (double s : {0.0, 0.1}) {
    expect_gradients([&](auto&, const auto& v) { return ops::softmax_cross_entropy(v[0], labels, s); },
                     {random_tensor<double>({3, 4}, 29, -3, 3)});
  }
}

TEST(LabelSmoothing, ZeroSmoothingIsCrossEntropy) {
  const auto logits = random_tensor<double>({5, 4}, 30, -2, 2);
  const std::vector<int> labels{0, 1, 2, 3, 1};
  double ce = 0.0;
  for (std::size_t n = 0; n < 5; ++n) {
    double z = 0.0;
    for (std::size_t c = 0; c < 4; ++c) z += std::exp(logits[n * 4 + c]);
    ce += std::log(z) - logits[n * 4 + static_cast<std::size_t>(labels[n])];
  }
  EXPECT_NEAR(label_smoothed_cross_entropy(logits, labels, 0.0), ce / 5, 1e-12);
}

TEST(LabelSmoothing, UniformLogitsGiveLogC) {
  Tensor64 logits({2, 7}, 0.25);
  const std::vector<int> labels{3, 6};
  for (double s : {0.0, 0.1, 0.5}) EXPECT_NEAR(label_smoothed_cross_entropy(logits, labels, s), std::log(7.0), 1e-12);
}

TEST(LabelSmoothing, ThreeClassClosedForm) {
  Tensor64 logits({1, 3}, std::vector<double>{2, 0, 0});
  const std::vector<int> labels{0};
  // targets 0.9 + 0.1/3 and 0.1/3; log-partition log(e^2 + 2)
  const double lse = std::log(std::exp(2.0) + 2.0);
  const double expected = -((0.9 + 0.1 / 3) * (2 - lse) + 2 * (0.1 / 3) * (-lse));
  EXPECT_NEAR(label_smoothed_cross_entropy(logits, labels, 0.1), expected, 1e-12);
  EXPECT_NEAR(label_smoothed_cross_entropy(logits, labels, 0.1), 0.3728780995552179, 1e-6);

  Tensor64 grad;
  label_smoothed_cross_entropy(logits, labels, 0.1, &grad);
  const double p0 = std::exp(2 - lse), p1 = std::exp(-lse);
  EXPECT_NEAR(grad[0], p0 - (0.9 + 0.1 / 3), 1e-12);
  EXPECT_NEAR(grad[1], p1 - 0.1 / 3, 1e-12);
}

TEST(LabelSmoothing, RejectsBadLabels) {
  Tensor64 logits({1, 3}, 0.0);
  const std::vector<int> bad{3};
  EXPECT_ANY_THROW(label_smoothed_cross_entropy(logits, bad, 0.0));
}

TEST(TapeState, BackwardPreconditions) {
  {
    Tape<double> tape;
    EXPECT_THROW(tape.backward(Var<double>()), StateError);
  }
  {
    Tape<double> tape(false);
    auto x = tape.constant(Tensor64({1}, 1.0));
    EXPECT_THROW(tape.backward(x), StateError);
  }
  {
    Tape<double> tape;
    auto x = tape.variable(Tensor64({2}, 1.0));
    EXPECT_THROW(tape.grad(x), StateError);
    EXPECT_THROW(tape.backward(x), DimensionError);
    auto s = ops::sum(x);
    tape.backward(s);
    EXPECT_THROW(tape.backward(s), StateError);
    EXPECT_EQ(tape.grad(x), Tensor64({2}, 1.0));
  }
  {
    Tape<double> a, b;
    auto x = a.variable(Tensor64({1}, 1.0));
    (void)b.variable(Tensor64({1}, 1.0));
    EXPECT_THROW(b.backward(ops::sum(x)), StateError);
  }
}

TEST(TapeState, ParameterGradientsByName) {
  Tape<double> tape;
  Parameter<double> w{"layer.w", ParamGroup::Weight, Tensor64({2}, std::vector<double>{1.0, -2.0})};
  auto v = tape.parameter(w);
  auto x = tape.constant(Tensor64({2}, std::vector<double>{3.0, 4.0}));
  auto grads = tape.backward(ops::sum(ops::mul(v, x)));
  ASSERT_EQ(grads.count("layer.w"), 1u);
  EXPECT_EQ(grads["layer.w"], Tensor64({2}, std::vector<double>{3.0, 4.0}));
}

TEST(TapeState, ReusedNodeAccumulates) {
  Tape<double> tape;
  auto x = tape.variable(Tensor64({1}, 3.0));
  tape.backward(ops::sum(ops::mul(x, x)));
  EXPECT_DOUBLE_EQ(tape.grad(x)[0], 6.0);
}

TEST(ParamGroups, RoundTrip) {
  for (auto g : {ParamGroup::Weight, ParamGroup::DepthwiseWeight, ParamGroup::Bias, ParamGroup::BatchNormScale,
                 ParamGroup::BatchNormShift}) {
    EXPECT_EQ(parse_param_group(to_string(g)), g);
  }
  EXPECT_THROW(parse_param_group("nope"), ConfigError);
}

}  // namespace
}  // namespace pea
