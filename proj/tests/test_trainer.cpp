#include <gtest/gtest.h>

#include <cmath>

#include "pea/trainer.hpp"
#include "test_util.hpp"

namespace pea {
namespace {

ModelSpec small_cnn(ActivationSlot slot = ActivationSlot::plain_relu()) {
  ModelSpec s = default_model_spec(Architecture::SmallCNN, 1, 16, 16, 4);
  s.widths = {4, 8};
  s.slot = slot;
  return s;
}

TrainConfig quick(int epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 32;
  c.base_lr = 0.05;
  c.weight_decay = 5e-4;
  c.label_smoothing = 0.1;
  c.seed = 3;
  return c;
}

PeaSetup pea_setup(int init_end, int trans_end, int total, EnsembleMode mode = EnsembleMode::Stochastic) {
  PeaSetup p;
  p.schedule.init_end = init_end;
  p.schedule.trans_end = trans_end;
  p.schedule.total_epochs = total;
  p.ensemble.mode = mode;
  return p;
}

void expect_same_params(const Model& a, const Model& b) {
  const auto pa = a.parameters(), pb = b.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_TRUE(bit_identical(pa[i]->value, pb[i]->value)) << pa[i]->name;
}

class TrainerTest : public ::testing::Test {
 protected:
  Dataset train_ = synth_classification(192, 4, 0.25, 11);
  Dataset val_ = synth_classification(64, 4, 0.25, 11, Split::Val);
};

TEST(LearningRate, WarmupRamp) {
  TrainConfig c;
  c.epochs = 120;
  c.base_lr = 0.1;
  c.warmup_epochs = 5;
  const double want[] = {0.02, 0.04, 0.06, 0.08, 0.10};
  for (int e = 1; e <= 5; ++e) EXPECT_NEAR(learning_rate(c, e), want[e - 1], 1e-15);
  EXPECT_EQ(learning_rate(c, 6), 0.1);
}

TEST(LearningRate, PiecewiseBoundaries) {
  TrainConfig c;
  c.epochs = 120;
  c.base_lr = 0.1;
  c.lr_schedule = {LrScheduleKind::PiecewiseConstant, {30, 60, 80}, 0.1};
  EXPECT_EQ(learning_rate(c, 29), 0.1);
  EXPECT_NEAR(learning_rate(c, 30), 0.01, 1e-15);
  EXPECT_NEAR(learning_rate(c, 59), 0.01, 1e-15);
  EXPECT_NEAR(learning_rate(c, 60), 0.001, 1e-16);
  EXPECT_NEAR(learning_rate(c, 80), 1e-4, 1e-17);
  EXPECT_NEAR(learning_rate(c, 120), 1e-4, 1e-17);
}

TEST(LearningRate, CosineEndpoints) {
  TrainConfig c;
  c.epochs = 11;
  c.base_lr = 0.2;
  c.lr_schedule.kind = LrScheduleKind::Cosine;
  EXPECT_DOUBLE_EQ(learning_rate(c, 1), 0.2);
  EXPECT_NEAR(learning_rate(c, 6), 0.1 * (1 + std::cos(M_PI * 5 / 11)), 1e-15);
  c.warmup_epochs = 1;
  EXPECT_DOUBLE_EQ(learning_rate(c, 1), 0.2);
  EXPECT_DOUBLE_EQ(learning_rate(c, 2), 0.2);
  for (int e = 2; e < 11; ++e) EXPECT_GT(learning_rate(c, e), learning_rate(c, e + 1));
}

TEST(Sgd, AnalyticStepOnSquare) {
  // loss w² has gradient 2w
  Parameter<float> w{"w", ParamGroup::Weight, Tensor({1}, 3.0f)};
  TrainConfig c;
  c.momentum = 0.0;
  std::map<std::string, Tensor> mom;
  sgd_update({&w}, {{"w", Tensor({1}, 6.0f)}}, mom, c, 0.1);
  EXPECT_FLOAT_EQ(w.value[0], 2.4f);
}

TEST(Sgd, MomentumRecursion) {
  Parameter<float> w{"w", ParamGroup::Weight, Tensor({1}, 1.0f)};
  TrainConfig c;
  c.momentum = 0.9;
  std::map<std::string, Tensor> mom;
  sgd_update({&w}, {{"w", Tensor({1}, 1.0f)}}, mom, c, 0.1);
  sgd_update({&w}, {{"w", Tensor({1}, 2.0f)}}, mom, c, 0.1);
  // v1 = -0.1, v2 = 0.9·v1 - 0.2
  EXPECT_NEAR(mom.at("w")[0], -0.29, 1e-7);
  EXPECT_NEAR(w.value[0], 1.0 - 0.1 - 0.29, 1e-6);
}

TEST(Sgd, WeightDecayExclusions) {
  Parameter<float> dw{"dw", ParamGroup::DepthwiseWeight, Tensor({2}, 2.0f)};
  Parameter<float> w{"w", ParamGroup::Weight, Tensor({2}, 2.0f)};
  Parameter<float> bn{"bn", ParamGroup::BatchNormScale, Tensor({2}, 2.0f)};
  TrainConfig c;
  c.momentum = 0.0;
  c.weight_decay = 0.5;
  c.weight_decay_exclusions = {ParamGroup::DepthwiseWeight};
  std::map<std::string, Tensor> mom;
  const GradientMap<float> zero{{"dw", Tensor({2})}, {"w", Tensor({2})}, {"bn", Tensor({2})}};
  sgd_update({&dw, &w, &bn}, zero, mom, c, 0.1);
  EXPECT_EQ(dw.value[0], 2.0f);
  EXPECT_FLOAT_EQ(w.value[0], 2.0f * (1 - 0.05f));
  EXPECT_FLOAT_EQ(bn.value[1], 2.0f * (1 - 0.05f));
  EXPECT_FALSE(c.decays(ParamGroup::DepthwiseWeight));
  EXPECT_TRUE(c.decays(ParamGroup::Bias));
}

TEST(TrainConfigValidation, RejectsBadFields) {
  auto bad = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    return c;
  };
  EXPECT_THROW(bad([](TrainConfig& c) { c.epochs = 0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.batch_size = 0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.label_smoothing = 1.0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.momentum = 1.0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.lr_schedule = {LrScheduleKind::PiecewiseConstant, {5, 3}, 0.1}; }).validate(),
               ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.pea = pea_setup(1, 5, 20); }).validate(), ConfigError);
  EXPECT_NO_THROW(bad([](TrainConfig& c) { c.pea = pea_setup(1, 5, 10); }).validate());
  EXPECT_THROW(parse_lr_schedule_kind("step"), ConfigError);
}

TEST_F(TrainerTest, LearnsEasyTask) {
  const auto train = synth_classification(1024, 4, 0.25, 12);
  auto model = build<float>(small_cnn(), 1);
  const auto before = evaluate(model, val_);
  auto cfg = quick(6);
  cfg.base_lr = 0.1;
  const auto history = pea::train(model, train, val_, cfg);
  ASSERT_EQ(history.size(), 6u);
  EXPECT_LT(history.back().train_loss, history.front().train_loss);
  EXPECT_GT(history.back().val_acc, 0.8);  // chance is 0.25
  EXPECT_GT(history.back().val_acc, before.accuracy);
  for (const auto& r : history) EXPECT_FALSE(r.alpha.has_value());
}

TEST_F(TrainerTest, EvaluateMatchesArgmaxOfLogits) {
  auto model = build<float>(small_cnn(), 2);
  const auto logits = model.logits(val_.images);
  const auto m = evaluate(model, val_, 7);
  EXPECT_DOUBLE_EQ(m.accuracy, top1_accuracy(logits, val_.labels));
  EXPECT_NEAR(m.loss, label_smoothed_cross_entropy(logits, val_.labels, 0.0), 1e-6);
  Dataset empty = val_;
  empty.labels.clear();
  empty.images = Tensor();
  EXPECT_THROW(evaluate(model, empty), ContractError);
}

TEST_F(TrainerTest, DeterministicForFixedSeed) {
  auto cfg = quick(3);
  cfg.pea = pea_setup(1, 2, 3);
  cfg.augment = {2, 0.5};
  auto spec = small_cnn(ActivationSlot::ensemble_of({EnsembleMode::Stochastic}));
  spec.dropout_rate = 0.2;
  auto a = build<float>(spec, 4), b = build<float>(spec, 4);
  const auto ha = train(a, train_, val_, cfg);
  const auto hb = train(b, train_, val_, cfg);
  ASSERT_EQ(ha.size(), hb.size());
  for (std::size_t i = 0; i < ha.size(); ++i) EXPECT_TRUE(same_metrics(ha[i], hb[i]));
  expect_same_params(a, b);
}

TEST_F(TrainerTest, RecordedAlphaFollowsSchedule) {
  auto cfg = quick(4);
  cfg.pea = pea_setup(1, 3, 4, EnsembleMode::Weighted);
  auto model = build<float>(small_cnn(ActivationSlot::ensemble_of({})), 5);
  const auto history = train(model, train_, val_, cfg);
  for (const auto& r : history) {
    ASSERT_TRUE(r.alpha.has_value());
    EXPECT_EQ(*r.alpha, alpha_at(cfg.pea->schedule, r.epoch));
  }
  for (const auto* e : model.ensemble_layers()) EXPECT_EQ(e->alpha(), 1.0);
}

TEST_F(TrainerTest, PerStepScheduleMovesWithinEpoch) {
  auto cfg = quick(2);
  cfg.pea = pea_setup(0, 2, 2, EnsembleMode::Weighted);
  cfg.pea->schedule.granularity = ScheduleGranularity::PerStep;
  auto model = build<float>(small_cnn(ActivationSlot::ensemble_of({})), 5);
  std::vector<double> seen;
  Trainer t(model, train_, val_, cfg);
  t.on_epoch_end([&](const MetricsRecord&, Trainer& tr) { seen.push_back(tr.model().ensemble_layers()[0]->alpha()); });
  t.run();
  EXPECT_EQ(seen, (std::vector<double>{0.5, 1.0}));
}

TEST_F(TrainerTest, ResumeIsBitExact) {
  auto cfg = quick(4);
  cfg.pea = pea_setup(1, 3, 4);
  cfg.augment = {1, 0.5};
  auto spec = small_cnn(ActivationSlot::ensemble_of({EnsembleMode::Stochastic}));
  spec.dropout_rate = 0.1;

  auto straight = build<float>(spec, 6);
  const auto full = train(straight, train_, val_, cfg);

  auto first = build<float>(spec, 6);
  Trainer t1(first, train_, val_, cfg);
  t1.run(2);
  const TrainerState saved = t1.state();
  Model resumed = first;
  Trainer t2(resumed, train_, val_, cfg);
  t2.restore(saved);
  const auto rest = t2.run();
  ASSERT_EQ(rest.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_TRUE(same_metrics(rest[i], full[i + 2]));
  expect_same_params(resumed, straight);
  EXPECT_TRUE(t2.finished());
  EXPECT_EQ(t2.state().history.size(), 4u);
}

TEST_F(TrainerTest, PartialLastBatchIsUsed) {
  auto cfg = quick(1);
  cfg.batch_size = 500;  // one batch bigger than the data
  auto model = build<float>(small_cnn(), 7);
  const auto before = model.parameters()[0]->value;
  train(model, train_, val_, cfg);
  EXPECT_FALSE(bit_identical(before, model.parameters()[0]->value));
}

TEST_F(TrainerTest, ConfigurationErrors) {
  auto model = build<float>(small_cnn(), 1);
  const auto three = synth_classification(30, 3, 0.1, 1);
  EXPECT_THROW(Trainer(model, three, three, quick(1)), ConfigError);
  auto cfg = quick(2);
  cfg.pea = pea_setup(0, 1, 2);
  EXPECT_THROW(Trainer(model, train_, val_, cfg), ConfigError);
}

TEST_F(TrainerTest, DivergenceReportsEpochAndStep) {
  Dataset poisoned = train_;
  poisoned.images[5] = std::nanf("");
  auto cfg = quick(2);
  cfg.batch_size = poisoned.size();
  auto model = build<float>(small_cnn(), 1);
  try {
    train(model, poisoned, val_, cfg);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("epoch 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("step"), std::string::npos) << msg;
  }
}

}  // namespace
}  // namespace pea
