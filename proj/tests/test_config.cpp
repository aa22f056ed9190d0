#include <gtest/gtest.h>

#include <fstream>

#include "pea/config.hpp"
#include "test_util.hpp"

namespace pea {
namespace {

using testing::TempDir;

std::string config_error(const Json& j) {
  try {
    experiment_from_json(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

Json minimal() {
  return Json::parse(R"({
    "model": {"architecture": "small_cnn", "widths": [4, 8]},
    "train": {"epochs": 3, "batch_size": 16, "base_lr": 0.05},
    "data": {"source": "synthetic", "n_train": 64, "n_val": 32, "num_classes": 4}
  })");
}

TEST(Presets, AllValidateAndRoundTrip) {
  for (const auto& name : preset_names()) {
    for (int epochs : {3, 12, 24, 120}) {
      const auto cfg = preset(name, epochs);
      ASSERT_NO_THROW(cfg.validate()) << name << " " << epochs;
      const auto back = experiment_from_json(to_json(cfg));
      EXPECT_EQ(to_json(back).dump(), to_json(cfg).dump()) << name;
      EXPECT_EQ(back.model, cfg.model);
      EXPECT_EQ(back.train, cfg.train);
      EXPECT_EQ(back.data, cfg.data);
    }
  }
  EXPECT_THROW(preset("pea-xg"), ConfigError);
  EXPECT_THROW(preset("pea-sg-100"), ConfigError);
}

TEST(Presets, FullLengthRecipe) {
  const auto c = preset("pea-sg-90", 120);
  EXPECT_EQ(c.train.warmup_epochs, 5);
  EXPECT_EQ(c.train.lr_schedule.boundaries, (std::vector<int>{30, 60, 80}));
  EXPECT_EQ(c.train.batch_size, 64u);
  EXPECT_EQ(c.train.label_smoothing, 0.1);
  EXPECT_EQ(c.train.momentum, 0.9);
  ASSERT_TRUE(c.train.pea.has_value());
  EXPECT_EQ(c.train.pea->schedule, (PhaseSchedule{5, 90, 120}));
  EXPECT_EQ(c.train.pea->ensemble.mode, EnsembleMode::Stochastic);
  EXPECT_EQ(c.train.pea->ensemble.sota, ActivationKind::gelu());
  EXPECT_EQ(preset("pea-we", 120).train.pea->schedule.trans_end, 115);
  EXPECT_EQ(preset("pea-we", 120).train.pea->ensemble.sota, ActivationKind::elu());
  EXPECT_FALSE(preset("upper-limit-mish").train.pea.has_value());
  EXPECT_EQ(preset("upper-limit-mish").model.slot, ActivationSlot::plain(ActivationKind::mish()));
  EXPECT_EQ(preset("baseline-relu").model.slot, ActivationSlot::plain_relu());
}

TEST(Presets, ShortRunsScaleEpochSettings) {
  const auto c = preset("pea-sg-90", 12);
  EXPECT_EQ(c.train.warmup_epochs, 1);
  EXPECT_EQ(c.train.lr_schedule.boundaries, (std::vector<int>{3, 6, 8}));
  EXPECT_EQ(c.train.pea->schedule, (PhaseSchedule{1, 9, 12}));
  const auto tiny = preset("pea-wm", 2);
  EXPECT_LT(tiny.train.pea->schedule.init_end, tiny.train.pea->schedule.trans_end);
}

TEST(ExperimentJson, MinimalDocument) {
  const auto cfg = experiment_from_json(minimal());
  EXPECT_EQ(cfg.model.num_classes, 4u);  // taken from the data section
  EXPECT_EQ(cfg.model.widths, (std::vector<std::size_t>{4, 8}));
  EXPECT_EQ(cfg.train.epochs, 3);
  EXPECT_FALSE(cfg.train.pea.has_value());
}

TEST(ExperimentJson, PresetOverrides) {
  auto j = Json::parse(R"({"preset": "pea-sg-90", "train": {"epochs": 12, "seed": 7},
                           "data": {"n_train": 500}})");
  auto cfg = experiment_from_json(j);
  EXPECT_EQ(cfg.train.seed, 7u);
  EXPECT_EQ(cfg.train.pea->schedule, (PhaseSchedule{1, 9, 12}));
  EXPECT_EQ(cfg.data.n_train, 500u);
  EXPECT_EQ(cfg.model.slot.kind, ActivationSlot::Kind::Ensemble);

  j["pea"] = nullptr;
  cfg = experiment_from_json(j);
  EXPECT_FALSE(cfg.train.pea.has_value());
  EXPECT_EQ(cfg.model.slot, ActivationSlot::plain_relu());

  j["pea"] = Json::parse(R"J({"mode": "weighted", "sota": "swish(1.5)", "trans_end": 6})J");
  cfg = experiment_from_json(j);
  EXPECT_EQ(cfg.train.pea->ensemble.mode, EnsembleMode::Weighted);
  EXPECT_EQ(cfg.train.pea->ensemble.sota, ActivationKind::swish(1.5));
  EXPECT_EQ(cfg.train.pea->schedule.trans_end, 6);
}

TEST(ExperimentJson, ErrorsNameTheField) {
  auto j = minimal();
  j["train"]["lr_schedule"] = Json::parse(R"({"kind": "piecewise", "boundaries": [2], "factr": 0.1})");
  EXPECT_NE(config_error(j).find("train.lr_schedule.factr: unknown key"), std::string::npos) << config_error(j);

  j = minimal();
  j["train"]["batch_size"] = "big";
  EXPECT_NE(config_error(j).find("train.batch_size"), std::string::npos) << config_error(j);

  j = minimal();
  j["train"].erase("epochs");
  EXPECT_EQ(config_error(j), "train.epochs: required field missing");

  j = minimal();
  j["model"].erase("architecture");
  EXPECT_EQ(config_error(j), "model.architecture: required field missing");

  j = minimal();
  j["train"]["label_smoothing"] = 1.5;
  EXPECT_NE(config_error(j).find("label_smoothing"), std::string::npos);

  j = minimal();
  j["model"]["activation"] = "gelu";
  j["pea"] = Json::parse(R"({"trans_end": 2})");
  EXPECT_NE(config_error(j).find("model.activation"), std::string::npos) << config_error(j);

  j = minimal();
  j["pea"] = Json::parse(R"({"sota": "relu", "trans_end": 2})");
  EXPECT_FALSE(config_error(j).empty());

  j = minimal();
  j["pea"] = Json::parse(R"({"init_end": 3, "trans_end": 2})");
  EXPECT_FALSE(config_error(j).empty());

  j = minimal();
  j["data"]["num_classes"] = 1;
  EXPECT_FALSE(config_error(j).empty());

  EXPECT_EQ(config_error(Json::parse(R"({"preset": "nope"})")).find("preset"), 0u);
}

TEST(ExperimentJson, LoadFromFile) {
  TempDir dir("cfg");
  {
    std::ofstream(dir / "ok.json") << minimal().dump(2);
    std::ofstream(dir / "bad.json") << "{\"model\": ";
  }
  EXPECT_EQ(load_experiment_config(dir / "ok.json").train.batch_size, 16u);
  EXPECT_THROW(load_experiment_config(dir / "bad.json"), ConfigError);
  EXPECT_THROW(load_experiment_config(dir / "none.json"), ConfigError);
}

TEST(ConfigHash, StableAndSensitive) {
  const auto a = preset("pea-sg-90", 12);
  auto b = a;
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 8u);
  b.train.seed = 1;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(RecordJson, RoundTrip) {
  MetricsRecord r{"run3", 4, 0.5, 0.01, 1.25, 0.5, 1.0, 0.75, 2.0};
  const auto back = metrics_record_from_json(to_json(r));
  EXPECT_TRUE(same_metrics(back, r));
  r.alpha.reset();
  EXPECT_FALSE(metrics_record_from_json(to_json(r)).alpha.has_value());
}

}  // namespace
}  // namespace pea
