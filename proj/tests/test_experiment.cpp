#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "pea/config.hpp"
#include "pea/persistence.hpp"
#include "test_util.hpp"

namespace pea {
namespace {

using testing::TempDir;

ExperimentConfig small(bool with_pea) {
  ExperimentConfig c;
  c.name = with_pea ? "small-pea" : "small-relu";
  c.data.n_train = 128;
  c.data.n_val = 64;
  c.data.num_classes = 4;
  c.data.noise = 0.25;
  c.model = default_model_spec(Architecture::SmallCNN, 1, 16, 16, 4);
  c.model.widths = {4, 8};
  c.train.epochs = 4;
  c.train.batch_size = 32;
  c.train.base_lr = 0.05;
  c.train.label_smoothing = 0.1;
  c.train.seed = 10;
  if (with_pea) {
    PeaSetup p;
    p.schedule = {1, 2, 4};
    p.ensemble.mode = EnsembleMode::Stochastic;
    c.train.pea = p;
    c.model.slot = ActivationSlot::ensemble_of(p.ensemble);
  }
  return c;
}

MetricsRecord rec(int epoch, std::optional<double> alpha, double val_acc) {
  MetricsRecord r;
  r.epoch = epoch;
  r.alpha = alpha;
  r.val_acc = val_acc;
  return r;
}

TEST(Summary, SampleStatistics) {
  const auto one = summarize({0.7});
  EXPECT_EQ(one.mean, 0.7);
  EXPECT_EQ(one.stddev, 0.0);
  const auto s = summarize({1, 2, 3, 4});
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_DOUBLE_EQ(s.stddev, std::sqrt(5.0 / 3.0));
  EXPECT_EQ(s.min, 1);
  EXPECT_EQ(s.max, 4);
}

TEST(Selection, FinalPhaseOnlyWithLaterTies) {
  const std::vector<MetricsRecord> pea{rec(1, 0.0, 0.9), rec(2, 0.5, 0.95), rec(3, 1.0, 0.6), rec(4, 1.0, 0.7),
                                       rec(5, 1.0, 0.7)};
  EXPECT_EQ(select_checkpoint(pea), 4u);
  const std::vector<MetricsRecord> plain{rec(1, {}, 0.5), rec(2, {}, 0.8), rec(3, {}, 0.8), rec(4, {}, 0.1)};
  EXPECT_EQ(select_checkpoint(plain), 2u);
  EXPECT_ANY_THROW(select_checkpoint({}));
}

TEST(Comparison, PooledSpreadDecidesInconclusive) {
  const auto c = compare_runs({0.70, 0.72, 0.74}, {0.71, 0.73, 0.75});
  EXPECT_NEAR(c.delta.mean, 0.01, 1e-12);
  EXPECT_NEAR(c.pooled_std, 0.02, 1e-12);
  EXPECT_TRUE(c.inconclusive);
  const auto d = compare_runs({0.70, 0.71, 0.72}, {0.80, 0.81, 0.82});
  EXPECT_FALSE(d.inconclusive);
  EXPECT_THROW(compare_runs({0.1}, {0.1, 0.2}), ContractError);
}

TEST(Experiment, SingleRunSummaryIsThatRun) {
  const auto r = run_experiment(small(false), 1);
  ASSERT_EQ(r.runs.size(), 1u);
  const auto& run = r.runs[0];
  EXPECT_EQ(run.selected_epoch, run.history[select_checkpoint(run.history)].epoch);
  EXPECT_EQ(r.summary.val_acc.mean, run.selected.val_acc);
  EXPECT_EQ(r.summary.val_acc.stddev, 0.0);
  EXPECT_EQ(r.summary.train_loss.mean, run.selected.train_loss);
}

TEST(Experiment, ForcedIdenticalSeedsGiveZeroSpread) {
  const auto r = run_experiment(small(true), 3, false);
  EXPECT_EQ(r.summary.val_acc.stddev, 0.0);
  EXPECT_EQ(r.summary.val_loss.stddev, 0.0);
  for (const auto& run : r.runs) EXPECT_EQ(run.seed, 10u);
}

TEST(Experiment, DistinctSeedsSelectFromFinalPhase) {
  TempDir dir("exp");
  auto cfg = small(true);
  cfg.output_dir = dir.path();
  const auto r = run_experiment(cfg, 3);
  EXPECT_GE(r.summary.val_acc.mean, r.summary.val_acc.min);
  EXPECT_LE(r.summary.val_acc.mean, r.summary.val_acc.max);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(r.runs[i].seed, 10u + i);
    EXPECT_GE(r.summary.selected_epochs[i], cfg.train.pea->schedule.trans_end);
  }

  // artifacts
  const auto rows = read_metrics_csv(dir / "metrics.csv");
  EXPECT_EQ(rows.size(), 3u * 4u);
  for (const auto& row : rows) EXPECT_EQ(*row.alpha, alpha_at(cfg.train.pea->schedule, row.epoch));
  EXPECT_TRUE(std::filesystem::exists(dir / "summary.csv"));
  for (int i = 0; i < 3; ++i) {
    EXPECT_TRUE(std::filesystem::exists(dir / ("run" + std::to_string(i)) / "final.ckpt"));
    EXPECT_TRUE(std::filesystem::exists(dir / ("run" + std::to_string(i)) / "selected.ckpt"));
  }

  // the exported selected model reproduces its validation accuracy exactly
  ASSERT_TRUE(r.summary.export_path.has_value());
  const auto exported = load_exported(*r.summary.export_path);
  const auto data = load_data(cfg.data);
  EXPECT_EQ(top1_accuracy(exported.logits(data.val.images), data.val.labels), r.runs[0].selected.val_acc);

  const auto ck = load_checkpoint(dir / "run0" / "selected.ckpt");
  EXPECT_EQ(ck.trainer.epochs_completed, r.runs[0].selected_epoch);
}

TEST(Experiment, RejectsBadRunCount) { EXPECT_THROW(run_experiment(small(false), 0), ConfigError); }

TEST(LoadData, SyntheticSplitsAndIdxNormalization) {
  DataSource s;
  s.n_train = 40;
  s.n_val = 20;
  s.num_classes = 4;
  const auto d = load_data(s);
  EXPECT_EQ(d.train.size(), 40u);
  EXPECT_EQ(d.val.size(), 20u);
  EXPECT_EQ(d.val.split, Split::Val);

  TempDir dir("ld");
  auto write = [&](const std::string& name, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(dir / name, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  };
  IdxImages tr{2, 2, 2, {0, 100, 200, 255, 10, 20, 30, 40}};
  IdxImages va{1, 2, 2, {255, 255, 255, 255}};
  write("tri", encode_idx_images(tr));
  write("trl", encode_idx_labels({0, 1}));
  write("vai", encode_idx_images(va));
  write("val", encode_idx_labels({2}));
  DataSource idx;
  idx.kind = DataSource::Kind::Idx;
  idx.train_images = dir / "tri";
  idx.train_labels = dir / "trl";
  idx.val_images = dir / "vai";
  idx.val_labels = dir / "val";
  const auto l = load_data(idx);
  EXPECT_EQ(l.val.normalization, l.train.normalization);
  EXPECT_EQ(l.train.num_classes, 3u);
  EXPECT_EQ(l.val.num_classes, 3u);
}

}  // namespace
}  // namespace pea
