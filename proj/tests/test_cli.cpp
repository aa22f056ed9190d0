#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "pea/config.hpp"
#include "pea/persistence.hpp"
#include "test_util.hpp"

namespace pea {
namespace {

using testing::TempDir;

struct Result {
  int code;
  std::string out, err;
};

Result pea_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "pea");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_small_config(const std::filesystem::path& path, bool pea) {
  Json j = Json::parse(R"({
    "name": "tiny",
    "model": {"architecture": "small_cnn", "widths": [4, 8]},
    "train": {"epochs": 3, "batch_size": 32, "base_lr": 0.05, "label_smoothing": 0.1},
    "data": {"source": "synthetic", "n_train": 96, "n_val": 32, "num_classes": 4, "noise": 0.25}
  })");
  if (pea) j["pea"] = Json::parse(R"({"mode": "stochastic", "sota": "gelu", "init_end": 1, "trans_end": 2})");
  std::ofstream(path) << j.dump(2);
}

TEST(Cli, ExportScheduleToStdout) {
  const auto r = pea_cli({"export-schedule", "--init-end", "5", "--trans-end", "115", "--epochs", "120"});
  ASSERT_EQ(r.code, 0) << r.err;
  PhaseSchedule s;
  EXPECT_EQ(r.out, schedule_csv(s));
}

TEST(Cli, ExportScheduleToFileWritesManifest) {
  TempDir dir("sched");
  const auto path = dir / "alpha.csv";
  const auto r = pea_cli({"export-schedule", "--init-end", "2", "--trans-end", "6", "--epochs", "8", "--out",
                          path.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(path), schedule_csv(PhaseSchedule{2, 6, 8}));
  const auto manifest = Json::parse(slurp(path.string() + ".manifest.json"));
  EXPECT_EQ(manifest.at("command"), "export-schedule");
  EXPECT_EQ(manifest.at("schedule").at("trans_end"), 6);
}

TEST(Cli, ValidationErrorsExitOne) {
  EXPECT_EQ(pea_cli({"export-schedule", "--init-end", "7", "--trans-end", "6"}).code, 1);
  EXPECT_EQ(pea_cli({"export-schedule", "--granularity", "hourly"}).code, 1);
  EXPECT_EQ(pea_cli({"bogus"}).code, 1);
  EXPECT_EQ(pea_cli({}).code, 1);
  EXPECT_EQ(pea_cli({"train", "no-such-preset"}).code, 1);
  EXPECT_EQ(pea_cli({"grad-check", "--arch", "vgg"}).code, 1);
  const auto r = pea_cli({"train", "no-such-preset"});
  EXPECT_NE(r.err.find("neither a config file nor a preset"), std::string::npos) << r.err;
}

TEST(Cli, BadConfigNamesField) {
  TempDir dir("badcfg");
  std::ofstream(dir / "c.json") << R"({"preset": "baseline-relu", "train": {"epochs": 2, "momentun": 0.5}})";
  const auto r = pea_cli({"train", (dir / "c.json").string(), "--out", (dir / "o").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("train.momentun: unknown key"), std::string::npos) << r.err;
}

TEST(Cli, HelpExitsZero) {
  const auto r = pea_cli({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("grad-check"), std::string::npos);
}

TEST(Cli, GradCheckFilteredAndNegativeControl) {
  auto ok = pea_cli({"grad-check", "--arch", "mlp", "--activation", "gelu"});
  EXPECT_EQ(ok.code, 0) << ok.out;
  EXPECT_NE(ok.out.find("all gradient checks passed"), std::string::npos);
  auto bad = pea_cli({"grad-check", "--arch", "mlp", "--activation", "gelu", "--fault-scale", "1.5"});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.out.find("FAIL"), std::string::npos);
}

TEST(Cli, TrainExportEvalInspectRoundTrip) {
  TempDir dir("flow");
  write_small_config(dir / "c.json", true);
  const auto out = dir / "run";
  auto r = pea_cli({"train", (dir / "c.json").string(), "--runs", "2", "--seed", "4", "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("tiny: val_acc"), std::string::npos) << r.out;

  const auto manifest = Json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(manifest.at("seed"), 4);
  EXPECT_EQ(manifest.at("runs"), 2);
  EXPECT_EQ(manifest.at("config_hash").get<std::string>(),
            config_hash(experiment_from_json(Json::parse(slurp(out / "config.json")))));
  const auto artifacts = manifest.at("artifacts");
  for (const char* f : {"config.json", "metrics.csv", "summary.csv", "model.pea", "run0/final.ckpt",
                        "run1/selected.ckpt"}) {
    EXPECT_NE(std::find(artifacts.begin(), artifacts.end(), f), artifacts.end()) << f;
  }
  EXPECT_EQ(read_metrics_csv(out / "metrics.csv").size(), 6u);

  r = pea_cli({"export-model", (out / "run0" / "final.ckpt").string(), "--out", (dir / "m.pea").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.find("GELU"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / "m.pea.manifest.json"));

  const auto ev_ckpt = pea_cli({"eval", (out / "run0" / "final.ckpt").string(), "--config", (dir / "c.json").string()});
  const auto ev_export = pea_cli({"eval", (dir / "m.pea").string(), "--config", (dir / "c.json").string()});
  ASSERT_EQ(ev_ckpt.code, 0) << ev_ckpt.err;
  ASSERT_EQ(ev_export.code, 0) << ev_export.err;
  auto acc_line = [](const std::string& s) { return s.substr(s.find("val_acc")); };
  EXPECT_EQ(acc_line(ev_ckpt.out), acc_line(ev_export.out));

  r = pea_cli({"inspect-checkpoint", (out / "run0" / "final.ckpt").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("format version 1"), std::string::npos);
  EXPECT_NE(r.out.find("alpha=1"), std::string::npos) << r.out;
  r = pea_cli({"inspect-checkpoint", "--json", (out / "run0" / "final.ckpt").string()});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(Json::parse(r.out).at("epoch"), 3);
}

TEST(Cli, CorruptCheckpointIsRuntimeError) {
  TempDir dir("corrupt");
  std::ofstream(dir / "x.ckpt") << "PEACKPT garbage";
  const auto r = pea_cli({"inspect-checkpoint", (dir / "x.ckpt").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(r.err.empty());
}

TEST(Cli, CompareReportsPerSeedDeltas) {
  TempDir dir("cmp");
  write_small_config(dir / "a.json", false);
  write_small_config(dir / "b.json", true);
  const auto r = pea_cli({"compare", (dir / "a.json").string(), (dir / "b.json").string(), "--runs", "2", "--out",
                          (dir / "o").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("mean delta"), std::string::npos);
  const auto csv = slurp(dir / "o" / "compare.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_TRUE(Json::parse(slurp(dir / "o" / "manifest.json")).contains("inconclusive"));
}

TEST(Cli, OutputRootFromEnvironment) {
  TempDir dir("envroot");
  write_small_config(dir / "c.json", false);
  ::setenv("PEA_OUTPUT_ROOT", (dir / "root").c_str(), 1);
  const auto r = pea_cli({"train", (dir / "c.json").string(), "--epochs", "1"});
  ::unsetenv("PEA_OUTPUT_ROOT");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "root" / "tiny" / "manifest.json"));
}

}  // namespace
}  // namespace pea
