#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>

#include <CLI11.hpp>

#include "pea/config.hpp"
#include "pea/errors.hpp"
#include "pea/experiment.hpp"
#include "pea/gradcheck.hpp"
#include "pea/persistence.hpp"
#include "pea/scheduler.hpp"

namespace pea::cli {
namespace fs = std::filesystem;

namespace {

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

/// A config file path, or else a preset name.
ExperimentConfig resolve_config(const std::string& source, std::optional<int> epochs) {
  Json j;
  if (fs::exists(source)) {
    std::ifstream in(source);
    try {
      j = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(source + ": invalid JSON: " + e.what());
    }
    if (!j.is_object()) throw ConfigError(source + ": expected a JSON object");
  } else {
    const auto names = preset_names();
    if (std::find(names.begin(), names.end(), source) == names.end()) {
      throw ConfigError("'" + source + "' is neither a config file nor a preset name");
    }
    j = Json{{"preset", source}};
  }
  if (epochs) j["train"]["epochs"] = *epochs;
  return experiment_from_json(j);
}

fs::path output_dir(const std::string& flag, const ExperimentConfig& cfg, const std::string& fallback_name) {
  if (!flag.empty()) return flag;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  const char* root = std::getenv("PEA_OUTPUT_ROOT");
  return fs::path(root && *root ? root : "runs") / fallback_name;
}

Json artifact_list(const fs::path& dir) {
  Json out = Json::array();
  if (!fs::exists(dir)) return out;
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename() != "manifest.json") {
      files.push_back(fs::relative(e.path(), dir).generic_string());
    }
  }
  std::sort(files.begin(), files.end());
  for (auto& f : files) out.push_back(f);
  return out;
}

void write_json(const fs::path& path, const Json& j) {
  const std::string text = j.dump(2) + "\n";
  write_bytes_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void write_manifest(const fs::path& path, const std::string& command, const std::vector<std::string>& args, Json body) {
  Json m{{"command", command}, {"argv", args}, {"format_version", kFormatVersion}};
  for (auto& [k, v] : body.items()) m[k] = v;
  write_json(path, m);
}

std::string summary_line(const ExperimentSummary& s) {
  return s.name + ": val_acc " + fixed(s.val_acc.mean) + " ± " + fixed(s.val_acc.stddev) + " over " +
         std::to_string(s.n_runs) + " run(s)";
}

int cmd_train(const std::vector<std::string>& argv, const std::string& source, std::optional<int> epochs,
              std::optional<std::uint64_t> seed, int runs, const std::string& out_flag, std::ostream& out) {
  ExperimentConfig cfg = resolve_config(source, epochs);
  if (seed) cfg.train.seed = *seed;
  cfg.output_dir = output_dir(out_flag, cfg, cfg.name);
  fs::create_directories(cfg.output_dir);
  write_json(cfg.output_dir / "config.json", to_json(cfg));

  const ExperimentResult r = run_experiment(cfg, runs);
  const ExperimentSummary& s = r.summary;
  out << summary_line(s) << "\n";
  for (const RunResult& run : r.runs) {
    out << "  run " << run.run_id << " seed " << run.seed << ": selected epoch " << run.selected_epoch << ", val_acc "
        << fixed(run.selected.val_acc) << "\n";
  }
  if (s.export_path) out << "collapsed export: " << s.export_path->string() << "\n";
  out << "outputs: " << cfg.output_dir.string() << "\n";

  Json body{{"config_hash", config_hash(cfg)},
            {"seed", cfg.train.seed},
            {"runs", runs},
            {"config", to_json(cfg)},
            {"artifacts", artifact_list(cfg.output_dir)},
            {"val_acc_mean", s.val_acc.mean},
            {"val_acc_std", s.val_acc.stddev}};
  write_manifest(cfg.output_dir / "manifest.json", "train", argv, body);
  return kOk;
}

bool is_export(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[8] = {};
  in.read(magic, 8);
  return in && std::string_view(magic, 8) == kExportMagic;
}

int cmd_eval(const std::string& file, const std::string& source, std::optional<int> epochs, std::ostream& out) {
  const ExperimentConfig cfg = resolve_config(source, epochs);
  const LoadedData data = load_data(cfg.data);
  const Dataset& val = data.val;
  if (is_export(file)) {
    const ExportedModel m = load_exported(file);
    double loss = 0.0, correct = 0.0;
    const std::size_t bs = 256;
    std::vector<std::size_t> idx;
    for (std::size_t s = 0; s < val.size(); s += bs) {
      idx.clear();
      for (std::size_t i = s; i < std::min(val.size(), s + bs); ++i) idx.push_back(i);
      const Batch b = gather(val, idx);
      const Tensor z = m.logits(b.images);
      loss += label_smoothed_cross_entropy(z, b.labels, 0.0) * static_cast<double>(idx.size());
      correct += top1_accuracy(z, b.labels) * static_cast<double>(idx.size());
    }
    out << "exported model " << file << "\n";
    out << "val_acc " << fixed(correct / static_cast<double>(val.size())) << "\n";
    out << "val_loss " << fixed(loss / static_cast<double>(val.size())) << "\n";
    return kOk;
  }
  Checkpoint ck = load_checkpoint(file);
  const EvalMetrics m = evaluate(ck.model, val);
  out << "checkpoint " << file << " (epoch " << ck.trainer.epochs_completed << ")\n";
  out << "val_acc " << fixed(m.accuracy) << "\n";
  out << "val_loss " << fixed(m.loss) << "\n";
  return kOk;
}

int cmd_compare(const std::vector<std::string>& argv, const std::string& a_src, const std::string& b_src,
                std::optional<int> epochs, std::optional<std::uint64_t> seed, int runs, const std::string& out_flag,
                std::ostream& out) {
  ExperimentConfig a = resolve_config(a_src, epochs);
  ExperimentConfig b = resolve_config(b_src, epochs);
  if (seed) a.train.seed = b.train.seed = *seed;
  const fs::path dir = output_dir(out_flag, ExperimentConfig{}, "compare-" + a.name + "-vs-" + b.name);
  a.output_dir = dir / "a";
  b.output_dir = dir / "b";
  const ExperimentResult ra = run_experiment(a, runs);
  const ExperimentResult rb = run_experiment(b, runs);
  const Comparison c = compare_runs(ra.summary.per_run_val_acc, rb.summary.per_run_val_acc);

  std::string csv = "seed,a_val_acc,b_val_acc,delta\n";
  out << "A = " << a.name << ", B = " << b.name << "\n";
  out << "seed      A        B        B-A\n";
  for (std::size_t i = 0; i < c.deltas.size(); ++i) {
    const std::uint64_t s = ra.runs[i].seed;
    out << s << "  " << fixed(c.a[i]) << "  " << fixed(c.b[i]) << "  " << fixed(c.deltas[i]) << "\n";
    csv += std::to_string(s) + "," + fixed(c.a[i], 6) + "," + fixed(c.b[i], 6) + "," + fixed(c.deltas[i], 6) + "\n";
  }
  out << summary_line(ra.summary) << "\n" << summary_line(rb.summary) << "\n";
  out << "mean delta " << fixed(c.delta.mean) << " ± " << fixed(c.delta.stddev) << ", pooled std "
      << fixed(c.pooled_std) << (c.inconclusive ? " -> inconclusive (|delta| < 2 pooled std)" : " -> separated")
      << "\n";
  write_bytes_atomic(dir / "compare.csv", std::span(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));

  Json body{{"config_hash", {{"a", config_hash(a)}, {"b", config_hash(b)}}},
            {"seed", a.train.seed},
            {"runs", runs},
            {"config", {{"a", to_json(a)}, {"b", to_json(b)}}},
            {"mean_delta", c.delta.mean},
            {"pooled_std", c.pooled_std},
            {"inconclusive", c.inconclusive},
            {"artifacts", artifact_list(dir)}};
  write_manifest(dir / "manifest.json", "compare", argv, body);
  return kOk;
}

int cmd_grad_check(const std::string& arch, const std::string& activation, double rel, double abs, double step,
                   double fault, std::ostream& out) {
  GradSuiteFilter filter;
  if (!arch.empty()) filter.architecture = parse_architecture(arch);
  if (!activation.empty()) filter.activation = ActivationKind::parse(activation).tag();
  GradCheckOptions opts;
  opts.rel_tol = rel;
  opts.abs_tol = abs;
  opts.step = step;
  opts.fault_scale = fault;
  const auto results = run_grad_suite(filter, opts);
  std::size_t width = 10;
  for (const auto& r : results) width = std::max(width, r.name.size());
  out << std::string("check") + std::string(width - 5, ' ') << "  coords  max_abs_err  max_rel_err  status\n";
  bool ok = !results.empty();
  for (const auto& r : results) {
    ok = ok && r.passed();
    char row[64];
    std::snprintf(row, sizeof row, "  %6zu  %11s  %11s  ", r.checked, sci(r.max_abs_err).c_str(),
                  sci(r.max_rel_err).c_str());
    out << r.name << std::string(width - r.name.size(), ' ') << row << (r.passed() ? "pass" : "FAIL") << "\n";
  }
  out << (ok ? "all gradient checks passed" : "gradient checks FAILED") << " (rel " << rel << ", abs " << abs
      << ")\n";
  return ok ? kOk : kRuntime;
}

int cmd_export_schedule(const std::vector<std::string>& argv, int init_end, int trans_end, int epochs,
                        const std::string& granularity, const std::string& out_file, std::ostream& out) {
  PhaseSchedule s;
  s.init_end = init_end;
  s.trans_end = trans_end;
  s.total_epochs = epochs;
  s.granularity = parse_schedule_granularity(granularity);
  const std::string csv = schedule_csv(s);
  if (out_file.empty()) {
    out << csv;
    return kOk;
  }
  write_bytes_atomic(out_file, std::span(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
  Json body{{"schedule", {{"init_end", init_end}, {"trans_end", trans_end}, {"epochs", epochs}, {"granularity", granularity}}},
            {"artifacts", {fs::path(out_file).filename().string()}}};
  write_manifest(fs::path(out_file).string() + ".manifest.json", "export-schedule", argv, body);
  out << "wrote " << out_file << "\n";
  return kOk;
}

int cmd_export_model(const std::vector<std::string>& argv, const std::string& checkpoint, const std::string& out_file,
                     std::ostream& out) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const ExportedModel m = export_collapsed(ck.model, out_file);
  std::string kinds;
  for (const auto& k : m.node_kinds()) kinds += (kinds.empty() ? "" : ", ") + k;
  out << "wrote " << out_file << " (" << m.nodes().size() << " nodes: " << kinds << ")\n";
  Json body{{"source", checkpoint},
            {"seed", ck.model.seed()},
            {"node_kinds", m.node_kinds()},
            {"artifacts", {fs::path(out_file).filename().string()}}};
  write_manifest(fs::path(out_file).string() + ".manifest.json", "export-model", argv, body);
  return kOk;
}

int cmd_inspect(const std::string& file, bool as_json, std::ostream& out) {
  const CheckpointInfo info = inspect_checkpoint(file);
  if (as_json) {
    Json j = info.meta;
    j.erase("rng");
    Json sections = Json::array();
    for (const auto& s : info.sections) {
      sections.push_back({{"name", s.name}, {"offset", s.offset}, {"length", s.length}, {"crc32", s.crc}});
    }
    j["sections"] = sections;
    out << j.dump(2) << "\n";
    return kOk;
  }
  const Json& m = info.meta;
  out << "format version " << info.version << "\n";
  out << "epoch " << m.at("epoch") << ", seed " << m.at("seed") << "\n";
  out << "model " << m.at("model").dump() << "\n";
  if (!m.at("pea").is_null()) out << "pea " << m.at("pea").dump() << "\n";
  for (const Json& e : m.at("ensembles")) {
    out << "  ensemble " << e.at("name").get<std::string>() << " alpha=" << e.at("alpha") << "\n";
  }
  out << info.sections.size() << " sections:\n";
  for (const auto& s : info.sections) {
    char crc[16];
    std::snprintf(crc, sizeof crc, "%08x", s.crc);
    out << "  " << s.name << "  " << s.length << " bytes  crc32 " << crc << "\n";
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Progressive ensemble activation experiments", "pea"};
  app.require_subcommand(1);

  std::string source, source_b, file, out_flag, arch, activation, granularity = "per_epoch";
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  int runs = 1;
  double rel = 1e-2, abs = 1e-4, step = 1e-3, fault = 1.0;
  int init_end = 5, trans_end = 115, total = 120;
  bool as_json = false;

  auto* train = app.add_subcommand("train", "Train one or more seeded runs");
  train->add_option("config", source, "Config file or preset name")->required();
  train->add_option("--epochs", epochs, "Override epochs (preset schedules rescale)");
  train->add_option("--seed", seed, "Base seed; run i uses seed+i");
  train->add_option("--runs", runs, "Number of runs")->check(CLI::PositiveNumber);
  train->add_option("--out", out_flag, "Output directory");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint or exported model on the validation split");
  eval->add_option("model", file, "Checkpoint or exported model")->required()->check(CLI::ExistingFile);
  eval->add_option("--config", source, "Config or preset defining the data")->default_val("baseline-relu");
  eval->add_option("--epochs", epochs, "Epoch override when resolving a preset");

  auto* compare = app.add_subcommand("compare", "Train two configurations on the same seeds and compare");
  compare->add_option("a", source, "Config file or preset")->required();
  compare->add_option("b", source_b, "Config file or preset")->required();
  compare->add_option("--runs", runs, "Runs per configuration")->default_val(5)->check(CLI::PositiveNumber);
  compare->add_option("--epochs", epochs, "Override epochs");
  compare->add_option("--seed", seed, "Base seed");
  compare->add_option("--out", out_flag, "Output directory");

  auto* grad = app.add_subcommand("grad-check", "Finite-difference gradient checks");
  grad->add_option("--arch", arch, "Restrict to one architecture");
  grad->add_option("--activation", activation, "Restrict to one activation");
  grad->add_option("--tolerance", rel, "Relative tolerance")->default_val(1e-2);
  grad->add_option("--abs-tolerance", abs, "Absolute tolerance")->default_val(1e-4);
  grad->add_option("--step", step, "Finite-difference step")->default_val(1e-3);
  grad->add_option("--fault-scale", fault, "Scale analytic gradients (negative control)")->group("");

  auto* sched = app.add_subcommand("export-schedule", "Write the alpha schedule as CSV");
  sched->add_option("--init-end", init_end, "Last epoch of the initial phase")->default_val(5);
  sched->add_option("--trans-end", trans_end, "Epoch at which alpha reaches 1")->default_val(115);
  sched->add_option("--epochs", total, "Total epochs")->default_val(120);
  sched->add_option("--granularity", granularity, "per_epoch or per_step")->default_val("per_epoch");
  sched->add_option("--out", out_flag, "Output file (default stdout)");

  auto* exp = app.add_subcommand("export-model", "Collapse a checkpoint to ReLU and export it");
  exp->add_option("checkpoint", file, "Checkpoint file")->required()->check(CLI::ExistingFile);
  exp->add_option("--out", out_flag, "Output file")->required();

  auto* inspect = app.add_subcommand("inspect-checkpoint", "Print checkpoint metadata and sections");
  inspect->add_option("checkpoint", file, "Checkpoint file")->required()->check(CLI::ExistingFile);
  inspect->add_flag("--json", as_json, "Emit JSON");

  try {
    std::vector<std::string> rest(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    app.parse(rest);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "pea: error: " << e.what() << "\n";
    if (e.get_name() == "RequiredError" && app.get_subcommands().empty()) err << app.help();
    return kValidation;
  }

  try {
    if (train->parsed()) return cmd_train(args, source, epochs, seed, runs, out_flag, out);
    if (eval->parsed()) return cmd_eval(file, source, epochs, out);
    if (compare->parsed()) return cmd_compare(args, source, source_b, epochs, seed, runs, out_flag, out);
    if (grad->parsed()) return cmd_grad_check(arch, activation, rel, abs, step, fault, out);
    if (sched->parsed()) return cmd_export_schedule(args, init_end, trans_end, total, granularity, out_flag, out);
    if (exp->parsed()) return cmd_export_model(args, file, out_flag, out);
    if (inspect->parsed()) return cmd_inspect(file, as_json, out);
  } catch (const ConfigError& e) {
    err << "pea: invalid configuration: " << e.what() << "\n";
    return kValidation;
  } catch (const ContractError& e) {
    err << "pea: error: " << e.what() << "\n";
    return kValidation;
  } catch (const DimensionError& e) {
    err << "pea: error: " << e.what() << "\n";
    return kValidation;
  } catch (const NumericError& e) {
    err << "pea: numeric failure: " << e.what() << "\n";
    return kRuntime;
  } catch (const std::exception& e) {
    err << "pea: error: " << e.what() << "\n";
    return kRuntime;
  }
  return kValidation;
}

}  // namespace pea::cli
