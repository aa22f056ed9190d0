#include "pea/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pea/errors.hpp"
#include "pea/persistence.hpp"

namespace pea {
namespace {

bool eligible(const MetricsRecord& r, bool pea) { return !pea || (r.alpha && *r.alpha == 1.0); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_bytes_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

LoadedData load_data(const DataSource& source) {
  if (source.kind == DataSource::Kind::Synthetic) {
    return {synth_classification(source.n_train, source.num_classes, source.noise, source.seed, Split::Train,
                                 source.geometry),
            synth_classification(source.n_val, source.num_classes, source.noise, source.seed, Split::Val,
                                 source.geometry)};
  }
  LoadedData d;
  d.train = load_idx(source.train_images, source.train_labels, nullptr, Split::Train);
  d.val = load_idx(source.val_images, source.val_labels, &d.train.normalization, Split::Val);
  const std::size_t classes = std::max(d.train.num_classes, d.val.num_classes);
  d.train.num_classes = d.val.num_classes = classes;
  return d;
}

void ExperimentConfig::validate() const {
  model.validate();
  train.validate();
  if (train.pea) {
    if (model.slot.kind != ActivationSlot::Kind::Ensemble || !(model.slot.ensemble == train.pea->ensemble)) {
      throw ConfigError("model: activation slot must be the pea ensemble when pea is configured");
    }
  } else if (model.slot.kind == ActivationSlot::Kind::Ensemble) {
    throw ConfigError("pea: required when the model uses ensemble activations");
  }
  if (data.kind == DataSource::Kind::Synthetic) {
    if (model.in_channels != data.geometry.channels || model.in_height != data.geometry.height ||
        model.in_width != data.geometry.width) {
      throw ConfigError("model: input geometry does not match data (" + std::to_string(data.geometry.channels) + "x" +
                        std::to_string(data.geometry.height) + "x" + std::to_string(data.geometry.width) + ")");
    }
    if (model.num_classes != data.num_classes) {
      throw ConfigError("model.num_classes: " + std::to_string(model.num_classes) + " does not match data.num_classes " +
                        std::to_string(data.num_classes));
    }
  }
}

MetricSummary summarize(const std::vector<double>& values) {
  if (values.empty()) throw ContractError("cannot summarize an empty series");
  MetricSummary s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.stddev = values.size() > 1 ? std::sqrt(sq / (n - 1.0)) : 0.0;
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  return s;
}

std::size_t select_checkpoint(const std::vector<MetricsRecord>& history) {
  if (history.empty()) throw ContractError("no epochs to select from");
  const bool pea = std::any_of(history.begin(), history.end(), [](const MetricsRecord& r) { return r.alpha.has_value(); });
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (!eligible(history[i], pea)) continue;
    if (!best || history[i].val_acc >= history[*best].val_acc) best = i;
  }
  if (!best) throw StateError("no epoch reached the final phase (alpha = 1)");
  return *best;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, int n_runs, bool vary_seeds) {
  cfg.validate();
  if (n_runs < 1) throw ConfigError("runs must be >= 1");
  const LoadedData data = load_data(cfg.data);
  const bool pea = cfg.train.pea.has_value();
  const bool write = !cfg.output_dir.empty();

  ExperimentResult result;
  std::vector<MetricsRecord> all;
  for (int i = 0; i < n_runs; ++i) {
    TrainConfig tc = cfg.train;
    tc.seed = cfg.train.seed + (vary_seeds ? static_cast<std::uint64_t>(i) : 0);
    Model model = build<float>(cfg.model, tc.seed);
    Trainer trainer(model, data.train, data.val, tc, std::to_string(i));

    std::optional<Model> best_model;
    std::optional<TrainerState> best_state;
    MetricsRecord best;
    trainer.on_epoch_end([&](const MetricsRecord& rec, Trainer& t) {
      if (!eligible(rec, pea)) return;
      if (!best_model || rec.val_acc >= best.val_acc) {
        best = rec;
        best_model = t.model();
        if (write) best_state = t.state();
      }
    });
    trainer.run();

    RunResult run{std::to_string(i), tc.seed, trainer.state().history, best.epoch, best,
                  best_model ? *best_model : model, model};
    if (write) {
      const auto dir = cfg.output_dir / ("run" + run.run_id);
      save_checkpoint(dir / "final.ckpt", model, tc, trainer.state());
      if (best_state) save_checkpoint(dir / "selected.ckpt", *best_model, tc, *best_state);
    }
    all.insert(all.end(), run.history.begin(), run.history.end());
    result.runs.push_back(std::move(run));
  }

  ExperimentSummary& s = result.summary;
  s.name = cfg.name;
  s.n_runs = n_runs;
  std::vector<double> va, vl, ta, tl;
  for (const RunResult& r : result.runs) {
    va.push_back(r.selected.val_acc);
    vl.push_back(r.selected.val_loss);
    ta.push_back(r.selected.train_acc);
    tl.push_back(r.selected.train_loss);
    s.selected_epochs.push_back(r.selected_epoch);
  }
  s.val_acc = summarize(va);
  s.val_loss = summarize(vl);
  s.train_acc = summarize(ta);
  s.train_loss = summarize(tl);
  s.per_run_val_acc = va;

  if (write) {
    write_metrics_csv(cfg.output_dir / "metrics.csv", all);
    if (pea) {
      const auto path = cfg.output_dir / "model.pea";
      export_collapsed(result.runs.front().selected_model, path);
      s.export_path = path;
    }
    std::string epochs;
    for (int e : s.selected_epochs) epochs += (epochs.empty() ? "" : ";") + std::to_string(e);
    std::string text =
        "name,n_runs,val_acc_mean,val_acc_std,val_acc_min,val_acc_max,val_loss_mean,val_loss_std,"
        "train_acc_mean,train_acc_std,selected_epochs,export_path\n";
    text += s.name + "," + std::to_string(s.n_runs) + "," + fmt(s.val_acc.mean) + "," + fmt(s.val_acc.stddev) + "," +
            fmt(s.val_acc.min) + "," + fmt(s.val_acc.max) + "," + fmt(s.val_loss.mean) + "," +
            fmt(s.val_loss.stddev) + "," + fmt(s.train_acc.mean) + "," + fmt(s.train_acc.stddev) + "," + epochs +
            "," + (s.export_path ? s.export_path->string() : "") + "\n";
    write_text(cfg.output_dir / "summary.csv", text);
  }
  return result;
}

Comparison compare_runs(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || a.size() != b.size()) throw ContractError("comparison needs equally many runs on both sides");
  Comparison c;
  c.a = a;
  c.b = b;
  for (std::size_t i = 0; i < a.size(); ++i) c.deltas.push_back(b[i] - a[i]);
  c.delta = summarize(c.deltas);
  const double sa = summarize(a).stddev, sb = summarize(b).stddev;
  c.pooled_std = std::sqrt((sa * sa + sb * sb) / 2.0);
  c.inconclusive = std::abs(c.delta.mean) < 2.0 * c.pooled_std;
  return c;
}

}  // namespace pea
