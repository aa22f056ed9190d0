#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pea/data.hpp"
#include "pea/ensemble.hpp"
#include "pea/model.hpp"
#include "pea/scheduler.hpp"

namespace pea {

enum class LrScheduleKind { Constant, PiecewiseConstant, Cosine };

std::string to_string(LrScheduleKind kind);
LrScheduleKind parse_lr_schedule_kind(const std::string& text);

struct LrSchedule {
  LrScheduleKind kind = LrScheduleKind::Constant;
  std::vector<int> boundaries;  // PiecewiseConstant: epochs at which lr *= factor
  double factor = 0.1;
  bool operator==(const LrSchedule&) const = default;
};

/// Ensemble layers and the schedule that drives their alpha.
struct PeaSetup {
  PhaseSchedule schedule;
  EnsembleConfig ensemble;
  bool operator==(const PeaSetup&) const = default;
};

struct AugmentConfig {
  std::size_t crop_padding = 0;
  double flip_prob = 0.0;
  bool operator==(const AugmentConfig&) const = default;
};

struct TrainConfig {
  int epochs = 10;
  std::size_t batch_size = 64;
  double base_lr = 0.1;
  LrSchedule lr_schedule;
  int warmup_epochs = 0;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::vector<ParamGroup> weight_decay_exclusions;
  double label_smoothing = 0.0;
  std::uint64_t seed = 0;
  std::optional<PeaSetup> pea;
  AugmentConfig augment;

  /// ConfigError naming the offending field.
  void validate() const;
  bool decays(ParamGroup group) const;
  bool operator==(const TrainConfig&) const = default;
};

/// Learning rate used throughout 1-indexed epoch `epoch`. Warm-up (lr·e/w for
/// e ≤ w) takes precedence; afterwards the schedule applies to base_lr.
double learning_rate(const TrainConfig& cfg, int epoch);

struct MetricsRecord {
  std::string run_id;
  int epoch = 0;
  std::optional<double> alpha;  // unset when training without ensemble layers
  double lr = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double wall_time_s = 0.0;
};

/// Same values apart from wall time.
bool same_metrics(const MetricsRecord& a, const MetricsRecord& b);

struct EvalMetrics {
  double loss = 0.0;  // plain cross-entropy
  double accuracy = 0.0;
};

/// Eval-mode metrics. ContractError on an empty dataset.
EvalMetrics evaluate(Model& model, const Dataset& data, std::size_t batch_size = 256);

/// Everything besides the model needed to continue training bit-exactly.
struct TrainerState {
  int epochs_completed = 0;
  std::map<std::string, Tensor> momentum;
  std::string data_rng;
  std::string augment_rng;
  std::vector<MetricsRecord> history;
};

/// One SGD step over explicit gradients: v ← μv − lr(g + wd·w); w ← w + v.
void sgd_update(std::vector<Parameter<float>*> params, const GradientMap<float>& grads,
                std::map<std::string, Tensor>& momentum, const TrainConfig& cfg, double lr);

class Trainer {
 public:
  using EpochHook = std::function<void(const MetricsRecord&, Trainer&)>;

  /// ConfigError on class-count mismatch, an invalid config, or a pea setup
  /// without ensemble layers in the model. `val` may equal `train`.
  Trainer(Model& model, const Dataset& train, const Dataset& val, TrainConfig cfg, std::string run_id = "0");

  /// Trains the next epoch and evaluates. NumericError on a non-finite loss.
  MetricsRecord run_epoch();
  /// Runs until `last_epoch` (default: cfg.epochs) and returns the new records.
  std::vector<MetricsRecord> run(std::optional<int> last_epoch = std::nullopt);
  bool finished() const { return state_.epochs_completed >= cfg_.epochs; }

  const TrainerState& state() const { return state_; }
  void restore(const TrainerState& state);

  Model& model() { return model_; }
  const TrainConfig& config() const { return cfg_; }
  const std::string& run_id() const { return run_id_; }
  void on_epoch_end(EpochHook hook) { hook_ = std::move(hook); }

 private:
  double train_step(const Batch& batch, double lr, int epoch, std::size_t step, double* correct);

  Model& model_;
  const Dataset& train_;
  const Dataset& val_;
  TrainConfig cfg_;
  std::string run_id_;
  TrainerState state_;
  RandomStream data_rng_;
  RandomStream augment_rng_;
  EpochHook hook_;
  std::chrono::steady_clock::time_point start_;
};

/// Convenience wrapper: a fresh Trainer run to completion.
std::vector<MetricsRecord> train(Model& model, const Dataset& train, const Dataset& val, const TrainConfig& cfg,
                                 const std::string& run_id = "0");

}  // namespace pea
