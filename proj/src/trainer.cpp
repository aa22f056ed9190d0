#include "pea/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pea/errors.hpp"

namespace pea {

std::string to_string(LrScheduleKind kind) {
  switch (kind) {
    case LrScheduleKind::Constant: return "constant";
    case LrScheduleKind::PiecewiseConstant: return "piecewise";
    case LrScheduleKind::Cosine: return "cosine";
  }
  return "?";
}

LrScheduleKind parse_lr_schedule_kind(const std::string& text) {
  for (auto k : {LrScheduleKind::Constant, LrScheduleKind::PiecewiseConstant, LrScheduleKind::Cosine}) {
    if (to_string(k) == text) return k;
  }
  throw ConfigError("unknown lr schedule '" + text + "' (expected constant, piecewise or cosine)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(base_lr > 0.0) || !std::isfinite(base_lr)) throw ConfigError("train.base_lr must be positive");
  if (warmup_epochs < 0) throw ConfigError("train.warmup_epochs must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train.momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) {
    throw ConfigError("train.label_smoothing must lie in [0, 1)");
  }
  if (lr_schedule.kind == LrScheduleKind::PiecewiseConstant) {
    if (!(lr_schedule.factor > 0.0)) throw ConfigError("train.lr_schedule.factor must be positive");
    if (!std::is_sorted(lr_schedule.boundaries.begin(), lr_schedule.boundaries.end())) {
      throw ConfigError("train.lr_schedule.boundaries must be ascending");
    }
  }
  if (lr_schedule.kind == LrScheduleKind::Cosine && warmup_epochs >= epochs) {
    throw ConfigError("train.warmup_epochs must be below epochs for a cosine schedule");
  }
  if (!(augment.flip_prob >= 0.0 && augment.flip_prob <= 1.0)) {
    throw ConfigError("train.augment.flip_prob must lie in [0, 1]");
  }
  if (pea) {
    pea->schedule.validate();
    pea->ensemble.validate();
    if (pea->schedule.total_epochs != epochs) {
      throw ConfigError("pea.total_epochs (" + std::to_string(pea->schedule.total_epochs) +
                        ") must equal train.epochs (" + std::to_string(epochs) + ")");
    }
  }
}

bool TrainConfig::decays(ParamGroup group) const {
  return std::find(weight_decay_exclusions.begin(), weight_decay_exclusions.end(), group) ==
         weight_decay_exclusions.end();
}

double learning_rate(const TrainConfig& cfg, int epoch) {
  if (epoch < 1) throw ContractError("epochs are numbered from 1");
  if (epoch <= cfg.warmup_epochs) return cfg.base_lr * epoch / cfg.warmup_epochs;
  switch (cfg.lr_schedule.kind) {
    case LrScheduleKind::Constant:
      return cfg.base_lr;
    case LrScheduleKind::PiecewiseConstant: {
      double lr = cfg.base_lr;
      for (int b : cfg.lr_schedule.boundaries) {
        if (epoch >= b) lr *= cfg.lr_schedule.factor;
      }
      return lr;
    }
    case LrScheduleKind::Cosine: {
      const double span = cfg.epochs - cfg.warmup_epochs;
      const double progress = (epoch - 1 - cfg.warmup_epochs) / span;
      return 0.5 * cfg.base_lr * (1.0 + std::cos(std::numbers::pi * progress));
    }
  }
  return cfg.base_lr;
}

bool same_metrics(const MetricsRecord& a, const MetricsRecord& b) {
  return a.run_id == b.run_id && a.epoch == b.epoch && a.alpha == b.alpha && a.lr == b.lr &&
         a.train_loss == b.train_loss && a.train_acc == b.train_acc && a.val_loss == b.val_loss &&
         a.val_acc == b.val_acc;
}

EvalMetrics evaluate(Model& model, const Dataset& data, std::size_t batch_size) {
  if (data.size() == 0) throw ContractError("cannot evaluate on an empty dataset");
  if (batch_size == 0) throw ContractError("evaluation batch size must be positive");
  double loss = 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    idx.resize(end - start);
    for (std::size_t i = start; i < end; ++i) idx[i - start] = i;
    const Batch b = gather(data, idx);
    const Tensor z = model.logits(b.images, Mode::Eval);
    loss += label_smoothed_cross_entropy(z, b.labels, 0.0) * static_cast<double>(idx.size());
    correct += static_cast<std::size_t>(std::lround(top1_accuracy(z, b.labels) * static_cast<double>(idx.size())));
  }
  const double n = static_cast<double>(data.size());
  return {loss / n, static_cast<double>(correct) / n};
}

void sgd_update(std::vector<Parameter<float>*> params, const GradientMap<float>& grads,
                std::map<std::string, Tensor>& momentum, const TrainConfig& cfg, double lr) {
  for (Parameter<float>* p : params) {
    auto it = grads.find(p->name);
    const float* g = it != grads.end() ? it->second.data().data() : nullptr;
    auto [mit, inserted] = momentum.try_emplace(p->name, Tensor(p->value.shape(), 0.0f));
    if (mit->second.shape() != p->value.shape()) {
      throw DimensionError("momentum buffer for " + p->name + " has the wrong shape");
    }
    auto v = mit->second.data();
    auto w = p->value.data();
    const double wd = cfg.decays(p->group) ? cfg.weight_decay : 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      double step = g ? static_cast<double>(g[i]) : 0.0;
      if (wd != 0.0) step += wd * static_cast<double>(w[i]);
      v[i] = static_cast<float>(cfg.momentum * static_cast<double>(v[i]) - lr * step);
      w[i] += v[i];
    }
  }
}

Trainer::Trainer(Model& model, const Dataset& train, const Dataset& val, TrainConfig cfg, std::string run_id)
    : model_(model),
      train_(train),
      val_(val),
      cfg_(std::move(cfg)),
      run_id_(std::move(run_id)),
      data_rng_(cfg_.seed, stream_id("data.order")),
      augment_rng_(cfg_.seed, stream_id("data.augment")),
      start_(std::chrono::steady_clock::now()) {
  cfg_.validate();
  train_.validate();
  val_.validate();
  if (train_.size() == 0) throw ConfigError("training set is empty");
  const std::size_t classes = model_.spec().num_classes;
  if (train_.num_classes != classes || val_.num_classes != classes) {
    throw ConfigError("model.num_classes (" + std::to_string(classes) + ") does not match the data (" +
                      std::to_string(train_.num_classes) + " train, " + std::to_string(val_.num_classes) + " val)");
  }
  if (cfg_.pea && model_.ensemble_layers().empty()) {
    throw ConfigError("pea is configured but the model has no ensemble layers");
  }
}

double Trainer::train_step(const Batch& batch, double lr, int epoch, std::size_t step, double* correct) {
  Tape<float> tape(true);
  ForwardContext<float> ctx{tape, Mode::Train};
  Var<float> logits = model_.forward(tape.constant(batch.images), ctx);
  Var<float> loss = ops::softmax_cross_entropy(logits, batch.labels, cfg_.label_smoothing);
  const double value = static_cast<double>(loss.value()[0]);
  if (!std::isfinite(value)) {
    throw NumericError("non-finite training loss " + std::to_string(value) + " at epoch " + std::to_string(epoch) +
                       ", step " + std::to_string(step + 1));
  }
  *correct += top1_accuracy(logits.value(), batch.labels) * static_cast<double>(batch.labels.size());
  const GradientMap<float> grads = tape.backward(loss);
  sgd_update(model_.parameters(), grads, state_.momentum, cfg_, lr);
  return value;
}

MetricsRecord Trainer::run_epoch() {
  if (finished()) throw StateError("training already completed " + std::to_string(cfg_.epochs) + " epochs");
  const int epoch = state_.epochs_completed + 1;
  const double lr = learning_rate(cfg_, epoch);
  const std::size_t n = train_.size();
  const std::size_t steps = (n + cfg_.batch_size - 1) / cfg_.batch_size;
  const bool per_step = cfg_.pea && cfg_.pea->schedule.granularity == ScheduleGranularity::PerStep;
  if (cfg_.pea && !per_step) apply(cfg_.pea->schedule, model_, epoch);

  const auto order = data_rng_.permutation(n);
  double loss_sum = 0.0, correct = 0.0;
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t begin = s * cfg_.batch_size;
    const std::size_t end = std::min(n, begin + cfg_.batch_size);
    Batch batch = gather(train_, std::span(order).subspan(begin, end - begin));
    batch.images = augment(batch.images, cfg_.augment.crop_padding, cfg_.augment.flip_prob, augment_rng_);
    if (per_step) apply(cfg_.pea->schedule, model_, step_progress(epoch, s, steps));
    loss_sum += train_step(batch, lr, epoch, s, &correct) * static_cast<double>(end - begin);
  }

  const EvalMetrics val = evaluate(model_, val_);
  MetricsRecord rec;
  rec.run_id = run_id_;
  rec.epoch = epoch;
  if (cfg_.pea) rec.alpha = alpha_at(cfg_.pea->schedule, epoch);
  rec.lr = lr;
  rec.train_loss = loss_sum / static_cast<double>(n);
  rec.train_acc = correct / static_cast<double>(n);
  rec.val_loss = val.loss;
  rec.val_acc = val.accuracy;
  const double offset = state_.history.empty() ? 0.0 : state_.history.back().wall_time_s;
  rec.wall_time_s =
      offset + std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  start_ = std::chrono::steady_clock::now();

  state_.epochs_completed = epoch;
  state_.data_rng = data_rng_.state();
  state_.augment_rng = augment_rng_.state();
  state_.history.push_back(rec);
  if (hook_) hook_(rec, *this);
  return rec;
}

std::vector<MetricsRecord> Trainer::run(std::optional<int> last_epoch) {
  const int last = std::min(last_epoch.value_or(cfg_.epochs), cfg_.epochs);
  std::vector<MetricsRecord> out;
  while (state_.epochs_completed < last) out.push_back(run_epoch());
  return out;
}

void Trainer::restore(const TrainerState& state) {
  if (state.epochs_completed < 0 || state.epochs_completed > cfg_.epochs) {
    throw StateError("trainer state epoch " + std::to_string(state.epochs_completed) + " outside the configured run");
  }
  state_ = state;
  if (!state_.data_rng.empty()) data_rng_.set_state(state_.data_rng);
  if (!state_.augment_rng.empty()) augment_rng_.set_state(state_.augment_rng);
  if (cfg_.pea && state_.epochs_completed > 0) apply(cfg_.pea->schedule, model_, state_.epochs_completed);
  start_ = std::chrono::steady_clock::now();
}

std::vector<MetricsRecord> train(Model& model, const Dataset& train, const Dataset& val, const TrainConfig& cfg,
                                 const std::string& run_id) {
  Trainer t(model, train, val, cfg, run_id);
  return t.run();
}

}  // namespace pea
