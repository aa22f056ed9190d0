#include "pea/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <zlib.h>

#include "pea/errors.hpp"

namespace pea {
namespace {

template <typename V>
V convert(const Json& j, const std::string& path) {
  if constexpr (std::is_same_v<V, bool>) {
    if (!j.is_boolean()) throw ConfigError(path + ": expected a boolean");
    return j.get<bool>();
  } else if constexpr (std::is_same_v<V, std::string>) {
    if (!j.is_string()) throw ConfigError(path + ": expected a string");
    return j.get<std::string>();
  } else if constexpr (std::is_floating_point_v<V>) {
    if (!j.is_number()) throw ConfigError(path + ": expected a number");
    return j.get<V>();
  } else if constexpr (std::is_unsigned_v<V>) {
    if (!j.is_number_unsigned()) throw ConfigError(path + ": expected a non-negative integer");
    return j.get<V>();
  } else if constexpr (std::is_integral_v<V>) {
    if (!j.is_number_integer()) throw ConfigError(path + ": expected an integer");
    return j.get<V>();
  } else {
    if (!j.is_array()) throw ConfigError(path + ": expected an array");
    V out;
    for (std::size_t i = 0; i < j.size(); ++i) {
      out.push_back(convert<typename V::value_type>(j[i], path + "[" + std::to_string(i) + "]"));
    }
    return out;
  }
}

/// Tracks which keys of an object were consumed so leftovers can be rejected.
class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  std::string field(const std::string& key) const { return path_ + "." + key; }

  template <typename V>
  V get(const std::string& key, V fallback) {
    used_.insert(key);
    if (!j_.contains(key)) return fallback;
    return convert<V>(j_.at(key), field(key));
  }

  template <typename V>
  V require(const std::string& key) {
    if (!j_.contains(key)) throw ConfigError(field(key) + ": required field missing");
    return get<V>(key, V{});
  }

  const Json* object(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return nullptr;
    return &j_.at(key);
  }

  /// Wraps parse failures of a string-valued field with its path.
  template <typename F>
  auto parsed(const std::string& key, const std::string& fallback, F&& parse) {
    const std::string text = get<std::string>(key, fallback);
    try {
      return parse(text);
    } catch (const ConfigError& e) {
      throw ConfigError(field(key) + ": " + e.what());
    }
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!used_.count(item.key())) throw ConfigError(field(item.key()) + ": unknown key");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> used_;
};

template <typename F>
void with_path(const std::string& path, F&& check) {
  try {
    check();
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

Json ensemble_json(const EnsembleConfig& e) {
  return {{"mode", to_string(e.mode)}, {"sota", e.sota.token()}, {"granularity", to_string(e.granularity)}};
}

EnsembleConfig ensemble_from(Reader& r) {
  EnsembleConfig e;
  e.mode = r.parsed("mode", "weighted", parse_ensemble_mode);
  e.sota = r.parsed("sota", "gelu", [](const std::string& t) { return ActivationKind::parse(t); });
  e.granularity = r.parsed("granularity", "per_element", parse_sampling_granularity);
  return e;
}

ModelSpec model_from(const Json& j, const std::string& path, ModelSpec base) {
  Reader r(j, path);
  ModelSpec s = base;
  if (r.has("architecture")) {
    s.architecture = r.parsed("architecture", "", parse_architecture);
    if (!r.has("widths")) {
      s.widths = default_model_spec(s.architecture, s.in_channels, s.in_height, s.in_width, s.num_classes).widths;
    }
  } else {
    r.get<std::string>("architecture", "");
  }
  s.in_channels = r.get<std::size_t>("in_channels", s.in_channels);
  s.in_height = r.get<std::size_t>("in_height", s.in_height);
  s.in_width = r.get<std::size_t>("in_width", s.in_width);
  s.num_classes = r.get<std::size_t>("num_classes", s.num_classes);
  if (s.architecture == Architecture::MLP && !r.has("widths") && s.widths.size() >= 2) {
    s.widths.front() = s.input_size();
    s.widths.back() = s.num_classes;
  }
  s.widths = r.get<std::vector<std::size_t>>("widths", s.widths);
  s.dropout_rate = r.get<double>("dropout", s.dropout_rate);
  if (r.has("activation")) {
    s.slot = ActivationSlot::plain(
        r.parsed("activation", "relu", [](const std::string& t) { return ActivationKind::parse(t); }));
  } else {
    r.get<std::string>("activation", "");
  }
  if (const Json* e = r.object("ensemble")) {
    Reader er(*e, r.field("ensemble"));
    const EnsembleConfig cfg = ensemble_from(er);
    const double alpha = er.get<double>("initial_alpha", 0.0);
    er.finish();
    s.slot = ActivationSlot::ensemble_of(cfg, alpha);
  }
  r.finish();
  with_path(path, [&] { s.validate(); });
  return s;
}

TrainConfig train_from(const Json& j, const std::string& path, TrainConfig base) {
  Reader r(j, path);
  TrainConfig c = base;
  c.epochs = r.get<int>("epochs", c.epochs);
  c.batch_size = r.get<std::size_t>("batch_size", c.batch_size);
  c.base_lr = r.get<double>("base_lr", c.base_lr);
  if (const Json* lr = r.object("lr_schedule")) {
    Reader lr_r(*lr, r.field("lr_schedule"));
    c.lr_schedule.kind = lr_r.parsed("kind", to_string(c.lr_schedule.kind), parse_lr_schedule_kind);
    c.lr_schedule.boundaries = lr_r.get<std::vector<int>>("boundaries", c.lr_schedule.boundaries);
    c.lr_schedule.factor = lr_r.get<double>("factor", c.lr_schedule.factor);
    lr_r.finish();
  }
  c.warmup_epochs = r.get<int>("warmup_epochs", c.warmup_epochs);
  c.momentum = r.get<double>("momentum", c.momentum);
  c.weight_decay = r.get<double>("weight_decay", c.weight_decay);
  if (r.has("weight_decay_exclusions")) {
    c.weight_decay_exclusions.clear();
    const auto names = r.get<std::vector<std::string>>("weight_decay_exclusions", {});
    for (std::size_t i = 0; i < names.size(); ++i) {
      with_path(r.field("weight_decay_exclusions") + "[" + std::to_string(i) + "]",
                [&] { c.weight_decay_exclusions.push_back(parse_param_group(names[i])); });
    }
  } else {
    r.object("weight_decay_exclusions");
  }
  c.label_smoothing = r.get<double>("label_smoothing", c.label_smoothing);
  c.seed = r.get<std::uint64_t>("seed", c.seed);
  if (const Json* a = r.object("augment")) {
    Reader ar(*a, r.field("augment"));
    c.augment.crop_padding = ar.get<std::size_t>("crop_padding", c.augment.crop_padding);
    c.augment.flip_prob = ar.get<double>("flip_prob", c.augment.flip_prob);
    ar.finish();
  }
  r.finish();
  return c;
}

PeaSetup pea_from(const Json& j, const std::string& path, int epochs, PeaSetup base) {
  Reader r(j, path);
  PeaSetup p = base;
  p.ensemble = ensemble_from(r);
  p.schedule.init_end = r.get<int>("init_end", p.schedule.init_end);
  p.schedule.trans_end = r.get<int>("trans_end", p.schedule.trans_end);
  p.schedule.total_epochs = r.get<int>("total_epochs", epochs);
  p.schedule.granularity =
      r.parsed("schedule_granularity", to_string(p.schedule.granularity), parse_schedule_granularity);
  r.finish();
  with_path(path, [&] {
    p.ensemble.validate();
    p.schedule.validate();
  });
  return p;
}

DataSource data_from(const Json& j, const std::string& path) {
  Reader r(j, path);
  DataSource d;
  const std::string source = r.get<std::string>("source", "synthetic");
  if (source == "synthetic") {
    d.kind = DataSource::Kind::Synthetic;
    d.n_train = r.get<std::size_t>("n_train", d.n_train);
    d.n_val = r.get<std::size_t>("n_val", d.n_val);
    d.num_classes = r.get<std::size_t>("num_classes", d.num_classes);
    d.noise = r.get<double>("noise", d.noise);
    d.seed = r.get<std::uint64_t>("seed", d.seed);
    d.geometry.channels = r.get<std::size_t>("channels", d.geometry.channels);
    d.geometry.height = r.get<std::size_t>("height", d.geometry.height);
    d.geometry.width = r.get<std::size_t>("width", d.geometry.width);
    if (d.num_classes < 2) throw ConfigError(r.field("num_classes") + ": at least 2 classes required");
    if (d.n_train < d.num_classes) throw ConfigError(r.field("n_train") + ": must be at least num_classes");
    if (d.n_val < d.num_classes) throw ConfigError(r.field("n_val") + ": must be at least num_classes");
    if (!(d.noise >= 0.0)) throw ConfigError(r.field("noise") + ": must be non-negative");
    if (d.geometry.channels == 0 || d.geometry.height == 0 || d.geometry.width == 0) {
      throw ConfigError(path + ": image dimensions must be positive");
    }
  } else if (source == "idx") {
    d.kind = DataSource::Kind::Idx;
    d.train_images = r.require<std::string>("train_images");
    d.train_labels = r.require<std::string>("train_labels");
    d.val_images = r.require<std::string>("val_images");
    d.val_labels = r.require<std::string>("val_labels");
  } else {
    throw ConfigError(r.field("source") + ": expected synthetic or idx, got '" + source + "'");
  }
  r.finish();
  return d;
}

int scaled(int epochs, int at120) { return static_cast<int>(std::llround(epochs * at120 / 120.0)); }

}  // namespace

Json to_json(const ModelSpec& spec) {
  Json j{{"architecture", to_string(spec.architecture)},
         {"in_channels", spec.in_channels},
         {"in_height", spec.in_height},
         {"in_width", spec.in_width},
         {"widths", spec.widths},
         {"num_classes", spec.num_classes},
         {"dropout", spec.dropout_rate}};
  if (spec.slot.kind == ActivationSlot::Kind::Ensemble) {
    Json e = ensemble_json(spec.slot.ensemble);
    e["initial_alpha"] = spec.slot.initial_alpha;
    j["ensemble"] = e;
  } else {
    j["activation"] = spec.slot.activation.token();
  }
  return j;
}

Json to_json(const TrainConfig& c) {
  Json exclusions = Json::array();
  for (ParamGroup g : c.weight_decay_exclusions) exclusions.push_back(to_string(g));
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"base_lr", c.base_lr},
          {"lr_schedule",
           {{"kind", to_string(c.lr_schedule.kind)},
            {"boundaries", c.lr_schedule.boundaries},
            {"factor", c.lr_schedule.factor}}},
          {"warmup_epochs", c.warmup_epochs},
          {"momentum", c.momentum},
          {"weight_decay", c.weight_decay},
          {"weight_decay_exclusions", exclusions},
          {"label_smoothing", c.label_smoothing},
          {"seed", c.seed},
          {"augment", {{"crop_padding", c.augment.crop_padding}, {"flip_prob", c.augment.flip_prob}}}};
}

Json to_json(const PeaSetup& p) {
  Json j = ensemble_json(p.ensemble);
  j["init_end"] = p.schedule.init_end;
  j["trans_end"] = p.schedule.trans_end;
  j["schedule_granularity"] = to_string(p.schedule.granularity);
  return j;
}

Json to_json(const DataSource& d) {
  if (d.kind == DataSource::Kind::Idx) {
    return {{"source", "idx"},
            {"train_images", d.train_images.string()},
            {"train_labels", d.train_labels.string()},
            {"val_images", d.val_images.string()},
            {"val_labels", d.val_labels.string()}};
  }
  return {{"source", "synthetic"},      {"n_train", d.n_train},
          {"n_val", d.n_val},           {"num_classes", d.num_classes},
          {"noise", d.noise},           {"seed", d.seed},
          {"channels", d.geometry.channels}, {"height", d.geometry.height},
          {"width", d.geometry.width}};
}

Json to_json(const ExperimentConfig& cfg) {
  Json j{{"name", cfg.name}, {"model", to_json(cfg.model)}, {"train", to_json(cfg.train)}};
  if (cfg.train.pea) {
    // The pea section defines the slot; keeping it out of "model" lets
    // "pea": null in an override turn a preset back into a ReLU run.
    j["model"].erase("ensemble");
    j["model"]["activation"] = "relu";
  }
  j["pea"] = cfg.train.pea ? to_json(*cfg.train.pea) : Json(nullptr);
  j["data"] = to_json(cfg.data);
  j["output_dir"] = cfg.output_dir.string();
  return j;
}

Json to_json(const MetricsRecord& r) {
  return {{"run_id", r.run_id},
          {"epoch", r.epoch},
          {"alpha", r.alpha ? Json(*r.alpha) : Json(nullptr)},
          {"lr", r.lr},
          {"train_loss", r.train_loss},
          {"train_acc", r.train_acc},
          {"val_loss", r.val_loss},
          {"val_acc", r.val_acc},
          {"wall_time_s", r.wall_time_s}};
}

ModelSpec model_spec_from_json(const Json& j, const std::string& path) { return model_from(j, path, ModelSpec{}); }

TrainConfig train_config_from_json(const Json& j, const std::string& path) {
  TrainConfig c = train_from(j, path, TrainConfig{});
  return c;
}

PeaSetup pea_setup_from_json(const Json& j, int epochs, const std::string& path) {
  PeaSetup base;
  base.schedule.total_epochs = epochs;
  return pea_from(j, path, epochs, base);
}

DataSource data_source_from_json(const Json& j, const std::string& path) { return data_from(j, path); }

MetricsRecord metrics_record_from_json(const Json& j, const std::string& path) {
  Reader r(j, path);
  MetricsRecord m;
  m.run_id = r.get<std::string>("run_id", "");
  m.epoch = r.get<int>("epoch", 0);
  if (const Json* a = r.object("alpha")) m.alpha = convert<double>(*a, r.field("alpha"));
  m.lr = r.get<double>("lr", 0.0);
  m.train_loss = r.get<double>("train_loss", 0.0);
  m.train_acc = r.get<double>("train_acc", 0.0);
  m.val_loss = r.get<double>("val_loss", 0.0);
  m.val_acc = r.get<double>("val_acc", 0.0);
  m.wall_time_s = r.get<double>("wall_time_s", 0.0);
  r.finish();
  return m;
}

ExperimentConfig experiment_from_json(const Json& input) {
  if (!input.is_object()) throw ConfigError("config: expected a JSON object");
  Json doc = input;
  std::optional<ExperimentConfig> base;
  if (doc.contains("preset")) {
    const std::string name = convert<std::string>(doc["preset"], "preset");
    int epochs = 24;
    if (doc.contains("train") && doc["train"].is_object() && doc["train"].contains("epochs")) {
      epochs = convert<int>(doc["train"]["epochs"], "train.epochs");
    }
    with_path("preset", [&] { base = preset(name, epochs); });
    doc.erase("preset");
    Json merged = to_json(*base);
    merged.merge_patch(doc);
    doc = merged;
  } else {
    for (const char* key : {"model", "train", "data"}) {
      if (!doc.contains(key)) throw ConfigError(std::string(key) + ": required section missing");
    }
    if (!doc["model"].is_object() || !doc["model"].contains("architecture")) {
      throw ConfigError("model.architecture: required field missing");
    }
    if (!doc["train"].is_object()) throw ConfigError("train: expected an object");
    for (const char* key : {"epochs", "batch_size", "base_lr"}) {
      if (!doc["train"].contains(key)) throw ConfigError(std::string("train.") + key + ": required field missing");
    }
  }

  Reader r(doc, "config");
  ExperimentConfig cfg;
  cfg.name = r.get<std::string>("name", base ? base->name : "experiment");
  const Json* data = r.object("data");
  if (!data) throw ConfigError("data: required section missing");
  cfg.data = data_from(*data, "data");

  ModelSpec model_base;
  if (cfg.data.kind == DataSource::Kind::Synthetic) {
    model_base.in_channels = cfg.data.geometry.channels;
    model_base.in_height = cfg.data.geometry.height;
    model_base.in_width = cfg.data.geometry.width;
    model_base.num_classes = cfg.data.num_classes;
  }
  const Json* model = r.object("model");
  if (!model) throw ConfigError("model: required section missing");
  cfg.model = model_from(*model, "model", model_base);

  const Json* train = r.object("train");
  if (!train) throw ConfigError("train: required section missing");
  cfg.train = train_from(*train, "train", TrainConfig{});

  if (const Json* pea = r.object("pea")) {
    PeaSetup pbase;
    if (cfg.model.slot.kind == ActivationSlot::Kind::Plain) {
      throw ConfigError("model.activation: must be relu (or omitted) when pea is configured");
    }
    cfg.train.pea = pea_from(*pea, "pea", cfg.train.epochs, pbase);
    cfg.model.slot = ActivationSlot::ensemble_of(cfg.train.pea->ensemble, 0.0);
  } else if (cfg.model.slot.kind == ActivationSlot::Kind::Ensemble) {
    throw ConfigError("pea: required when model.ensemble is set");
  }
  cfg.output_dir = r.get<std::string>("output_dir", "");
  r.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  return experiment_from_json(j);
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names{"baseline-relu", "upper-limit-gelu", "upper-limit-swish", "upper-limit-mish",
                                 "upper-limit-elu"};
  for (char mode : {'w', 's'}) {
    for (char act : {'g', 's', 'm', 'e'}) {
      const std::string stem = std::string("pea-") + mode + act;
      names.push_back(stem);
      names.push_back(stem + "-90");
      names.push_back(stem + "-115");
    }
  }
  return names;
}

ExperimentConfig preset(const std::string& name, int epochs) {
  if (epochs < 1) throw ConfigError("preset epochs must be >= 1");
  ExperimentConfig c;
  c.name = name;
  c.model = default_model_spec(Architecture::SmallCNN, 1, 16, 16, 10);
  TrainConfig& t = c.train;
  t.epochs = epochs;
  t.batch_size = 64;
  t.base_lr = 0.1;
  t.warmup_epochs = scaled(epochs, 5);
  t.lr_schedule.kind = LrScheduleKind::PiecewiseConstant;
  t.lr_schedule.factor = 0.1;
  for (int at : {30, 60, 80}) {
    const int b = scaled(epochs, at);
    if (b > std::max(1, t.warmup_epochs)) t.lr_schedule.boundaries.push_back(b);
  }
  t.momentum = 0.9;
  t.weight_decay = 5e-4;
  t.weight_decay_exclusions = {ParamGroup::DepthwiseWeight};
  t.label_smoothing = 0.1;

  auto activation_for = [&](const std::string& code) -> ActivationKind {
    if (code == "g" || code == "gelu") return ActivationKind::gelu();
    if (code == "s" || code == "swish") return ActivationKind::swish(1.0);
    if (code == "m" || code == "mish") return ActivationKind::mish();
    if (code == "e" || code == "elu") return ActivationKind::elu(1.0);
    throw ConfigError("unknown preset '" + name + "'");
  };

  if (name == "baseline-relu") {
    c.model.slot = ActivationSlot::plain_relu();
  } else if (name.rfind("upper-limit-", 0) == 0) {
    c.model.slot = ActivationSlot::plain(activation_for(name.substr(12)));
  } else if (name.size() >= 6 && name.rfind("pea-", 0) == 0 && (name[4] == 'w' || name[4] == 's')) {
    const std::string suffix = name.substr(6);
    int trans_at = 115;
    if (suffix == "-90") {
      trans_at = 90;
    } else if (!suffix.empty() && suffix != "-115") {
      throw ConfigError("unknown preset '" + name + "'");
    }
    PeaSetup p;
    p.ensemble.mode = name[4] == 'w' ? EnsembleMode::Weighted : EnsembleMode::Stochastic;
    p.ensemble.sota = activation_for(std::string(1, name[5]));
    p.schedule.total_epochs = epochs;
    p.schedule.trans_end = std::max(1, scaled(epochs, trans_at));
    p.schedule.init_end = std::min(scaled(epochs, 5), p.schedule.trans_end - 1);
    t.pea = p;
    c.model.slot = ActivationSlot::ensemble_of(p.ensemble, 0.0);
  } else {
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown preset '" + name + "'; available: " + known);
  }
  return c;
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = to_json(cfg).dump();
  const uLong crc = crc32(0L, reinterpret_cast<const Bytef*>(text.data()), static_cast<uInt>(text.size()));
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc));
  return buf;
}

}  // namespace pea
