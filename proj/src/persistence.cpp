#include "pea/persistence.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <zlib.h>

#include "pea/errors.hpp"
#include "pea/kernels.hpp"

namespace pea {
namespace {

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void set_u64(std::vector<std::uint8_t>& out, std::size_t at, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

class Cursor {
 public:
  Cursor(std::span<const std::uint8_t> bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
  std::uint64_t u64() { return uint(8); }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw LoadError(what_ + " truncated at byte " + std::to_string(pos_));
    }
  }
  std::span<const std::uint8_t> bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

Section json_section(const std::string& name, const Json& j) {
  const std::string text = j.dump(1);
  return {name, std::vector<std::uint8_t>(text.begin(), text.end())};
}

Json parse_json_section(const Section& s) {
  try {
    return Json::parse(s.bytes.begin(), s.bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("section " + s.name + " holds invalid JSON: " + e.what());
  }
}

const Section& find_section(const std::vector<Section>& sections, const std::string& name) {
  for (const auto& s : sections) {
    if (s.name == name) return s;
  }
  throw ShapeError("file has no section '" + name + "'");
}

std::map<std::string, const Section*> index_sections(const std::vector<Section>& sections) {
  std::map<std::string, const Section*> out;
  for (const auto& s : sections) out[s.name] = &s;
  return out;
}

Tensor stored_tensor(const std::map<std::string, const Section*>& index, const std::string& key,
                     const Shape& expected) {
  auto it = index.find(key);
  if (it == index.end()) throw ShapeError("missing tensor '" + key + "'");
  Tensor t = decode_tensor(it->second->bytes, key);
  if (t.shape() != expected) {
    throw ShapeError("tensor '" + key + "' has shape " + to_string(t.shape()) + ", expected " + to_string(expected));
  }
  return t;
}

template <typename F>
auto as_load_error(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw LoadError(what + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(what + ": " + e.what());
  }
}

}  // namespace

std::vector<std::uint8_t> encode_container(std::string_view magic, const std::vector<Section>& sections) {
  if (magic.size() != 8) throw ContractError("container magic must be 8 bytes");
  std::vector<std::uint8_t> out(magic.begin(), magic.end());
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(sections.size()));
  std::vector<std::size_t> offset_slots;
  for (const auto& s : sections) {
    put_u32(out, static_cast<std::uint32_t>(s.name.size()));
    out.insert(out.end(), s.name.begin(), s.name.end());
    offset_slots.push_back(out.size());
    put_u64(out, 0);
    put_u64(out, s.bytes.size());
    put_u32(out, crc_of(s.bytes));
  }
  for (std::size_t i = 0; i < sections.size(); ++i) {
    set_u64(out, offset_slots[i], out.size());
    out.insert(out.end(), sections[i].bytes.begin(), sections[i].bytes.end());
  }
  return out;
}

std::vector<SectionInfo> container_table(std::span<const std::uint8_t> bytes, std::string_view magic,
                                         std::uint32_t* version) {
  Cursor c(bytes, "file");
  const auto head = c.take(8);
  if (!std::equal(head.begin(), head.end(), magic.begin())) throw LoadError("not a recognised file (bad magic)");
  const std::uint32_t v = c.u32();
  if (version) *version = v;
  if (v > kFormatVersion) {
    throw VersionError("format version " + std::to_string(v) + " is newer than supported version " +
                       std::to_string(kFormatVersion));
  }
  if (v == 0) throw VersionError("format version 0 is invalid");
  const std::uint32_t count = c.u32();
  std::vector<SectionInfo> table;
  for (std::uint32_t i = 0; i < count; ++i) {
    SectionInfo s;
    const std::uint32_t len = c.u32();
    const auto name = c.take(len);
    s.name.assign(name.begin(), name.end());
    s.offset = c.u64();
    s.length = c.u64();
    s.crc = c.u32();
    if (s.offset > bytes.size() || s.length > bytes.size() - s.offset) {
      throw LoadError("section '" + s.name + "' extends past end of file");
    }
    table.push_back(std::move(s));
  }
  return table;
}

std::vector<Section> decode_container(std::span<const std::uint8_t> bytes, std::string_view magic) {
  std::vector<Section> out;
  for (const SectionInfo& info : container_table(bytes, magic)) {
    auto payload = bytes.subspan(info.offset, info.length);
    if (crc_of(payload) != info.crc) throw ChecksumError("checksum mismatch in section '" + info.name + "'");
    out.push_back({info.name, std::vector<std::uint8_t>(payload.begin(), payload.end())});
  }
  return out;
}

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  std::vector<std::uint8_t> out;
  out.reserve(4 + 8 * t.rank() + 4 * t.size());
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) put_u64(out, d);
  for (float v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes, const std::string& name) {
  Cursor c(bytes, "tensor '" + name + "'");
  const std::uint32_t rank = c.u32();
  if (rank == 0 || rank > 8) throw LoadError("tensor '" + name + "' has invalid rank " + std::to_string(rank));
  Shape shape(rank);
  std::uint64_t count = 1;
  for (auto& d : shape) {
    d = c.u64();
    if (d == 0 || d > (1ull << 32)) throw LoadError("tensor '" + name + "' has an invalid dimension");
    count *= d;
  }
  if (c.remaining() != 4 * count) {
    throw LoadError("tensor '" + name + "' payload is " + std::to_string(c.remaining()) + " bytes, expected " +
                    std::to_string(4 * count));
  }
  std::vector<float> values(count);
  for (auto& v : values) v = std::bit_cast<float>(c.u32());
  return Tensor(shape, std::move(values));
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const TrainConfig& train,
                     const TrainerState& trainer) {
  Model& m = const_cast<Model&>(model);
  Json meta;
  meta["format_version"] = kFormatVersion;
  meta["model"] = to_json(model.spec());
  meta["seed"] = model.seed();
  meta["train"] = to_json(train);
  meta["pea"] = train.pea ? to_json(*train.pea) : Json(nullptr);
  if (train.pea) meta["pea"]["total_epochs"] = train.pea->schedule.total_epochs;
  meta["epoch"] = trainer.epochs_completed;
  Json ensembles = Json::array();
  for (const EnsembleActivation<float>* e : model.ensemble_layers()) {
    Json je{{"name", e->name()},
            {"mode", to_string(e->config().mode)},
            {"sota", e->config().sota.token()},
            {"granularity", to_string(e->config().granularity)},
            {"alpha", e->scheduled_alpha()}};
    je["override"] = e->alpha_override() ? Json(*e->alpha_override()) : Json(nullptr);
    ensembles.push_back(je);
  }
  meta["ensembles"] = ensembles;
  Json rng = Json::object();
  for (const auto& [name, stream] : m.random_streams()) rng[name] = stream->state();
  meta["rng"] = rng;
  meta["trainer_rng"] = {{"data", trainer.data_rng}, {"augment", trainer.augment_rng}};
  Json history = Json::array();
  for (const auto& r : trainer.history) history.push_back(to_json(r));
  meta["history"] = history;

  std::vector<Section> sections{json_section("meta", meta)};
  for (const Parameter<float>* p : model.parameters()) sections.push_back({"param/" + p->name, encode_tensor(p->value)});
  for (const Buffer<float>* b : model.buffers()) sections.push_back({"buffer/" + b->name, encode_tensor(b->value)});
  for (const auto& [name, v] : trainer.momentum) sections.push_back({"momentum/" + name, encode_tensor(v)});
  write_bytes_atomic(path, encode_container(kCheckpointMagic, sections));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  const auto sections = decode_container(bytes, kCheckpointMagic);
  const auto index = index_sections(sections);
  const Json meta = parse_json_section(find_section(sections, "meta"));

  return as_load_error("checkpoint metadata", [&] {
    const ModelSpec spec = model_spec_from_json(meta.at("model"), "meta.model");
    Model model = build<float>(spec, meta.at("seed").get<std::uint64_t>());
    TrainConfig train = train_config_from_json(meta.at("train"), "meta.train");
    if (!meta.at("pea").is_null()) {
      train.pea = pea_setup_from_json(meta.at("pea"), train.epochs, "meta.pea");
    }

    for (Parameter<float>* p : model.parameters()) {
      p->value = stored_tensor(index, "param/" + p->name, p->value.shape());
    }
    for (Buffer<float>* b : model.buffers()) b->value = stored_tensor(index, "buffer/" + b->name, b->value.shape());

    std::map<std::string, const Json*> ens;
    for (const Json& e : meta.at("ensembles")) ens[e.at("name").get<std::string>()] = &e;
    auto layers = model.ensemble_layers();
    if (ens.size() != layers.size()) throw ShapeError("checkpoint ensemble layers do not match the model spec");
    for (EnsembleActivation<float>* e : layers) {
      auto it = ens.find(e->name());
      if (it == ens.end()) throw ShapeError("checkpoint lacks ensemble layer '" + e->name() + "'");
      e->set_alpha(it->second->at("alpha").get<double>());
      const Json& o = it->second->at("override");
      e->set_alpha_override(o.is_null() ? std::nullopt : std::optional<double>(o.get<double>()));
    }
    const Json& rng = meta.at("rng");
    for (auto& [name, stream] : model.random_streams()) {
      if (!rng.contains(name)) throw ShapeError("checkpoint lacks RNG state for '" + name + "'");
      stream->set_state(rng.at(name).get<std::string>());
    }

    TrainerState state;
    state.epochs_completed = meta.at("epoch").get<int>();
    state.data_rng = meta.at("trainer_rng").at("data").get<std::string>();
    state.augment_rng = meta.at("trainer_rng").at("augment").get<std::string>();
    for (const Json& r : meta.at("history")) state.history.push_back(metrics_record_from_json(r, "meta.history"));
    for (const Parameter<float>* p : model.parameters()) {
      const std::string key = "momentum/" + p->name;
      if (index.count(key)) state.momentum[p->name] = stored_tensor(index, key, p->value.shape());
    }
    return Checkpoint{std::move(model), std::move(train), std::move(state)};
  });
}

CheckpointInfo inspect_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  CheckpointInfo info;
  info.sections = container_table(bytes, kCheckpointMagic, &info.version);
  const auto sections = decode_container(bytes, kCheckpointMagic);
  info.meta = parse_json_section(find_section(sections, "meta"));
  return info;
}

namespace {

class GraphWriter {
 public:
  int emit(const Layer<float>& layer, int input) {
    switch (layer.kind()) {
      case LayerKind::Sequential: {
        int cur = input;
        for (const auto& l : static_cast<const Sequential<float>&>(layer).layers()) cur = emit(*l, cur);
        return cur;
      }
      case LayerKind::Residual: {
        const auto& r = static_cast<const Residual<float>&>(layer);
        const int body = emit(r.body(), input);
        const int shortcut = emit(r.shortcut(), input);
        const int sum = node("Add", layer.name() + ".add", {body, shortcut}, Json::object());
        return emit(r.post(), sum);
      }
      case LayerKind::Dense: {
        const auto& d = static_cast<const Dense<float>&>(layer);
        add_tensor(d.weight().name, d.weight().value);
        add_tensor(d.bias().name, d.bias().value);
        return node("Dense", layer.name(), {input}, {{"weight", d.weight().name}, {"bias", d.bias().name}});
      }
      case LayerKind::Conv2d: {
        const auto& c = static_cast<const Conv2d<float>&>(layer);
        add_tensor(c.weight().name, c.weight().value);
        return node("Conv", layer.name(), {input},
                    {{"weight", c.weight().name},
                     {"stride", c.params().stride},
                     {"padding", c.params().padding},
                     {"groups", c.params().groups}});
      }
      case LayerKind::BatchNorm: {
        const auto& b = static_cast<const BatchNorm<float>&>(layer);
        auto [scale, shift] = b.folded();
        add_tensor(layer.name() + ".scale", scale);
        add_tensor(layer.name() + ".shift", shift);
        return node("BN", layer.name(), {input}, {{"scale", layer.name() + ".scale"}, {"shift", layer.name() + ".shift"}});
      }
      case LayerKind::Activation: {
        const auto& a = static_cast<const Activation<float>&>(layer);
        if (!a.activation().is_relu()) {
          throw ContractError("export supports ReLU networks only; layer '" + layer.name() + "' uses " +
                              a.activation().name());
        }
        return node("ReLU", layer.name(), {input}, Json::object());
      }
      case LayerKind::Ensemble:
        throw ContractError("ensemble layer '" + layer.name() + "' survived collapse");
      case LayerKind::MaxPool:
        return node("Pool", layer.name(), {input}, {{"op", "max2x2"}});
      case LayerKind::GlobalAvgPool:
        return node("Pool", layer.name(), {input}, {{"op", "global_avg"}});
      case LayerKind::Dropout:
        return input;
    }
    throw ContractError("unsupported layer kind in export");
  }

  int node(const std::string& kind, const std::string& name, std::vector<int> inputs, Json attrs) {
    const int id = static_cast<int>(nodes_.size());
    Json n{{"id", id}, {"kind", kind}, {"name", name}, {"inputs", inputs}};
    for (auto& [k, v] : attrs.items()) n[k] = v;
    nodes_.push_back(n);
    return id;
  }

  void add_tensor(const std::string& name, const Tensor& t) { tensors_[name] = t; }

  Json nodes_ = Json::array();
  std::map<std::string, Tensor> tensors_;
};

}  // namespace

ExportedModel::ExportedModel(Json graph, std::map<std::string, Tensor> tensors)
    : graph_(std::move(graph)), tensors_(std::move(tensors)) {
  as_load_error("model graph", [&] {
    if (graph_.at("format").get<std::string>() != "pea-model") throw LoadError("graph format is not pea-model");
    if (graph_.at("version").get<std::uint32_t>() > kFormatVersion) {
      throw VersionError("graph version is newer than supported");
    }
    channels_ = graph_.at("input").at("channels").get<std::size_t>();
    height_ = graph_.at("input").at("height").get<std::size_t>();
    width_ = graph_.at("input").at("width").get<std::size_t>();
    logits_node_ = graph_.at("logits").get<int>();
    output_node_ = graph_.at("output").get<int>();
    for (const Json& n : graph_.at("nodes")) {
      ExportNode node;
      node.id = n.at("id").get<int>();
      node.kind = n.at("kind").get<std::string>();
      node.name = n.at("name").get<std::string>();
      node.inputs = n.at("inputs").get<std::vector<int>>();
      node.attrs = n;
      if (node.id != static_cast<int>(nodes_.size())) throw LoadError("graph nodes are not numbered in order");
      for (int in : node.inputs) {
        if (in < -1 || in >= node.id) throw LoadError("graph node " + node.name + " has a dangling input");
      }
      nodes_.push_back(std::move(node));
    }
    const int last = static_cast<int>(nodes_.size()) - 1;
    if (logits_node_ < 0 || logits_node_ > last || output_node_ < 0 || output_node_ > last) {
      throw LoadError("graph output refers to a missing node");
    }
    return 0;
  });
}

const Tensor& ExportedModel::tensor(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw LoadError("exported model lacks tensor '" + name + "'");
  return it->second;
}

Tensor ExportedModel::run(const Tensor& x, int until) const {
  if (x.rank() != 4 || x.dim(1) != channels_ || x.dim(2) != height_ || x.dim(3) != width_) {
    throw DimensionError("exported model expects input [N, " + std::to_string(channels_) + ", " +
                         std::to_string(height_) + ", " + std::to_string(width_) + "], got " + to_string(x.shape()));
  }
  std::vector<Tensor> values(static_cast<std::size_t>(until) + 1);
  auto in = [&](const ExportNode& n, std::size_t i) -> const Tensor& {
    const int id = n.inputs.at(i);
    return id < 0 ? x : values[static_cast<std::size_t>(id)];
  };
  for (int id = 0; id <= until; ++id) {
    const ExportNode& n = nodes_[static_cast<std::size_t>(id)];
    Tensor& out = values[static_cast<std::size_t>(id)];
    if (n.kind == "Dense") {
      out = kernels::dense(in(n, 0), tensor(n.attrs.at("weight")), tensor(n.attrs.at("bias")));
    } else if (n.kind == "Conv") {
      kernels::ConvParams p;
      p.stride = n.attrs.at("stride").get<std::size_t>();
      p.padding = n.attrs.at("padding").get<std::size_t>();
      p.groups = n.attrs.at("groups").get<std::size_t>();
      out = kernels::conv2d(in(n, 0), tensor(n.attrs.at("weight")), p);
    } else if (n.kind == "BN") {
      out = kernels::channel_affine(in(n, 0), tensor(n.attrs.at("scale")), tensor(n.attrs.at("shift")));
    } else if (n.kind == "ReLU") {
      out = forward(ActivationKind::relu(), in(n, 0));
    } else if (n.kind == "Pool") {
      const std::string op = n.attrs.at("op");
      if (op == "max2x2") {
        out = kernels::max_pool2x2(in(n, 0));
      } else if (op == "global_avg") {
        out = kernels::global_avg_pool(in(n, 0));
      } else {
        throw LoadError("unknown pool op '" + op + "'");
      }
    } else if (n.kind == "Add") {
      out = kernels::add(in(n, 0), in(n, 1));
    } else if (n.kind == "Softmax") {
      out = kernels::softmax(in(n, 0));
    } else {
      throw LoadError("unknown node kind '" + n.kind + "'");
    }
  }
  return values.back();
}

Tensor ExportedModel::logits(const Tensor& x) const { return run(x, logits_node_); }
Tensor ExportedModel::probabilities(const Tensor& x) const { return run(x, output_node_); }

std::set<std::string> ExportedModel::node_kinds() const {
  std::set<std::string> kinds;
  for (const auto& n : nodes_) kinds.insert(n.kind);
  return kinds;
}

ExportedModel export_collapsed(const Model& model, const std::filesystem::path& path) {
  const Model collapsed = collapse_to_relu(model);
  GraphWriter w;
  const int logits = w.emit(collapsed.root(), -1);
  const int output = w.node("Softmax", "softmax", {logits}, Json::object());
  const ModelSpec& spec = collapsed.spec();
  Json graph{{"format", "pea-model"},
             {"version", kFormatVersion},
             {"architecture", to_string(spec.architecture)},
             {"input", {{"channels", spec.in_channels}, {"height", spec.in_height}, {"width", spec.in_width}}},
             {"num_classes", spec.num_classes},
             {"nodes", w.nodes_},
             {"logits", logits},
             {"output", output}};
  std::vector<Section> sections{json_section("graph", graph)};
  for (const auto& [name, t] : w.tensors_) sections.push_back({"tensor/" + name, encode_tensor(t)});
  write_bytes_atomic(path, encode_container(kExportMagic, sections));
  return ExportedModel(graph, w.tensors_);
}

ExportedModel load_exported(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  const auto sections = decode_container(bytes, kExportMagic);
  Json graph = parse_json_section(find_section(sections, "graph"));
  std::map<std::string, Tensor> tensors;
  for (const auto& s : sections) {
    if (s.name.rfind("tensor/", 0) == 0) tensors[s.name.substr(7)] = decode_tensor(s.bytes, s.name);
  }
  return ExportedModel(std::move(graph), std::move(tensors));
}

std::string metrics_csv_header() { return "run_id,epoch,alpha,lr,train_loss,train_acc,val_loss,val_acc,wall_time_s"; }

std::string metrics_csv_row(const MetricsRecord& r) {
  char buf[512];
  const std::string alpha = r.alpha ? [&] {
    char a[32];
    std::snprintf(a, sizeof a, "%.17g", *r.alpha);
    return std::string(a);
  }()
                                    : std::string();
  std::snprintf(buf, sizeof buf, "%d,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.6f", r.epoch, alpha.c_str(), r.lr,
                r.train_loss, r.train_acc, r.val_loss, r.val_acc, r.wall_time_s);
  return r.run_id + "," + buf;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRecord>& records) {
  std::string text = metrics_csv_header() + "\n";
  for (const auto& r : records) text += metrics_csv_row(r) + "\n";
  write_bytes_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != metrics_csv_header()) throw LoadError(path.string() + ": unexpected header");
  std::vector<MetricsRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 9) throw LoadError(path.string() + ":" + std::to_string(lineno) + ": expected 9 fields");
    try {
      MetricsRecord r;
      r.run_id = f[0];
      r.epoch = std::stoi(f[1]);
      if (!f[2].empty()) r.alpha = std::stod(f[2]);
      r.lr = std::stod(f[3]);
      r.train_loss = std::stod(f[4]);
      r.train_acc = std::stod(f[5]);
      r.val_loss = std::stod(f[6]);
      r.val_acc = std::stod(f[7]);
      r.wall_time_s = std::stod(f[8]);
      out.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw LoadError(path.string() + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  return out;
}

}  // namespace pea
