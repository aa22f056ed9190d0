#include "pea/model.hpp"

#include <cmath>

namespace pea {

std::string to_string(Architecture a) {
  switch (a) {
    case Architecture::MLP: return "mlp";
    case Architecture::SmallCNN: return "small_cnn";
    case Architecture::TinyResNet: return "tiny_resnet";
    case Architecture::TinyDepthwiseNet: return "tiny_depthwise";
  }
  return "?";
}

Architecture parse_architecture(const std::string& text) {
  for (Architecture a : {Architecture::MLP, Architecture::SmallCNN, Architecture::TinyResNet,
                         Architecture::TinyDepthwiseNet}) {
    if (to_string(a) == text) return a;
  }
  throw ConfigError("unknown architecture '" + text + "' (expected mlp, small_cnn, tiny_resnet or tiny_depthwise)");
}

ActivationSlot ActivationSlot::plain(ActivationKind kind) {
  ActivationSlot s;
  s.kind = kind.is_relu() ? Kind::PlainReLU : Kind::Plain;
  s.activation = kind;
  return s;
}

ActivationSlot ActivationSlot::ensemble_of(EnsembleConfig config, double initial_alpha) {
  ActivationSlot s;
  s.kind = Kind::Ensemble;
  s.ensemble = config;
  s.initial_alpha = initial_alpha;
  return s;
}

std::string ActivationSlot::describe() const {
  switch (kind) {
    case Kind::PlainReLU: return "relu";
    case Kind::Plain: return activation.token();
    case Kind::Ensemble: return "pea-" + to_string(ensemble.mode) + "(" + ensemble.sota.token() + ")";
  }
  return "?";
}

void ModelSpec::validate() const {
  if (in_channels == 0 || in_height == 0 || in_width == 0) throw ConfigError("model input dimensions must be positive");
  if (num_classes < 2) throw ConfigError("model needs at least 2 classes");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
  for (std::size_t w : widths) {
    if (w == 0) throw ConfigError("model widths must be positive");
  }
  switch (architecture) {
    case Architecture::MLP:
      if (widths.size() < 2) throw ConfigError("mlp widths need at least input and output entries");
      if (widths.front() != input_size()) {
        throw ConfigError("mlp first width " + std::to_string(widths.front()) + " does not match input size " +
                          std::to_string(input_size()));
      }
      if (widths.back() != num_classes) {
        throw ConfigError("mlp last width " + std::to_string(widths.back()) + " does not match num_classes " +
                          std::to_string(num_classes));
      }
      break;
    case Architecture::SmallCNN: {
      if (widths.empty()) throw ConfigError("small_cnn needs at least one block width");
      const std::size_t need = std::size_t{2} << (widths.size() - 1);
      if (in_height < need || in_width < need) {
        throw ConfigError("small_cnn with " + std::to_string(widths.size()) + " pooling blocks needs input at least " +
                          std::to_string(need) + "x" + std::to_string(need));
      }
      break;
    }
    case Architecture::TinyResNet:
      if (widths.empty()) throw ConfigError("tiny_resnet needs at least one stage width");
      break;
    case Architecture::TinyDepthwiseNet:
      if (widths.size() < 2) throw ConfigError("tiny_depthwise needs a stem width and at least one block width");
      break;
  }
  if (slot.kind == ActivationSlot::Kind::Ensemble) {
    slot.ensemble.validate();
    if (!(slot.initial_alpha >= 0.0 && slot.initial_alpha <= 1.0)) {
      throw ConfigError("initial alpha must lie in [0, 1]");
    }
  }
}

ModelSpec default_model_spec(Architecture a, std::size_t channels, std::size_t height, std::size_t width,
                             std::size_t num_classes) {
  ModelSpec s;
  s.architecture = a;
  s.in_channels = channels;
  s.in_height = height;
  s.in_width = width;
  s.num_classes = num_classes;
  switch (a) {
    case Architecture::MLP: s.widths = {channels * height * width, 128, num_classes}; break;
    case Architecture::SmallCNN: s.widths = {8, 16, 32}; break;
    case Architecture::TinyResNet: s.widths = {8, 16, 32}; break;
    case Architecture::TinyDepthwiseNet: s.widths = {8, 16, 16, 32, 32}; break;
  }
  return s;
}

template <typename T>
std::unique_ptr<Layer<T>> make_slot_layer(const ActivationSlot& slot, const std::string& name, std::uint64_t seed) {
  switch (slot.kind) {
    case ActivationSlot::Kind::PlainReLU:
      return std::make_unique<Activation<T>>(name, ActivationKind::relu());
    case ActivationSlot::Kind::Plain:
      return std::make_unique<Activation<T>>(name, slot.activation);
    case ActivationSlot::Kind::Ensemble:
      return std::make_unique<EnsembleActivation<T>>(name, slot.ensemble, slot.initial_alpha,
                                                     RandomStream(seed, stream_id(name)));
  }
  throw ConfigError("bad activation slot");
}

namespace {

template <typename T>
class Builder {
 public:
  Builder(const ModelSpec& spec, std::uint64_t seed) : spec_(spec), seed_(seed) {}

  std::unique_ptr<Sequential<T>> build() {
    auto root = std::make_unique<Sequential<T>>("model");
    switch (spec_.architecture) {
      case Architecture::MLP: mlp(*root); break;
      case Architecture::SmallCNN: small_cnn(*root); break;
      case Architecture::TinyResNet: tiny_resnet(*root); break;
      case Architecture::TinyDepthwiseNet: tiny_depthwise(*root); break;
    }
    return root;
  }

 private:
  std::unique_ptr<Layer<T>> act(const std::string& name) { return make_slot_layer<T>(spec_.slot, name, seed_); }

  std::unique_ptr<Layer<T>> dropout(const std::string& name) {
    return std::make_unique<Dropout<T>>(name, spec_.dropout_rate, RandomStream(seed_, stream_id(name)));
  }

  static std::unique_ptr<Layer<T>> conv(const std::string& name, std::size_t in, std::size_t out, std::size_t k,
                                        std::size_t stride, std::size_t groups = 1) {
    kernels::ConvParams p;
    p.stride = stride;
    p.padding = k / 2;
    p.groups = groups;
    return std::make_unique<Conv2d<T>>(name, in, out, k, p);
  }

  void head(Sequential<T>& seq, std::size_t channels) {
    seq.add(std::make_unique<GlobalAvgPool<T>>("gap"));
    seq.add(dropout("drop"));
    seq.add(std::make_unique<Dense<T>>("fc", channels, spec_.num_classes));
  }

  void mlp(Sequential<T>& seq) {
    const auto& w = spec_.widths;
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
      const std::string id = std::to_string(i);
      seq.add(std::make_unique<Dense<T>>("fc" + id, w[i], w[i + 1]));
      if (i + 2 < w.size()) {
        seq.add(act("act" + id));
        seq.add(dropout("drop" + id));
      }
    }
  }

  void small_cnn(Sequential<T>& seq) {
    std::size_t in = spec_.in_channels;
    for (std::size_t i = 0; i < spec_.widths.size(); ++i) {
      const std::string b = "block" + std::to_string(i);
      const std::size_t out = spec_.widths[i];
      seq.add(conv(b + ".conv", in, out, 3, 1));
      seq.add(std::make_unique<BatchNorm<T>>(b + ".bn", out));
      seq.add(act(b + ".act"));
      seq.add(std::make_unique<MaxPool2x2<T>>(b + ".pool"));
      in = out;
    }
    head(seq, in);
  }

  void tiny_resnet(Sequential<T>& seq) {
    const auto& w = spec_.widths;
    seq.add(conv("stem.conv", spec_.in_channels, w[0], 3, 1));
    seq.add(std::make_unique<BatchNorm<T>>("stem.bn", w[0]));
    seq.add(act("stem.act"));
    std::size_t in = w[0];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const std::string s = "stage" + std::to_string(i);
      const std::size_t out = w[i];
      const std::size_t stride = i == 0 ? 1 : 2;
      auto body = std::make_unique<Sequential<T>>(s + ".body");
      body->add(conv(s + ".conv1", in, out, 3, stride));
      body->add(std::make_unique<BatchNorm<T>>(s + ".bn1", out));
      body->add(act(s + ".act1"));
      body->add(conv(s + ".conv2", out, out, 3, 1));
      body->add(std::make_unique<BatchNorm<T>>(s + ".bn2", out));
      auto shortcut = std::make_unique<Sequential<T>>(s + ".shortcut");
      if (stride != 1 || in != out) {
        shortcut->add(conv(s + ".proj", in, out, 1, stride));
        shortcut->add(std::make_unique<BatchNorm<T>>(s + ".proj_bn", out));
      }
      seq.add(std::make_unique<Residual<T>>(s, std::move(body), std::move(shortcut), act(s + ".act2")));
      in = out;
    }
    head(seq, in);
  }

  void tiny_depthwise(Sequential<T>& seq) {
    const auto& w = spec_.widths;
    seq.add(conv("stem.conv", spec_.in_channels, w[0], 3, 1));
    seq.add(std::make_unique<BatchNorm<T>>("stem.bn", w[0]));
    seq.add(act("stem.act"));
    std::size_t in = w[0];
    for (std::size_t j = 1; j < w.size(); ++j) {
      const std::string b = "dw" + std::to_string(j - 1);
      const std::size_t out = w[j];
      const std::size_t stride = (j % 2 == 0) ? 2 : 1;
      seq.add(conv(b + ".depthwise", in, in, 3, stride, in));
      seq.add(std::make_unique<BatchNorm<T>>(b + ".bn1", in));
      seq.add(act(b + ".act1"));
      seq.add(conv(b + ".pointwise", in, out, 1, 1));
      seq.add(std::make_unique<BatchNorm<T>>(b + ".bn2", out));
      seq.add(act(b + ".act2"));
      in = out;
    }
    head(seq, in);
  }

  const ModelSpec& spec_;
  std::uint64_t seed_;
};

template <typename T>
void visit(Layer<T>& layer, std::vector<Layer<T>*>& out) {
  out.push_back(&layer);
  std::vector<std::unique_ptr<Layer<T>>*> children;
  layer.collect_children(children);
  for (auto* c : children) visit(**c, out);
}

template <typename T>
void replace_in(Layer<T>& layer, const typename BasicModel<T>::Replacer& fn) {
  std::vector<std::unique_ptr<Layer<T>>*> children;
  layer.collect_children(children);
  for (auto* c : children) {
    if (auto repl = fn(**c)) {
      *c = std::move(repl);
    } else {
      replace_in(**c, fn);
    }
  }
}

template <typename T>
std::unique_ptr<Sequential<T>> clone_root(const Sequential<T>& root) {
  return std::make_unique<Sequential<T>>(root);
}

}  // namespace

template <typename T>
BasicModel<T>::BasicModel(ModelSpec spec, std::uint64_t seed, std::unique_ptr<Sequential<T>> root)
    : spec_(std::move(spec)), seed_(seed), root_(std::move(root)) {}

template <typename T>
BasicModel<T>::BasicModel(const BasicModel& other)
    : spec_(other.spec_), seed_(other.seed_), root_(clone_root(*other.root_)) {}

template <typename T>
BasicModel<T>& BasicModel<T>::operator=(const BasicModel& other) {
  if (this != &other) {
    spec_ = other.spec_;
    seed_ = other.seed_;
    root_ = clone_root(*other.root_);
  }
  return *this;
}

template <typename T>
Var<T> BasicModel<T>::forward(Var<T> x, ForwardContext<T>& ctx) {
  const Shape& s = x.shape();
  const bool flat_ok = spec_.architecture == Architecture::MLP && s.size() == 2 && s[1] == spec_.input_size();
  const bool image_ok = s.size() == 4 && s[1] == spec_.in_channels && s[2] == spec_.in_height &&
                        s[3] == spec_.in_width;
  if (!flat_ok && !image_ok) {
    throw DimensionError("model expects input [N, " + std::to_string(spec_.in_channels) + ", " +
                         std::to_string(spec_.in_height) + ", " + std::to_string(spec_.in_width) + "], got " +
                         to_string(s));
  }
  return root_->forward(x, ctx);
}

template <typename T>
BasicTensor<T> BasicModel<T>::logits(const BasicTensor<T>& x, Mode mode) {
  Tape<T> tape(false);
  ForwardContext<T> ctx{tape, mode};
  return forward(tape.constant(x), ctx).value();
}

template <typename T>
std::vector<Layer<T>*> BasicModel<T>::layers() {
  std::vector<Layer<T>*> out;
  visit<T>(*root_, out);
  return out;
}

template <typename T>
std::vector<const Layer<T>*> BasicModel<T>::layers() const {
  auto all = const_cast<BasicModel*>(this)->layers();
  return {all.begin(), all.end()};
}

template <typename T>
std::vector<Parameter<T>*> BasicModel<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (Layer<T>* l : layers()) l->collect_parameters(out);
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> BasicModel<T>::parameters() const {
  auto all = const_cast<BasicModel*>(this)->parameters();
  return {all.begin(), all.end()};
}

template <typename T>
std::vector<Buffer<T>*> BasicModel<T>::buffers() {
  std::vector<Buffer<T>*> out;
  for (Layer<T>* l : layers()) l->collect_buffers(out);
  return out;
}

template <typename T>
std::vector<const Buffer<T>*> BasicModel<T>::buffers() const {
  auto all = const_cast<BasicModel*>(this)->buffers();
  return {all.begin(), all.end()};
}

template <typename T>
std::vector<EnsembleActivation<T>*> BasicModel<T>::ensemble_layers() {
  std::vector<EnsembleActivation<T>*> out;
  for (Layer<T>* l : layers()) {
    if (l->kind() == LayerKind::Ensemble) out.push_back(static_cast<EnsembleActivation<T>*>(l));
  }
  return out;
}

template <typename T>
std::vector<const EnsembleActivation<T>*> BasicModel<T>::ensemble_layers() const {
  auto all = const_cast<BasicModel*>(this)->ensemble_layers();
  return {all.begin(), all.end()};
}

template <typename T>
std::vector<std::pair<std::string, RandomStream*>> BasicModel<T>::random_streams() {
  std::vector<std::pair<std::string, RandomStream*>> out;
  for (Layer<T>* l : layers()) {
    if (RandomStream* r = l->random_stream()) out.emplace_back(l->name(), r);
  }
  return out;
}

template <typename T>
std::size_t BasicModel<T>::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter<T>* p : parameters()) n += p->value.size();
  return n;
}

template <typename T>
void BasicModel<T>::set_alpha(double alpha) {
  for (EnsembleActivation<T>* e : ensemble_layers()) e->set_alpha(alpha);
}

template <typename T>
void BasicModel<T>::replace_slots(const Replacer& fn) {
  replace_in<T>(*root_, fn);
}

template <typename T>
BasicModel<T> build(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  BasicModel<T> model(spec, seed, Builder<T>(spec, seed).build());
  RandomStream init(seed, stream_id("init"));
  for (Parameter<T>* p : model.parameters()) {
    if (p->group != ParamGroup::Weight && p->group != ParamGroup::DepthwiseWeight) continue;
    const Shape& s = p->value.shape();
    const std::size_t fan_in = s.size() == 2 ? s[0] : s[1] * s[2] * s[3];
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (T& v : p->value.data()) v = static_cast<T>(stddev * init.normal());
  }
  return model;
}

template <typename T>
void swap_activation(BasicModel<T>& model, const ActivationSlot& slot) {
  ModelSpec spec = model.spec();
  spec.slot = slot;
  spec.validate();
  const std::uint64_t seed = model.seed();
  model.replace_slots([&](const Layer<T>& old) -> std::unique_ptr<Layer<T>> {
    if (!old.is_activation_slot()) return nullptr;
    return make_slot_layer<T>(slot, old.name(), seed);
  });
  model.set_spec(spec);
}

template <typename U, typename T>
BasicModel<U> convert(const BasicModel<T>& model) {
  BasicModel<U> out = build<U>(model.spec(), model.seed());
  auto src_p = model.parameters();
  auto dst_p = out.parameters();
  for (std::size_t i = 0; i < src_p.size(); ++i) dst_p[i]->value = src_p[i]->value.template cast<U>();
  auto src_b = model.buffers();
  auto dst_b = out.buffers();
  for (std::size_t i = 0; i < src_b.size(); ++i) dst_b[i]->value = src_b[i]->value.template cast<U>();
  auto src_e = model.ensemble_layers();
  auto dst_e = out.ensemble_layers();
  for (std::size_t i = 0; i < src_e.size(); ++i) {
    dst_e[i]->set_alpha(src_e[i]->scheduled_alpha());
    dst_e[i]->set_alpha_override(src_e[i]->alpha_override());
  }
  auto src_r = const_cast<BasicModel<T>&>(model).random_streams();
  auto dst_r = out.random_streams();
  for (std::size_t i = 0; i < src_r.size(); ++i) *dst_r[i].second = *src_r[i].second;
  return out;
}

template class BasicModel<float>;
template class BasicModel<double>;
template BasicModel<float> build(const ModelSpec&, std::uint64_t);
template BasicModel<double> build(const ModelSpec&, std::uint64_t);
template std::unique_ptr<Layer<float>> make_slot_layer(const ActivationSlot&, const std::string&, std::uint64_t);
template std::unique_ptr<Layer<double>> make_slot_layer(const ActivationSlot&, const std::string&, std::uint64_t);
template void swap_activation(BasicModel<float>&, const ActivationSlot&);
template void swap_activation(BasicModel<double>&, const ActivationSlot&);
template BasicModel<double> convert<double, float>(const BasicModel<float>&);
template BasicModel<float> convert<float, double>(const BasicModel<double>&);
template BasicModel<float> convert<float, float>(const BasicModel<float>&);
template BasicModel<double> convert<double, double>(const BasicModel<double>&);

}  // namespace pea
