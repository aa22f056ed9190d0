#include "pea/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "pea/errors.hpp"

namespace pea {
namespace {

bool near_kink(const ActivationKind& kind, double x, double margin) {
  switch (kind.tag()) {
    case ActivationTag::ReLU:
    case ActivationTag::ELU:
      return std::abs(x) < margin;
    case ActivationTag::ReLU6:
      return std::abs(x) < margin || std::abs(x - 6.0) < margin;
    default:
      return false;
  }
}

Tensor64 kink_free_inputs(const ActivationKind& kind, std::size_t n, double lo, double hi, double margin,
                          RandomStream& rng) {
  Tensor64 x({n}, 0.0);
  for (double& v : x.data()) {
    do {
      v = lo + (hi - lo) * rng.uniform();
    } while (near_kink(kind, v, margin) || near_kink(ActivationKind::relu(), v, margin));
  }
  return x;
}

void record(GradCheckResult& r, double analytic, double numeric, bool agree) {
  const double abs_err = std::abs(analytic - numeric);
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  r.max_abs_err = std::max(r.max_abs_err, abs_err);
  if (scale > 0.0) r.max_rel_err = std::max(r.max_rel_err, abs_err / scale);
  ++r.checked;
  if (!agree) ++r.failures;
}

/// Checks d(loss)/dx of loss = Σ w ⊙ layer(x) for an elementwise layer.
GradCheckResult check_elementwise(const std::string& name, const Tensor64& x, const GradCheckOptions& opts,
                                  RandomStream& rng, const std::function<Var<double>(Var<double>)>& layer,
                                  const std::function<void()>& reset) {
  Tensor64 w(x.shape(), 0.0);
  for (double& v : w.data()) v = rng.normal();

  auto loss_at = [&](const Tensor64& input) {
    reset();
    Tape<double> tape(false);
    return ops::sum(ops::mul(layer(tape.constant(input)), tape.constant(w))).value()[0];
  };

  reset();
  Tape<double> tape(true);
  Var<double> xv = tape.variable(x);
  const Var<double> loss = ops::sum(ops::mul(layer(xv), tape.constant(w)));
  tape.backward(loss);
  const Tensor64 g = tape.grad(xv);

  GradCheckResult r{name};
  for (std::size_t i = 0; i < x.size(); ++i) {
    Tensor64 plus = x, minus = x;
    plus[i] += opts.step;
    minus[i] -= opts.step;
    const double numeric = (loss_at(plus) - loss_at(minus)) / (2.0 * opts.step);
    const double analytic = g[i] * opts.fault_scale;
    record(r, analytic, numeric, gradients_agree(analytic, numeric, opts));
  }
  return r;
}

ModelSpec small_spec(Architecture arch, const ActivationSlot& slot) {
  ModelSpec s;
  s.architecture = arch;
  s.in_channels = 2;
  s.in_height = 6;
  s.in_width = 6;
  s.num_classes = 3;
  s.dropout_rate = 0.25;
  s.slot = slot;
  switch (arch) {
    case Architecture::MLP: s.widths = {72, 6, 5, 3}; break;
    case Architecture::SmallCNN: s.widths = {3, 4}; break;
    case Architecture::TinyResNet: s.widths = {3, 4}; break;
    case Architecture::TinyDepthwiseNet: s.widths = {3, 4, 4}; break;
  }
  return s;
}

std::string slot_label(const ActivationSlot& slot) {
  std::string s = slot.describe();
  if (slot.kind == ActivationSlot::Kind::Ensemble) {
    char buf[32];
    std::snprintf(buf, sizeof buf, " alpha=%g", slot.initial_alpha);
    s += buf;
  }
  return s;
}

}  // namespace

bool gradients_agree(double analytic, double numeric, const GradCheckOptions& opts) {
  if (!std::isfinite(analytic) || !std::isfinite(numeric)) return false;
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  return std::abs(analytic - numeric) <= std::max(opts.abs_tol, opts.rel_tol * scale);
}

GradCheckResult check_activation(const ActivationKind& kind, const GradCheckOptions& opts) {
  RandomStream rng(opts.seed, stream_id("gradcheck.activation." + kind.token()));
  const Tensor64 x = kink_free_inputs(kind, 96, -8.0, 8.0, 10.0 * opts.step, rng);
  return check_elementwise(
      "activation " + kind.token(), x, opts, rng, [&](Var<double> v) { return ops::activation(v, kind); }, [] {});
}

GradCheckResult check_ensemble(const EnsembleConfig& config, double alpha, const GradCheckOptions& opts) {
  char label[128];
  std::snprintf(label, sizeof label, "ensemble %s(%s) alpha=%g", to_string(config.mode).c_str(),
                config.sota.token().c_str(), alpha);
  RandomStream rng(opts.seed, stream_id(label));
  const Tensor64 x = kink_free_inputs(config.sota, 96, -6.0, 6.0, 10.0 * opts.step, rng);
  EnsembleActivation<double> layer("gradcheck", config, alpha, RandomStream(opts.seed, stream_id("gradcheck.mask")));
  const std::string start = layer.random_stream() ? layer.random_stream()->state() : std::string();
  return check_elementwise(
      label, x, opts, rng,
      [&](Var<double> v) {
        ForwardContext<double> ctx{v.tape(), Mode::Train};
        return layer.forward(v, ctx);
      },
      [&] {
        if (layer.random_stream()) layer.random_stream()->set_state(start);
      });
}

GradCheckResult check_architecture(Architecture arch, const ActivationSlot& slot, const GradCheckOptions& opts) {
  const ModelSpec spec = small_spec(arch, slot);
  Model64 model = build<double>(spec, opts.seed + 17);
  const std::string name = "model " + to_string(arch) + " [" + slot_label(slot) + "]";
  RandomStream rng(opts.seed, stream_id(name));

  const std::size_t batch = 4;
  Tensor64 x({batch, spec.in_channels, spec.in_height, spec.in_width}, 0.0);
  for (double& v : x.data()) v = rng.normal();
  std::vector<int> labels(batch);
  for (int& l : labels) l = static_cast<int>(rng.below(spec.num_classes));
  const double smoothing = 0.1;

  std::vector<std::pair<RandomStream*, std::string>> streams;
  for (auto& [n, s] : model.random_streams()) streams.emplace_back(s, s->state());
  auto reset = [&] {
    for (auto& [s, state] : streams) s->set_state(state);
  };
  auto loss_at = [&](const Tensor64& input) {
    reset();
    Tape<double> tape(false);
    ForwardContext<double> ctx{tape, Mode::Train};
    const Tensor64 z = model.forward(tape.constant(input), ctx).value();
    return label_smoothed_cross_entropy(z, labels, smoothing);
  };

  reset();
  Tape<double> tape(true);
  ForwardContext<double> ctx{tape, Mode::Train};
  Var<double> xv = tape.variable(x);
  const Var<double> loss = ops::softmax_cross_entropy(model.forward(xv, ctx), labels, smoothing);
  const GradientMap<double> grads = tape.backward(loss);
  const Tensor64 gx = tape.grad(xv);

  GradCheckResult r{name};
  // Central difference of the loss along one coordinate of `value`.
  auto measure = [&](double& value, const Tensor64& input, double analytic) {
    const double saved = value;
    bool agree = false;
    double numeric = 0.0;
    for (double h = opts.step; h >= opts.step / 100.0 && !agree; h /= 10.0) {
      value = saved + h;
      const double up = loss_at(input);
      value = saved - h;
      const double down = loss_at(input);
      value = saved;
      const double n = (up - down) / (2.0 * h);
      if (h == opts.step) numeric = n;
      if (gradients_agree(analytic, n, opts)) {
        agree = true;
        numeric = n;
      }
    }
    record(r, analytic, numeric, agree);
  };

  auto pick = [&](std::size_t n) {
    std::vector<std::size_t> idx = rng.permutation(n);
    idx.resize(std::min(n, opts.max_coords));
    return idx;
  };

  for (Parameter<double>* p : model.parameters()) {
    auto it = grads.find(p->name);
    if (it == grads.end()) throw StateError("no gradient recorded for parameter " + p->name);
    for (std::size_t i : pick(p->value.size())) {
      measure(p->value[i], x, it->second[i] * opts.fault_scale);
    }
  }
  Tensor64 input = x;
  for (std::size_t i : pick(input.size())) measure(input[i], input, gx[i] * opts.fault_scale);
  return r;
}

std::vector<GradCheckResult> run_grad_suite(const GradSuiteFilter& filter, const GradCheckOptions& opts) {
  std::vector<ActivationKind> kinds{ActivationKind::relu(), ActivationKind::relu6(), ActivationKind::gelu(),
                                    ActivationKind::swish(1.0), ActivationKind::silu(), ActivationKind::mish(),
                                    ActivationKind::elu(1.0)};
  if (filter.activation) {
    std::erase_if(kinds, [&](const ActivationKind& k) { return k.tag() != *filter.activation; });
  }
  const std::vector<ActivationKind> sotas = [&] {
    std::vector<ActivationKind> s;
    for (const auto& k : kinds) {
      if (!k.is_relu() && k.tag() != ActivationTag::ReLU6 && k.tag() != ActivationTag::SiLU) s.push_back(k);
    }
    return s;
  }();

  std::vector<GradCheckResult> out;
  if (!filter.architecture) {
    for (const auto& k : kinds) out.push_back(check_activation(k, opts));
    for (const auto& k : sotas) {
      for (EnsembleMode mode : {EnsembleMode::Weighted, EnsembleMode::Stochastic}) {
        for (double alpha : {0.1, 0.5, 0.9}) out.push_back(check_ensemble({mode, k}, alpha, opts));
      }
    }
  }

  std::vector<ActivationSlot> slots;
  for (const auto& k : kinds) {
    if (k.is_relu() || k.tag() == ActivationTag::GELU || filter.activation) slots.push_back(ActivationSlot::plain(k));
  }
  const std::vector<ActivationKind> ensemble_partners =
      filter.activation ? sotas : std::vector<ActivationKind>{ActivationKind::gelu()};
  for (const auto& k : ensemble_partners) {
    for (EnsembleMode mode : {EnsembleMode::Weighted, EnsembleMode::Stochastic}) {
      slots.push_back(ActivationSlot::ensemble_of({mode, k}, 0.5));
    }
  }
  for (Architecture arch : {Architecture::MLP, Architecture::SmallCNN, Architecture::TinyResNet,
                            Architecture::TinyDepthwiseNet}) {
    if (filter.architecture && arch != *filter.architecture) continue;
    for (const auto& slot : slots) out.push_back(check_architecture(arch, slot, opts));
  }
  return out;
}

}  // namespace pea
