#include "pea/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace pea {

std::string to_string(ParamGroup group) {
  switch (group) {
    case ParamGroup::Weight: return "weight";
    case ParamGroup::DepthwiseWeight: return "depthwise";
    case ParamGroup::Bias: return "bias";
    case ParamGroup::BatchNormScale: return "bn_scale";
    case ParamGroup::BatchNormShift: return "bn_shift";
  }
  return "?";
}

ParamGroup parse_param_group(std::string_view text) {
  for (auto g : {ParamGroup::Weight, ParamGroup::DepthwiseWeight, ParamGroup::Bias,
                 ParamGroup::BatchNormScale, ParamGroup::BatchNormShift}) {
    if (to_string(g) == text) return g;
  }
  throw ConfigError("unknown parameter group '" + std::string(text) + "'");
}

template <typename T>
Var<T> Tape<T>::add_leaf(BasicTensor<T> value, bool requires_grad, const Parameter<T>* param) {
  if (backward_done_) throw StateError("tape already differentiated; build a new tape per step");
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad && record_;
  n.param = param;
  n.retain = requires_grad && param == nullptr;
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::constant(BasicTensor<T> value) {
  return add_leaf(std::move(value), false, nullptr);
}

template <typename T>
Var<T> Tape<T>::variable(BasicTensor<T> value) {
  return add_leaf(std::move(value), true, nullptr);
}

template <typename T>
Var<T> Tape<T>::parameter(const Parameter<T>& p) {
  return add_leaf(p.value, true, &p);
}

template <typename T>
Var<T> Tape<T>::push(BasicTensor<T> value, std::initializer_list<Var<T>> inputs, Backward backward) {
  if (backward_done_) throw StateError("tape already differentiated; build a new tape per step");
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (const Var<T>& v : inputs) {
      if (v.valid() && &v.tape() != this) throw StateError("op mixes variables from different tapes");
      n.requires_grad = n.requires_grad || nodes_.at(v.id()).requires_grad;
    }
    if (n.requires_grad) n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
void Tape<T>::accumulate(Var<T> v, const BasicTensor<T>& g) {
  Node& n = nodes_.at(v.id());
  if (!n.requires_grad) return;
  if (g.shape() != n.value.shape()) {
    throw DimensionError("gradient shape " + to_string(g.shape()) + " does not match value " +
                         to_string(n.value.shape()));
  }
  if (!n.grad.defined()) {
    n.grad = g;
    return;
  }
  for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
}

template <typename T>
GradientMap<T> Tape<T>::backward(Var<T> loss) {
  if (nodes_.empty()) throw StateError("backward requested before any forward pass was recorded");
  if (!record_) throw StateError("backward requested on a non-recording (inference) tape");
  if (backward_done_) throw StateError("backward already ran on this tape");
  if (!loss.valid() || &loss.tape() != this || loss.id() >= nodes_.size()) {
    throw StateError("loss variable does not belong to this tape");
  }
  if (nodes_[loss.id()].value.size() != 1) {
    throw DimensionError("backward expects a single-element loss, got " +
                         to_string(nodes_[loss.id()].value.shape()));
  }
  backward_done_ = true;
  GradientMap<T> grads;
  if (!nodes_[loss.id()].requires_grad) return grads;
  nodes_[loss.id()].grad = BasicTensor<T>(nodes_[loss.id()].value.shape(), T{1});
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.grad.defined()) continue;
    if (n.backward) {
      BasicTensor<T> g = std::move(n.grad);
      n.backward(*this, g);
      n.backward = nullptr;
      if (n.retain) n.grad = std::move(g);
    } else if (n.param) {
      auto it = grads.find(n.param->name);
      if (it == grads.end()) {
        grads.emplace(n.param->name, std::move(n.grad));
      } else {
        for (std::size_t k = 0; k < n.grad.size(); ++k) it->second[k] += n.grad[k];
      }
      n.grad = BasicTensor<T>();
    }
  }
  return grads;
}

template <typename T>
BasicTensor<T> Tape<T>::grad(Var<T> v) const {
  if (!backward_done_) throw StateError("gradient requested before backward()");
  const Node& n = nodes_.at(v.id());
  if (!n.retain) throw StateError("gradient is only retained for variable() leaves");
  // Not on any path to the loss: gradient is zero.
  if (!n.grad.defined()) return BasicTensor<T>(n.value.shape());
  return n.grad;
}

template class Tape<float>;
template class Tape<double>;

template <typename T>
BasicTensor<T> weighted_ensemble_values(const BasicTensor<T>& x, const ActivationKind& sota, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ContractError("ensemble alpha must lie in [0, 1], got " + std::to_string(alpha));
  }
  if (alpha == 1.0) return forward(ActivationKind::relu(), x);
  if (alpha == 0.0) return forward(sota, x);
  BasicTensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    y[i] = static_cast<T>(alpha * activate(ActivationKind::relu(), v) + (1.0 - alpha) * activate(sota, v));
  }
  return y;
}

template <typename T>
double label_smoothed_cross_entropy(const BasicTensor<T>& logits, std::span<const int> labels,
                                    double smoothing, BasicTensor<T>* grad) {
  if (logits.rank() != 2) {
    throw DimensionError("cross-entropy expects [N x C] logits, got " + to_string(logits.shape()));
  }
  const std::size_t N = logits.dim(0), C = logits.dim(1);
  if (labels.size() != N) {
    throw DimensionError("cross-entropy got " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(N) + " rows");
  }
  if (!(smoothing >= 0.0 && smoothing < 1.0)) {
    throw ContractError("label smoothing must lie in [0, 1), got " + std::to_string(smoothing));
  }
  const double off = smoothing / static_cast<double>(C);
  const double on = 1.0 - smoothing + off;
  if (grad) *grad = BasicTensor<T>(logits.shape());
  double total = 0.0;
  std::vector<double> p(C);
  for (std::size_t i = 0; i < N; ++i) {
    const int label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= C) {
      throw ContractError("label " + std::to_string(label) + " outside [0, " + std::to_string(C) + ")");
    }
    const T* row = logits.data().data() + i * C;
    double m = row[0];
    for (std::size_t c = 1; c < C; ++c) m = std::max(m, static_cast<double>(row[c]));
    double z = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      p[c] = std::exp(static_cast<double>(row[c]) - m);
      z += p[c];
    }
    const double lse = m + std::log(z);
    double dot = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      const double q = (static_cast<std::size_t>(label) == c) ? on : off;
      dot += q * static_cast<double>(row[c]);
      if (grad) (*grad)[i * C + c] = static_cast<T>((p[c] / z - q) / static_cast<double>(N));
    }
    total += lse - dot;
  }
  return total / static_cast<double>(N);
}

namespace ops {
namespace {

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + " operands differ in shape: " + to_string(a.shape()) +
                         " and " + to_string(b.shape()));
  }
}

}  // namespace

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  require_same_shape(a, b, "add");
  return a.tape().push(kernels::add(a.value(), b.value()), {a, b},
                       [a, b](Tape<T>& t, const BasicTensor<T>& g) {
                         t.accumulate(a, g);
                         t.accumulate(b, g);
                       });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  require_same_shape(a, b, "mul");
  BasicTensor<T> y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b.value()[i];
  return a.tape().push(std::move(y), {a, b}, [a, b](Tape<T>& t, const BasicTensor<T>& g) {
    if (t.requires_grad(a)) {
      BasicTensor<T> ga = g;
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= b.value()[i];
      t.accumulate(a, ga);
    }
    if (t.requires_grad(b)) {
      BasicTensor<T> gb = g;
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] *= a.value()[i];
      t.accumulate(b, gb);
    }
  });
}

template <typename T>
Var<T> sum(Var<T> a) {
  double acc = 0.0;
  for (T v : a.value().data()) acc += v;
  return a.tape().push(BasicTensor<T>::scalar(static_cast<T>(acc)), {a},
                       [a](Tape<T>& t, const BasicTensor<T>& g) {
                         t.accumulate(a, BasicTensor<T>(a.shape(), g[0]));
                       });
}

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  return a.tape().push(kernels::matmul(a.value(), b.value()), {a, b},
                       [a, b](Tape<T>& t, const BasicTensor<T>& g) {
                         if (t.requires_grad(a)) t.accumulate(a, kernels::matmul_a_bt(g, b.value()));
                         if (t.requires_grad(b)) t.accumulate(b, kernels::matmul_at_b(a.value(), g));
                       });
}

template <typename T>
Var<T> add_bias(Var<T> x, Var<T> bias) {
  return x.tape().push(kernels::add_channel_bias(x.value(), bias.value()), {x, bias},
                       [x, bias](Tape<T>& t, const BasicTensor<T>& g) {
                         t.accumulate(x, g);
                         if (t.requires_grad(bias)) {
                           const std::size_t N = g.dim(0), C = g.dim(1), S = g.size() / (N * C);
                           std::vector<double> acc(C, 0.0);
                           for (std::size_t n = 0; n < N; ++n)
                             for (std::size_t c = 0; c < C; ++c)
                               for (std::size_t s = 0; s < S; ++s) acc[c] += g[(n * C + c) * S + s];
                           BasicTensor<T> gb({C});
                           for (std::size_t c = 0; c < C; ++c) gb[c] = static_cast<T>(acc[c]);
                           t.accumulate(bias, gb);
                         }
                       });
}

template <typename T>
Var<T> dense(Var<T> x, Var<T> w, Var<T> b) {
  return x.tape().push(kernels::dense(x.value(), w.value(), b.value()), {x, w, b},
                       [x, w, b](Tape<T>& t, const BasicTensor<T>& g) {
                         const std::size_t N = x.shape()[0];
                         const std::size_t K = x.value().size() / N;
                         if (t.requires_grad(x)) {
                           t.accumulate(x, kernels::matmul_a_bt(g, w.value()).reshaped(x.shape()));
                         }
                         if (t.requires_grad(w)) {
                           t.accumulate(w, kernels::matmul_at_b(x.value().reshaped({N, K}), g));
                         }
                         if (t.requires_grad(b)) {
                           const std::size_t F = g.dim(1);
                           std::vector<double> acc(F, 0.0);
                           for (std::size_t n = 0; n < N; ++n)
                             for (std::size_t f = 0; f < F; ++f) acc[f] += g[n * F + f];
                           BasicTensor<T> gb({F});
                           for (std::size_t f = 0; f < F; ++f) gb[f] = static_cast<T>(acc[f]);
                           t.accumulate(b, gb);
                         }
                       });
}

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> w, const kernels::ConvParams& p) {
  return x.tape().push(kernels::conv2d(x.value(), w.value(), p), {x, w},
                       [x, w, p](Tape<T>& t, const BasicTensor<T>& g) {
                         BasicTensor<T> gx, gw;
                         kernels::conv2d_backward(x.value(), w.value(), g, p,
                                                  t.requires_grad(x) ? &gx : nullptr,
                                                  t.requires_grad(w) ? &gw : nullptr);
                         if (gx.defined()) t.accumulate(x, gx);
                         if (gw.defined()) t.accumulate(w, gw);
                       });
}

template <typename T>
Var<T> max_pool2x2(Var<T> x) {
  auto argmax = std::make_shared<std::vector<std::uint32_t>>();
  BasicTensor<T> y = kernels::max_pool2x2(x.value(), argmax.get());
  return x.tape().push(std::move(y), {x}, [x, argmax](Tape<T>& t, const BasicTensor<T>& g) {
    BasicTensor<T> gx(x.shape());
    for (std::size_t o = 0; o < g.size(); ++o) gx[(*argmax)[o]] += g[o];
    t.accumulate(x, gx);
  });
}

template <typename T>
Var<T> global_avg_pool(Var<T> x) {
  return x.tape().push(kernels::global_avg_pool(x.value()), {x}, [x](Tape<T>& t, const BasicTensor<T>& g) {
    const Shape& s = x.shape();
    const std::size_t S = s[2] * s[3];
    BasicTensor<T> gx(s);
    for (std::size_t nc = 0; nc < g.size(); ++nc) {
      const T v = static_cast<T>(static_cast<double>(g[nc]) / static_cast<double>(S));
      for (std::size_t k = 0; k < S; ++k) gx[nc * S + k] = v;
    }
    t.accumulate(x, gx);
  });
}

template <typename T>
Var<T> flatten(Var<T> x) {
  const std::size_t N = x.shape()[0];
  return x.tape().push(x.value().reshaped({N, x.value().size() / N}), {x},
                       [x](Tape<T>& t, const BasicTensor<T>& g) { t.accumulate(x, g.reshaped(x.shape())); });
}

template <typename T>
Var<T> batch_norm_train(Var<T> x, Var<T> gamma, Var<T> beta, double eps, BatchStats<T>* stats) {
  const BasicTensor<T>& xv = x.value();
  if (xv.rank() != 2 && xv.rank() != 4) {
    throw DimensionError("batch norm expects rank-2 or rank-4 input, got " + to_string(xv.shape()));
  }
  const std::size_t N = xv.dim(0), C = xv.dim(1), S = xv.size() / (N * C);
  if (gamma.value().size() != C || beta.value().size() != C) {
    throw DimensionError("batch norm parameters do not match " + std::to_string(C) + " channels");
  }
  const std::size_t M = N * S;
  auto xhat = std::make_shared<BasicTensor<T>>(xv.shape());
  auto inv_std = std::make_shared<std::vector<double>>(C);
  BasicTensor<T> y(xv.shape());
  if (stats) {
    stats->mean = BasicTensor<T>({C});
    stats->var = BasicTensor<T>({C});
  }
  for (std::size_t c = 0; c < C; ++c) {
    double mean = 0.0;
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t s = 0; s < S; ++s) mean += xv[(n * C + c) * S + s];
    mean /= static_cast<double>(M);
    double var = 0.0;
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t s = 0; s < S; ++s) {
        const double d = xv[(n * C + c) * S + s] - mean;
        var += d * d;
      }
    const double biased = var / static_cast<double>(M);
    const double is = 1.0 / std::sqrt(biased + eps);
    (*inv_std)[c] = is;
    const double gm = gamma.value()[c], bt = beta.value()[c];
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t s = 0; s < S; ++s) {
        const std::size_t i = (n * C + c) * S + s;
        const double h = (xv[i] - mean) * is;
        (*xhat)[i] = static_cast<T>(h);
        y[i] = static_cast<T>(gm * h + bt);
      }
    if (stats) {
      stats->mean[c] = static_cast<T>(mean);
      stats->var[c] = static_cast<T>(M > 1 ? var / static_cast<double>(M - 1) : biased);
    }
  }
  return x.tape().push(std::move(y), {x, gamma, beta},
                       [x, gamma, beta, xhat, inv_std, N, C, S, M](Tape<T>& t, const BasicTensor<T>& g) {
                         BasicTensor<T> gg({C}), gb({C});
                         BasicTensor<T> gx(x.shape());
                         for (std::size_t c = 0; c < C; ++c) {
                           double sum_g = 0.0, sum_gh = 0.0;
                           for (std::size_t n = 0; n < N; ++n)
                             for (std::size_t s = 0; s < S; ++s) {
                               const std::size_t i = (n * C + c) * S + s;
                               sum_g += g[i];
                               sum_gh += static_cast<double>(g[i]) * (*xhat)[i];
                             }
                           gg[c] = static_cast<T>(sum_gh);
                           gb[c] = static_cast<T>(sum_g);
                           const double k = gamma.value()[c] * (*inv_std)[c] / static_cast<double>(M);
                           for (std::size_t n = 0; n < N; ++n)
                             for (std::size_t s = 0; s < S; ++s) {
                               const std::size_t i = (n * C + c) * S + s;
                               gx[i] = static_cast<T>(k * (static_cast<double>(M) * g[i] - sum_g -
                                                           static_cast<double>((*xhat)[i]) * sum_gh));
                             }
                         }
                         t.accumulate(x, gx);
                         t.accumulate(gamma, gg);
                         t.accumulate(beta, gb);
                       });
}

template <typename T>
Var<T> channel_affine(Var<T> x, const BasicTensor<T>& scale, const BasicTensor<T>& shift) {
  return x.tape().push(kernels::channel_affine(x.value(), scale, shift), {x},
                       [x, scale](Tape<T>& t, const BasicTensor<T>& g) {
                         const std::size_t N = g.dim(0), C = g.dim(1), S = g.size() / (N * C);
                         BasicTensor<T> gx(g.shape());
                         for (std::size_t n = 0; n < N; ++n)
                           for (std::size_t c = 0; c < C; ++c)
                             for (std::size_t s = 0; s < S; ++s) {
                               const std::size_t i = (n * C + c) * S + s;
                               gx[i] = g[i] * scale[c];
                             }
                         t.accumulate(x, gx);
                       });
}

template <typename T>
Var<T> activation(Var<T> x, const ActivationKind& kind) {
  return x.tape().push(forward(kind, x.value()), {x}, [x, kind](Tape<T>& t, const BasicTensor<T>& g) {
    BasicTensor<T> gx = derivative(kind, x.value());
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= g[i];
    t.accumulate(x, gx);
  });
}

template <typename T>
Var<T> weighted_ensemble(Var<T> x, const ActivationKind& sota, double alpha) {
  BasicTensor<T> y = weighted_ensemble_values(x.value(), sota, alpha);
  return x.tape().push(std::move(y), {x}, [x, sota, alpha](Tape<T>& t, const BasicTensor<T>& g) {
    const BasicTensor<T>& xv = x.value();
    BasicTensor<T> gx(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const double v = xv[i];
      double d;
      if (alpha == 1.0) {
        d = activate_derivative(ActivationKind::relu(), v);
      } else if (alpha == 0.0) {
        d = activate_derivative(sota, v);
      } else {
        d = alpha * activate_derivative(ActivationKind::relu(), v) + (1.0 - alpha) * activate_derivative(sota, v);
      }
      gx[i] = static_cast<T>(static_cast<double>(g[i]) * d);
    }
    t.accumulate(x, gx);
  });
}

template <typename T>
Var<T> masked_ensemble(Var<T> x, const ActivationKind& sota, std::span<const std::uint8_t> relu_mask) {
  const BasicTensor<T>& xv = x.value();
  if (relu_mask.size() != xv.size()) {
    throw DimensionError("ensemble mask has " + std::to_string(relu_mask.size()) + " entries for input " +
                         to_string(xv.shape()));
  }
  const ActivationKind relu = ActivationKind::relu();
  BasicTensor<T> y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    y[i] = static_cast<T>(activate(relu_mask[i] ? relu : sota, xv[i]));
  }
  auto mask = std::make_shared<std::vector<std::uint8_t>>(relu_mask.begin(), relu_mask.end());
  return x.tape().push(std::move(y), {x}, [x, sota, mask](Tape<T>& t, const BasicTensor<T>& g) {
    const ActivationKind relu = ActivationKind::relu();
    const BasicTensor<T>& xv = x.value();
    BasicTensor<T> gx(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) {
      gx[i] = g[i] * static_cast<T>(activate_derivative((*mask)[i] ? relu : sota, xv[i]));
    }
    t.accumulate(x, gx);
  });
}

template <typename T>
Var<T> dropout(Var<T> x, std::span<const std::uint8_t> keep_mask, double scale) {
  const BasicTensor<T>& xv = x.value();
  if (keep_mask.size() != xv.size()) throw DimensionError("dropout mask does not match input");
  const T s = static_cast<T>(scale);
  BasicTensor<T> y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = keep_mask[i] ? xv[i] * s : T{0};
  auto mask = std::make_shared<std::vector<std::uint8_t>>(keep_mask.begin(), keep_mask.end());
  return x.tape().push(std::move(y), {x}, [x, mask, s](Tape<T>& t, const BasicTensor<T>& g) {
    BasicTensor<T> gx(g.shape());
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] = (*mask)[i] ? g[i] * s : T{0};
    t.accumulate(x, gx);
  });
}

template <typename T>
Var<T> softmax(Var<T> x) {
  BasicTensor<T> y = kernels::softmax(x.value());
  auto saved = std::make_shared<BasicTensor<T>>(y);
  return x.tape().push(std::move(y), {x}, [x, saved](Tape<T>& t, const BasicTensor<T>& g) {
    const std::size_t N = g.dim(0), C = g.dim(1);
    BasicTensor<T> gx(g.shape());
    for (std::size_t i = 0; i < N; ++i) {
      double dot = 0.0;
      for (std::size_t c = 0; c < C; ++c) dot += static_cast<double>(g[i * C + c]) * (*saved)[i * C + c];
      for (std::size_t c = 0; c < C; ++c) {
        gx[i * C + c] = static_cast<T>((*saved)[i * C + c] * (static_cast<double>(g[i * C + c]) - dot));
      }
    }
    t.accumulate(x, gx);
  });
}

template <typename T>
Var<T> softmax_cross_entropy(Var<T> logits, std::span<const int> labels, double smoothing) {
  auto dlogits = std::make_shared<BasicTensor<T>>();
  const double loss = label_smoothed_cross_entropy(logits.value(), labels, smoothing,
                                                   logits.tape().recording() ? dlogits.get() : nullptr);
  return logits.tape().push(BasicTensor<T>::scalar(static_cast<T>(loss)), {logits},
                            [logits, dlogits](Tape<T>& t, const BasicTensor<T>& g) {
                              BasicTensor<T> gx = *dlogits;
                              for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= g[0];
                              t.accumulate(logits, gx);
                            });
}

#define PEA_INSTANTIATE_OPS(T)                                                                          \
  template Var<T> add(Var<T>, Var<T>);                                                                  \
  template Var<T> mul(Var<T>, Var<T>);                                                                  \
  template Var<T> sum(Var<T>);                                                                          \
  template Var<T> matmul(Var<T>, Var<T>);                                                               \
  template Var<T> add_bias(Var<T>, Var<T>);                                                             \
  template Var<T> dense(Var<T>, Var<T>, Var<T>);                                                        \
  template Var<T> conv2d(Var<T>, Var<T>, const kernels::ConvParams&);                                   \
  template Var<T> max_pool2x2(Var<T>);                                                                  \
  template Var<T> global_avg_pool(Var<T>);                                                              \
  template Var<T> flatten(Var<T>);                                                                      \
  template Var<T> batch_norm_train(Var<T>, Var<T>, Var<T>, double, BatchStats<T>*);                     \
  template Var<T> channel_affine(Var<T>, const BasicTensor<T>&, const BasicTensor<T>&);                 \
  template Var<T> activation(Var<T>, const ActivationKind&);                                            \
  template Var<T> weighted_ensemble(Var<T>, const ActivationKind&, double);                             \
  template Var<T> masked_ensemble(Var<T>, const ActivationKind&, std::span<const std::uint8_t>);        \
  template Var<T> dropout(Var<T>, std::span<const std::uint8_t>, double);                               \
  template Var<T> softmax(Var<T>);                                                                      \
  template Var<T> softmax_cross_entropy(Var<T>, std::span<const int>, double);

PEA_INSTANTIATE_OPS(float)
PEA_INSTANTIATE_OPS(double)

#undef PEA_INSTANTIATE_OPS

}  // namespace ops

template BasicTensor<float> weighted_ensemble_values(const BasicTensor<float>&, const ActivationKind&, double);
template BasicTensor<double> weighted_ensemble_values(const BasicTensor<double>&, const ActivationKind&, double);
template double label_smoothed_cross_entropy(const BasicTensor<float>&, std::span<const int>, double,
                                             BasicTensor<float>*);
template double label_smoothed_cross_entropy(const BasicTensor<double>&, std::span<const int>, double,
                                             BasicTensor<double>*);

}  // namespace pea
