#include "pea/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace pea {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename T>
bool bit_identical(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) return false;
  return a.size() == 0 || std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(T)) == 0;
}

template <typename T>
bool all_finite(const BasicTensor<T>& t) {
  return std::all_of(t.data().begin(), t.data().end(), [](T v) { return std::isfinite(v); });
}

template bool bit_identical(const BasicTensor<float>&, const BasicTensor<float>&);
template bool bit_identical(const BasicTensor<double>&, const BasicTensor<double>&);
template bool all_finite(const BasicTensor<float>&);
template bool all_finite(const BasicTensor<double>&);

}  // namespace pea

namespace pea::kernels {
namespace {

// C[M×N] += A[M×K] · B[K×N]
template <typename T>
void gemm_nn(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda, const T* B,
             std::size_t ldb, T* C, std::size_t ldc) {
  for (std::size_t i = 0; i < M; ++i) {
    T* c = C + i * ldc;
    for (std::size_t k = 0; k < K; ++k) {
      const T a = A[i * lda + k];
      if (a == T{0}) continue;
      const T* b = B + k * ldb;
      for (std::size_t j = 0; j < N; ++j) c[j] += a * b[j];
    }
  }
}

// C[M×N] += Aᵀ · B, A stored [K×M]
template <typename T>
void gemm_tn(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda, const T* B,
             std::size_t ldb, T* C, std::size_t ldc) {
  for (std::size_t k = 0; k < K; ++k) {
    const T* b = B + k * ldb;
    for (std::size_t i = 0; i < M; ++i) {
      const T a = A[k * lda + i];
      if (a == T{0}) continue;
      T* c = C + i * ldc;
      for (std::size_t j = 0; j < N; ++j) c[j] += a * b[j];
    }
  }
}

// C[M×N] += A · Bᵀ, B stored [N×K]
template <typename T>
void gemm_nt(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda, const T* B,
             std::size_t ldb, T* C, std::size_t ldc) {
  for (std::size_t i = 0; i < M; ++i) {
    const T* a = A + i * lda;
    for (std::size_t j = 0; j < N; ++j) {
      const T* b = B + j * ldb;
      T acc{0};
      for (std::size_t k = 0; k < K; ++k) acc += a[k] * b[k];
      C[i * ldc + j] += acc;
    }
  }
}

struct ConvGeometry {
  std::size_t n, c, h, w, f, kh, kw, oh, ow, cg, fg;
};

template <typename T>
ConvGeometry conv_geometry(const BasicTensor<T>& x, const BasicTensor<T>& w, const ConvParams& p) {
  if (x.rank() != 4 || w.rank() != 4) {
    throw DimensionError("conv2d expects rank-4 input and kernel, got " + to_string(x.shape()) +
                         " and " + to_string(w.shape()));
  }
  if (p.stride == 0) throw ConfigError("conv2d stride must be positive");
  if (p.groups == 0) throw ConfigError("conv2d groups must be positive");
  ConvGeometry g{};
  g.n = x.dim(0);
  g.c = x.dim(1);
  g.h = x.dim(2);
  g.w = x.dim(3);
  g.f = w.dim(0);
  g.kh = w.dim(2);
  g.kw = w.dim(3);
  if (g.c % p.groups != 0 || g.f % p.groups != 0) {
    throw ConfigError("conv2d groups=" + std::to_string(p.groups) + " must divide input channels " +
                      std::to_string(g.c) + " and filters " + std::to_string(g.f));
  }
  g.cg = g.c / p.groups;
  g.fg = g.f / p.groups;
  if (w.dim(1) != g.cg) {
    throw DimensionError("conv2d kernel " + to_string(w.shape()) + " incompatible with input " +
                         to_string(x.shape()) + " and groups=" + std::to_string(p.groups));
  }
  g.oh = conv_output_extent(g.h, g.kh, p.stride, p.padding);
  g.ow = conv_output_extent(g.w, g.kw, p.stride, p.padding);
  return g;
}

// col[(ci*kh + ki)*kw + kj][oy*ow + ox] for channels [c0, c0+cg) of sample n.
template <typename T>
void im2col(const T* x, const ConvGeometry& g, const ConvParams& p, std::size_t c0, T* col) {
  const std::size_t P = g.oh * g.ow;
  for (std::size_t ci = 0; ci < g.cg; ++ci) {
    const T* plane = x + (c0 + ci) * g.h * g.w;
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        T* row = col + ((ci * g.kh + ki) * g.kw + kj) * P;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * p.stride + ki) -
                                    static_cast<std::ptrdiff_t>(p.padding);
          T* out = row + oy * g.ow;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
            std::fill(out, out + g.ow, T{0});
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * g.w;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * p.stride + kj) -
                                      static_cast<std::ptrdiff_t>(p.padding);
            out[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) ? T{0} : src[ix];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, const ConvParams& p, std::size_t c0, T* x) {
  const std::size_t P = g.oh * g.ow;
  for (std::size_t ci = 0; ci < g.cg; ++ci) {
    T* plane = x + (c0 + ci) * g.h * g.w;
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const T* row = col + ((ci * g.kh + ki) * g.kw + kj) * P;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * p.stride + ki) -
                                    static_cast<std::ptrdiff_t>(p.padding);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          T* dst = plane + static_cast<std::size_t>(iy) * g.w;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * p.stride + kj) -
                                      static_cast<std::ptrdiff_t>(p.padding);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            dst[ix] += row[oy * g.ow + ox];
          }
        }
      }
    }
  }
}

template <typename T>
void require_rank2(const BasicTensor<T>& t, const char* what) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(what) + " expects a rank-2 tensor, got " + to_string(t.shape()));
  }
}

template <typename T>
void check_channel_vector(const BasicTensor<T>& x, const BasicTensor<T>& v, const char* what) {
  if (x.rank() != 2 && x.rank() != 4) {
    throw DimensionError(std::string(what) + " expects rank-2 or rank-4 input, got " +
                         to_string(x.shape()));
  }
  if (v.rank() != 1 || v.dim(0) != x.dim(1)) {
    throw DimensionError(std::string(what) + " per-channel vector " + to_string(v.shape()) +
                         " does not match input " + to_string(x.shape()));
  }
}

}  // namespace

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t padding) {
  if (stride == 0) throw ConfigError("stride must be positive");
  if (in + 2 * padding < kernel) {
    throw ConfigError("kernel extent " + std::to_string(kernel) + " exceeds padded input extent " +
                      std::to_string(in + 2 * padding));
  }
  return (in + 2 * padding - kernel) / stride + 1;
}

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul inner dimensions differ: " + to_string(a.shape()) + " x " +
                         to_string(b.shape()));
  }
  const std::size_t M = a.dim(0), K = a.dim(1), N = b.dim(1);
  BasicTensor<T> c({M, N});
  gemm_nn(M, N, K, a.data().data(), K, b.data().data(), N, c.data().data(), N);
  return c;
}

template <typename T>
BasicTensor<T> matmul_at_b(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_rank2(a, "matmul_at_b");
  require_rank2(b, "matmul_at_b");
  if (a.dim(0) != b.dim(0)) {
    throw DimensionError("matmul_at_b leading dimensions differ: " + to_string(a.shape()) + " and " +
                         to_string(b.shape()));
  }
  const std::size_t K = a.dim(0), M = a.dim(1), N = b.dim(1);
  BasicTensor<T> c({M, N});
  gemm_tn(M, N, K, a.data().data(), M, b.data().data(), N, c.data().data(), N);
  return c;
}

template <typename T>
BasicTensor<T> matmul_a_bt(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_rank2(a, "matmul_a_bt");
  require_rank2(b, "matmul_a_bt");
  if (a.dim(1) != b.dim(1)) {
    throw DimensionError("matmul_a_bt trailing dimensions differ: " + to_string(a.shape()) + " and " +
                         to_string(b.shape()));
  }
  const std::size_t M = a.dim(0), K = a.dim(1), N = b.dim(0);
  BasicTensor<T> c({M, N});
  gemm_nt(M, N, K, a.data().data(), K, b.data().data(), K, c.data().data(), N);
  return c;
}

template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& bias) {
  if (x.rank() < 2) throw DimensionError("dense expects input of rank >= 2, got " + to_string(x.shape()));
  require_rank2(w, "dense weight");
  const std::size_t N = x.dim(0);
  const std::size_t K = x.size() / N;
  if (w.dim(0) != K) {
    throw DimensionError("dense weight " + to_string(w.shape()) + " does not match input " +
                         to_string(x.shape()));
  }
  const std::size_t F = w.dim(1);
  if (bias.rank() != 1 || bias.dim(0) != F) {
    throw DimensionError("dense bias " + to_string(bias.shape()) + " does not match weight " +
                         to_string(w.shape()));
  }
  BasicTensor<T> y({N, F});
  auto yd = y.data();
  for (std::size_t i = 0; i < N; ++i) std::copy(bias.data().begin(), bias.data().end(), yd.begin() + i * F);
  gemm_nn(N, F, K, x.data().data(), K, w.data().data(), F, yd.data(), F);
  return y;
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& w, const ConvParams& p) {
  const ConvGeometry g = conv_geometry(x, w, p);
  const std::size_t P = g.oh * g.ow;
  const std::size_t CK = g.cg * g.kh * g.kw;
  BasicTensor<T> y({g.n, g.f, g.oh, g.ow});
  std::vector<T> col(CK * P);
  const T* xd = x.data().data();
  const T* wd = w.data().data();
  T* yd = y.data().data();
  for (std::size_t n = 0; n < g.n; ++n) {
    const T* xn = xd + n * g.c * g.h * g.w;
    T* yn = yd + n * g.f * P;
    for (std::size_t grp = 0; grp < p.groups; ++grp) {
      im2col(xn, g, p, grp * g.cg, col.data());
      gemm_nn(g.fg, P, CK, wd + grp * g.fg * CK, CK, col.data(), P, yn + grp * g.fg * P, P);
    }
  }
  return y;
}

template <typename T>
void conv2d_backward(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& grad_out,
                     const ConvParams& p, BasicTensor<T>* grad_x, BasicTensor<T>* grad_w) {
  const ConvGeometry g = conv_geometry(x, w, p);
  const Shape expected{g.n, g.f, g.oh, g.ow};
  if (grad_out.shape() != expected) {
    throw DimensionError("conv2d gradient " + to_string(grad_out.shape()) + " does not match output " +
                         to_string(expected));
  }
  const std::size_t P = g.oh * g.ow;
  const std::size_t CK = g.cg * g.kh * g.kw;
  std::vector<T> col(CK * P);
  std::vector<T> dcol(CK * P);
  if (grad_x) *grad_x = BasicTensor<T>(x.shape());
  if (grad_w) *grad_w = BasicTensor<T>(w.shape());
  const T* xd = x.data().data();
  const T* wd = w.data().data();
  const T* gd = grad_out.data().data();
  for (std::size_t n = 0; n < g.n; ++n) {
    const T* xn = xd + n * g.c * g.h * g.w;
    const T* gn = gd + n * g.f * P;
    for (std::size_t grp = 0; grp < p.groups; ++grp) {
      const T* g_out = gn + grp * g.fg * P;
      if (grad_w) {
        im2col(xn, g, p, grp * g.cg, col.data());
        gemm_nt(g.fg, CK, P, g_out, P, col.data(), P, grad_w->data().data() + grp * g.fg * CK, CK);
      }
      if (grad_x) {
        std::fill(dcol.begin(), dcol.end(), T{0});
        gemm_tn(CK, P, g.fg, wd + grp * g.fg * CK, CK, g_out, P, dcol.data(), P);
        col2im_add(dcol.data(), g, p, grp * g.cg, grad_x->data().data() + n * g.c * g.h * g.w);
      }
    }
  }
}

template <typename T>
std::size_t channels_of(const BasicTensor<T>& x) {
  return x.rank() >= 2 ? x.dim(1) : 0;
}

template <typename T>
BasicTensor<T> add_channel_bias(const BasicTensor<T>& x, const BasicTensor<T>& bias) {
  check_channel_vector(x, bias, "add_channel_bias");
  const std::size_t N = x.dim(0), C = x.dim(1);
  const std::size_t S = x.size() / (N * C);
  BasicTensor<T> y = x;
  auto yd = y.data();
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c) {
      const T b = bias[c];
      T* p = yd.data() + (n * C + c) * S;
      for (std::size_t s = 0; s < S; ++s) p[s] += b;
    }
  return y;
}

template <typename T>
BasicTensor<T> channel_affine(const BasicTensor<T>& x, const BasicTensor<T>& scale,
                              const BasicTensor<T>& shift) {
  check_channel_vector(x, scale, "channel_affine");
  check_channel_vector(x, shift, "channel_affine");
  const std::size_t N = x.dim(0), C = x.dim(1);
  const std::size_t S = x.size() / (N * C);
  BasicTensor<T> y(x.shape());
  const T* xd = x.data().data();
  T* yd = y.data().data();
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c) {
      const T a = scale[c];
      const T b = shift[c];
      const std::size_t off = (n * C + c) * S;
      for (std::size_t s = 0; s < S; ++s) yd[off + s] = xd[off + s] * a + b;
    }
  return y;
}

template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> fold_batch_norm(const BasicTensor<T>& gamma,
                                                          const BasicTensor<T>& beta,
                                                          const BasicTensor<T>& running_mean,
                                                          const BasicTensor<T>& running_var,
                                                          double eps) {
  const std::size_t C = gamma.size();
  if (beta.size() != C || running_mean.size() != C || running_var.size() != C) {
    throw DimensionError("batch norm statistics disagree in channel count");
  }
  BasicTensor<T> scale({C});
  BasicTensor<T> shift({C});
  for (std::size_t c = 0; c < C; ++c) {
    const double s = static_cast<double>(gamma[c]) / std::sqrt(static_cast<double>(running_var[c]) + eps);
    scale[c] = static_cast<T>(s);
    shift[c] = static_cast<T>(static_cast<double>(beta[c]) - static_cast<double>(running_mean[c]) * s);
  }
  return {std::move(scale), std::move(shift)};
}

template <typename T>
BasicTensor<T> max_pool2x2(const BasicTensor<T>& x, std::vector<std::uint32_t>* argmax) {
  if (x.rank() != 4) throw DimensionError("max_pool2x2 expects rank-4 input, got " + to_string(x.shape()));
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H < 2 || W < 2) throw ConfigError("max_pool2x2 needs spatial extent >= 2, got " + to_string(x.shape()));
  const std::size_t OH = H / 2, OW = W / 2;
  BasicTensor<T> y({N, C, OH, OW});
  if (argmax) argmax->assign(y.size(), 0);
  const T* xd = x.data().data();
  T* yd = y.data().data();
  std::size_t o = 0;
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    const std::size_t base = nc * H * W;
    for (std::size_t oy = 0; oy < OH; ++oy)
      for (std::size_t ox = 0; ox < OW; ++ox, ++o) {
        std::size_t best = base + (2 * oy) * W + 2 * ox;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = base + (2 * oy + dy) * W + 2 * ox + dx;
            if (!std::isnan(xd[best]) && (std::isnan(xd[idx]) || xd[idx] > xd[best])) best = idx;
          }
        yd[o] = xd[best];
        if (argmax) (*argmax)[o] = static_cast<std::uint32_t>(best);
      }
  }
  return y;
}

template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& x) {
  if (x.rank() != 4) throw DimensionError("global_avg_pool expects rank-4 input, got " + to_string(x.shape()));
  const std::size_t N = x.dim(0), C = x.dim(1), S = x.dim(2) * x.dim(3);
  BasicTensor<T> y({N, C});
  const T* xd = x.data().data();
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    double acc = 0.0;
    for (std::size_t s = 0; s < S; ++s) acc += xd[nc * S + s];
    y[nc] = static_cast<T>(acc / static_cast<double>(S));
  }
  return y;
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& x) {
  require_rank2(x, "softmax");
  const std::size_t N = x.dim(0), C = x.dim(1);
  BasicTensor<T> y(x.shape());
  for (std::size_t i = 0; i < N; ++i) {
    const T* row = x.data().data() + i * C;
    double m = row[0];
    for (std::size_t c = 1; c < C; ++c) m = std::max(m, static_cast<double>(row[c]));
    double z = 0.0;
    for (std::size_t c = 0; c < C; ++c) z += std::exp(static_cast<double>(row[c]) - m);
    for (std::size_t c = 0; c < C; ++c) y[i * C + c] = static_cast<T>(std::exp(static_cast<double>(row[c]) - m) / z);
  }
  return y;
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add operands differ in shape: " + to_string(a.shape()) + " and " +
                         to_string(b.shape()));
  }
  BasicTensor<T> y = a;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b[i];
  return y;
}

#define PEA_INSTANTIATE_KERNELS(T)                                                                  \
  template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);                     \
  template BasicTensor<T> matmul_at_b(const BasicTensor<T>&, const BasicTensor<T>&);                \
  template BasicTensor<T> matmul_a_bt(const BasicTensor<T>&, const BasicTensor<T>&);                \
  template BasicTensor<T> dense(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&, const ConvParams&);  \
  template void conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, \
                                const ConvParams&, BasicTensor<T>*, BasicTensor<T>*);                \
  template BasicTensor<T> add_channel_bias(const BasicTensor<T>&, const BasicTensor<T>&);           \
  template BasicTensor<T> channel_affine(const BasicTensor<T>&, const BasicTensor<T>&,              \
                                         const BasicTensor<T>&);                                     \
  template std::pair<BasicTensor<T>, BasicTensor<T>> fold_batch_norm(                               \
      const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,  \
      double);                                                                                       \
  template BasicTensor<T> max_pool2x2(const BasicTensor<T>&, std::vector<std::uint32_t>*);          \
  template BasicTensor<T> global_avg_pool(const BasicTensor<T>&);                                   \
  template BasicTensor<T> softmax(const BasicTensor<T>&);                                           \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                        \
  template std::size_t channels_of(const BasicTensor<T>&);

PEA_INSTANTIATE_KERNELS(float)
PEA_INSTANTIATE_KERNELS(double)

#undef PEA_INSTANTIATE_KERNELS

}  // namespace pea::kernels
