#pragma once

// Tape-free numeric kernels. The autograd ops and the exported-model
// interpreter both call these, so inference through either path rounds
// identically.

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "pea/tensor.hpp"

namespace pea::kernels {

/// a[m×k] · b[k×n]
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);
/// aᵀ · b with a[k×m], b[k×n]
template <typename T>
BasicTensor<T> matmul_at_b(const BasicTensor<T>& a, const BasicTensor<T>& b);
/// a · bᵀ with a[m×k], b[n×k]
template <typename T>
BasicTensor<T> matmul_a_bt(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// x · w + bias, with x viewed as [N × K] (trailing dims flattened),
/// w[K × F], bias[F].
template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& bias);

struct ConvParams {
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t groups = 1;
};

/// Output extent of one spatial axis; throws ConfigError when no kernel
/// placement fits.
std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t padding);

/// Cross-correlation of x[N×C×H×W] with w[F×(C/groups)×kh×kw].
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& w, const ConvParams& p);

/// Either output pointer may be null to skip that gradient.
template <typename T>
void conv2d_backward(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& grad_out,
                     const ConvParams& p, BasicTensor<T>* grad_x, BasicTensor<T>* grad_w);

/// y[n, c, ...] = x[n, c, ...] + bias[c] for x of rank 2 or 4.
template <typename T>
BasicTensor<T> add_channel_bias(const BasicTensor<T>& x, const BasicTensor<T>& bias);

/// y[n, c, ...] = x[n, c, ...] * scale[c] + shift[c] for x of rank 2 or 4.
template <typename T>
BasicTensor<T> channel_affine(const BasicTensor<T>& x, const BasicTensor<T>& scale,
                              const BasicTensor<T>& shift);

/// Inference-time batch norm as a per-channel affine map.
template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> fold_batch_norm(const BasicTensor<T>& gamma,
                                                          const BasicTensor<T>& beta,
                                                          const BasicTensor<T>& running_mean,
                                                          const BasicTensor<T>& running_var,
                                                          double eps);

/// 2×2 max pooling with stride 2 (floor). `argmax`, when given, receives the
/// flat input index chosen for every output element.
template <typename T>
BasicTensor<T> max_pool2x2(const BasicTensor<T>& x, std::vector<std::uint32_t>* argmax = nullptr);

/// [N×C×H×W] -> [N×C]
template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& x);

/// Row-wise softmax over the last axis of a rank-2 tensor.
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
std::size_t channels_of(const BasicTensor<T>& x);

}  // namespace pea::kernels
