#pragma once

#include <string>
#include <string_view>

#include "pea/tensor.hpp"

namespace pea {

enum class ActivationTag { ReLU, ReLU6, GELU, Swish, SiLU, Mish, ELU };

/// A scalar activation with its constant parameter (Swish β, ELU a).
/// Parameters are fixed; they are never trained.
class ActivationKind {
 public:
  static ActivationKind relu() { return ActivationKind(ActivationTag::ReLU, 0.0); }
  static ActivationKind relu6() { return ActivationKind(ActivationTag::ReLU6, 0.0); }
  static ActivationKind gelu() { return ActivationKind(ActivationTag::GELU, 0.0); }
  static ActivationKind swish(double beta = 1.0);
  static ActivationKind silu() { return ActivationKind(ActivationTag::SiLU, 1.0); }
  static ActivationKind mish() { return ActivationKind(ActivationTag::Mish, 0.0); }
  static ActivationKind elu(double a = 1.0);

  /// Parses "relu", "relu6", "gelu", "swish", "swish(1.5)", "silu", "mish",
  /// "elu", "elu(0.5)" (case-insensitive). Throws ConfigError.
  static ActivationKind parse(std::string_view text);

  ActivationTag tag() const noexcept { return tag_; }
  /// β for Swish (1 for SiLU), a for ELU, 0 otherwise.
  double param() const noexcept { return param_; }
  bool is_relu() const noexcept { return tag_ == ActivationTag::ReLU; }

  /// Display name, e.g. "GELU", "Swish(1.5)".
  std::string name() const;
  /// Round-trippable token accepted by parse().
  std::string token() const;

  bool operator==(const ActivationKind&) const = default;

 private:
  ActivationKind(ActivationTag tag, double param) : tag_(tag), param_(param) {}

  ActivationTag tag_ = ActivationTag::ReLU;
  double param_ = 0.0;
};

namespace math {

/// Error function. |x| < 2.5: positive-term Maclaurin series
/// erf(x) = 2/√π·e^{-x²}·Σ 2ⁿx^{2n+1}/(2n+1)!!; otherwise 1 − erfc(x) with
/// erfc from its Laplace continued fraction (modified Lentz). Agrees with
/// std::erf to about 1e-15 absolute.
double erf(double x);
double erfc(double x);
/// Standard normal CDF Φ(x), using erfc on the negative half to avoid cancellation.
double normal_cdf(double x);
/// log(1 + e^x) in overflow-safe form max(x,0) + log1p(e^{-|x|}).
double softplus(double x);
double sigmoid(double x);

}  // namespace math

/// Scalar forward value.
double activate(const ActivationKind& kind, double x);
/// Scalar first derivative; ReLU/ReLU6 kinks have derivative 0.
double activate_derivative(const ActivationKind& kind, double x);

template <typename T>
BasicTensor<T> forward(const ActivationKind& kind, const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> derivative(const ActivationKind& kind, const BasicTensor<T>& x);

}  // namespace pea
