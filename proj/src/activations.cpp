#include "pea/activations.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>

namespace pea {
namespace math {
namespace {

constexpr double kTwoOverSqrtPi = 2.0 / 1.7724538509055160272981674833411;
constexpr double kInvSqrtPi = 1.0 / 1.7724538509055160272981674833411;
constexpr double kSeriesLimit = 2.5;

double erf_series(double x) {
  const double x2 = x * x;
  double term = x;
  double sum = x;
  for (int n = 1; n < 200; ++n) {
    term *= 2.0 * x2 / (2.0 * n + 1.0);
    sum += term;
    if (std::fabs(term) < 1e-17 * std::fabs(sum)) break;
  }
  return kTwoOverSqrtPi * std::exp(-x2) * sum;
}

// x >= kSeriesLimit
double erfc_continued_fraction(double x) {
  constexpr double tiny = 1e-300;
  double f = x;
  double c = x;
  double d = 0.0;
  for (int k = 1; k < 500; ++k) {
    const double a = 0.5 * k;
    d = x + a * d;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    c = x + a / c;
    if (std::fabs(c) < tiny) c = tiny;
    const double delta = c * d;
    f *= delta;
    if (std::fabs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x * x) * kInvSqrtPi / f;
}

}  // namespace

double erf(double x) {
  if (std::isnan(x)) return x;
  const double ax = std::fabs(x);
  if (ax < kSeriesLimit) return erf_series(x);
  if (ax > 6.0) return x > 0 ? 1.0 : -1.0;
  const double r = 1.0 - erfc_continued_fraction(ax);
  return x > 0 ? r : -r;
}

double erfc(double x) {
  if (std::isnan(x)) return x;
  if (x >= kSeriesLimit) return x > 27.0 ? 0.0 : erfc_continued_fraction(x);
  if (x <= -kSeriesLimit) return 2.0 - erfc(-x);
  return 1.0 - erf_series(x);
}

double normal_cdf(double x) {
  constexpr double inv_sqrt2 = 0.70710678118654752440084436210485;
  return x < 0 ? 0.5 * erfc(-x * inv_sqrt2) : 0.5 * (1.0 + erf(x * inv_sqrt2));
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x))); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace math

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267793994605993438;

void require_positive_finite(double v, const char* what) {
  if (!std::isfinite(v) || v <= 0.0) {
    std::ostringstream os;
    os << what << " must be finite and > 0, got " << v;
    throw ConfigError(os.str());
  }
}

std::string format_param(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double swish(double x, double beta) { return x * math::sigmoid(beta * x); }

double swish_derivative(double x, double beta) {
  const double s = math::sigmoid(beta * x);
  return s + beta * x * s * (1.0 - s);
}

}  // namespace

ActivationKind ActivationKind::swish(double beta) {
  require_positive_finite(beta, "Swish beta");
  return ActivationKind(ActivationTag::Swish, beta);
}

ActivationKind ActivationKind::elu(double a) {
  require_positive_finite(a, "ELU a");
  return ActivationKind(ActivationTag::ELU, a);
}

ActivationKind ActivationKind::parse(std::string_view text) {
  std::string s;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  std::string head = s;
  std::string arg;
  const auto open = s.find('(');
  if (open != std::string::npos) {
    if (s.back() != ')') throw ConfigError("malformed activation '" + std::string(text) + "'");
    head = s.substr(0, open);
    arg = s.substr(open + 1, s.size() - open - 2);
  }
  auto param = [&](double fallback) {
    if (arg.empty()) return fallback;
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(arg, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != arg.size()) throw ConfigError("malformed activation parameter in '" + std::string(text) + "'");
    return v;
  };
  auto no_param = [&]() {
    if (!arg.empty()) throw ConfigError("activation '" + head + "' takes no parameter");
  };
  if (head == "relu") return no_param(), relu();
  if (head == "relu6") return no_param(), relu6();
  if (head == "gelu") return no_param(), gelu();
  if (head == "silu") return no_param(), silu();
  if (head == "mish") return no_param(), mish();
  if (head == "swish") return swish(param(1.0));
  if (head == "elu") return elu(param(1.0));
  throw ConfigError("unknown activation '" + std::string(text) + "'");
}

std::string ActivationKind::name() const {
  switch (tag_) {
    case ActivationTag::ReLU: return "ReLU";
    case ActivationTag::ReLU6: return "ReLU6";
    case ActivationTag::GELU: return "GELU";
    case ActivationTag::Swish: return param_ == 1.0 ? "Swish" : "Swish(" + format_param(param_) + ")";
    case ActivationTag::SiLU: return "SiLU";
    case ActivationTag::Mish: return "Mish";
    case ActivationTag::ELU: return param_ == 1.0 ? "ELU" : "ELU(" + format_param(param_) + ")";
  }
  return "?";
}

std::string ActivationKind::token() const {
  switch (tag_) {
    case ActivationTag::ReLU: return "relu";
    case ActivationTag::ReLU6: return "relu6";
    case ActivationTag::GELU: return "gelu";
    case ActivationTag::Swish: return param_ == 1.0 ? "swish" : "swish(" + format_param(param_) + ")";
    case ActivationTag::SiLU: return "silu";
    case ActivationTag::Mish: return "mish";
    case ActivationTag::ELU: return param_ == 1.0 ? "elu" : "elu(" + format_param(param_) + ")";
  }
  return "?";
}

double activate(const ActivationKind& kind, double x) {
  switch (kind.tag()) {
    case ActivationTag::ReLU: return std::isnan(x) ? x : (x > 0.0 ? x : 0.0);
    case ActivationTag::ReLU6: return std::isnan(x) ? x : (x > 0.0 ? (x < 6.0 ? x : 6.0) : 0.0);
    case ActivationTag::GELU: return x * math::normal_cdf(x);
    case ActivationTag::Swish:
    case ActivationTag::SiLU: return swish(x, kind.param());
    case ActivationTag::Mish: return x * std::tanh(math::softplus(x));
    case ActivationTag::ELU: return x > 0.0 ? x : kind.param() * std::expm1(x);
  }
  return 0.0;
}

double activate_derivative(const ActivationKind& kind, double x) {
  switch (kind.tag()) {
    case ActivationTag::ReLU: return x > 0.0 ? 1.0 : 0.0;
    case ActivationTag::ReLU6: return (x > 0.0 && x < 6.0) ? 1.0 : 0.0;
    case ActivationTag::GELU: return math::normal_cdf(x) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
    case ActivationTag::Swish:
    case ActivationTag::SiLU: return swish_derivative(x, kind.param());
    case ActivationTag::Mish: {
      const double t = std::tanh(math::softplus(x));
      return t + x * (1.0 - t * t) * math::sigmoid(x);
    }
    case ActivationTag::ELU: return x > 0.0 ? 1.0 : kind.param() * std::exp(x);
  }
  return 0.0;
}

template <typename T>
BasicTensor<T> forward(const ActivationKind& kind, const BasicTensor<T>& x) {
  BasicTensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = static_cast<T>(activate(kind, x[i]));
  return y;
}

template <typename T>
BasicTensor<T> derivative(const ActivationKind& kind, const BasicTensor<T>& x) {
  BasicTensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = static_cast<T>(activate_derivative(kind, x[i]));
  return y;
}

template BasicTensor<float> forward(const ActivationKind&, const BasicTensor<float>&);
template BasicTensor<double> forward(const ActivationKind&, const BasicTensor<double>&);
template BasicTensor<float> derivative(const ActivationKind&, const BasicTensor<float>&);
template BasicTensor<double> derivative(const ActivationKind&, const BasicTensor<double>&);

}  // namespace pea
