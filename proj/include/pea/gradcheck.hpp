#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pea/activations.hpp"
#include "pea/ensemble.hpp"
#include "pea/model.hpp"

namespace pea {

struct GradCheckOptions {
  double step = 1e-3;
  double rel_tol = 1e-2;
  double abs_tol = 1e-4;
  std::size_t max_coords = 48;  // sampled entries per parameter tensor
  std::uint64_t seed = 0;
  /// Multiplies the analytic gradient; anything but 1 must make checks fail.
  double fault_scale = 1.0;
};

struct GradCheckResult {
  std::string name;
  std::size_t checked = 0;
  std::size_t failures = 0;
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
  bool passed() const { return checked > 0 && failures == 0; }
};

/// One coordinate agrees when |a − n| ≤ max(abs_tol, rel_tol·max(|a|, |n|)).
bool gradients_agree(double analytic, double numeric, const GradCheckOptions& opts);

/// Elementwise activation over inputs kept clear of its kinks.
GradCheckResult check_activation(const ActivationKind& kind, const GradCheckOptions& opts = {});
/// Ensemble layer in training mode at fixed alpha; stochastic masks are replayed.
GradCheckResult check_ensemble(const EnsembleConfig& config, double alpha, const GradCheckOptions& opts = {});
/// Loss gradient of every parameter and the input of a small 64-bit network.
/// Coordinates whose difference quotient straddles a ReLU or max-pool switch
/// are re-measured with steps h/10 and h/100 before counting as failures.
GradCheckResult check_architecture(Architecture arch, const ActivationSlot& slot, const GradCheckOptions& opts = {});

struct GradSuiteFilter {
  std::optional<ActivationTag> activation;
  std::optional<Architecture> architecture;
};

std::vector<GradCheckResult> run_grad_suite(const GradSuiteFilter& filter, const GradCheckOptions& opts = {});

}  // namespace pea
