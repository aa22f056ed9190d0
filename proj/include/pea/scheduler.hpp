#pragma once

#include <string>
#include <utility>
#include <vector>

namespace pea {

enum class ScheduleGranularity { PerEpoch, PerStep };
/// Only Linear ships; the enum is the extension point for other ramps.
enum class ScheduleShape { Linear };

/// Initial / transition / final phase protocol on a continuous progress axis
/// measured in epochs. Training epochs are 1-indexed: epoch e covers the
/// progress interval (e−1, e].
struct PhaseSchedule {
  int init_end = 5;      ///< alpha = 0 for t <= init_end
  int trans_end = 115;   ///< alpha = 1 for t >= trans_end
  int total_epochs = 120;
  ScheduleGranularity granularity = ScheduleGranularity::PerEpoch;
  ScheduleShape shape = ScheduleShape::Linear;

  /// Throws ConfigError unless 0 <= init_end < trans_end <= total_epochs.
  void validate() const;

  bool operator==(const PhaseSchedule&) const = default;
};

/// 120 epochs, ramp from epoch 5 to epoch 115.
PhaseSchedule default_phase_schedule();

/// alpha at progress t ∈ [0, total_epochs]. PerEpoch evaluates the ramp at
/// ceil(t), i.e. the alpha of the epoch containing t; PerStep interpolates.
/// Both agree at integer t. Throws ContractError when t is out of range.
double alpha_at(const PhaseSchedule& s, double t);

/// Progress point after step `step` (0-based) of epoch `epoch` (1-based).
double step_progress(int epoch, std::size_t step, std::size_t steps_per_epoch);

/// (epoch, alpha) for epochs 1..total_epochs.
std::vector<std::pair<int, double>> schedule_trace(const PhaseSchedule& s);

/// "epoch,alpha" CSV for epochs 1..total_epochs; alpha printed round-trip exact.
std::string schedule_csv(const PhaseSchedule& s);

std::string to_string(ScheduleGranularity g);
ScheduleGranularity parse_schedule_granularity(const std::string& text);

}  // namespace pea

namespace pea {

template <typename T>
class BasicModel;

/// Sets every ensemble layer's alpha to alpha_at(s, t). Idempotent for fixed t.
template <typename T>
void apply(const PhaseSchedule& s, BasicModel<T>& model, double t);

}  // namespace pea
