#include "pea/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "pea/errors.hpp"

namespace pea {

void PhaseSchedule::validate() const {
  if (!(0 <= init_end && init_end < trans_end && trans_end <= total_epochs)) {
    throw ConfigError("phase schedule requires 0 <= init_end < trans_end <= total_epochs, got init_end=" +
                      std::to_string(init_end) + " trans_end=" + std::to_string(trans_end) +
                      " total_epochs=" + std::to_string(total_epochs));
  }
}

PhaseSchedule default_phase_schedule() { return PhaseSchedule{}; }

double alpha_at(const PhaseSchedule& s, double t) {
  s.validate();
  if (!(t >= 0.0 && t <= static_cast<double>(s.total_epochs))) {
    throw ContractError("schedule progress " + std::to_string(t) + " outside [0, " +
                        std::to_string(s.total_epochs) + "]");
  }
  const double p = s.granularity == ScheduleGranularity::PerEpoch ? std::ceil(t) : t;
  if (p <= s.init_end) return 0.0;
  if (p >= s.trans_end) return 1.0;
  const double a = (p - s.init_end) / static_cast<double>(s.trans_end - s.init_end);
  return std::clamp(a, 0.0, 1.0);
}

double step_progress(int epoch, std::size_t step, std::size_t steps_per_epoch) {
  if (epoch < 1 || steps_per_epoch == 0 || step >= steps_per_epoch) {
    throw ContractError("invalid step position");
  }
  if (step + 1 == steps_per_epoch) return static_cast<double>(epoch);
  return static_cast<double>(epoch - 1) + static_cast<double>(step + 1) / static_cast<double>(steps_per_epoch);
}

std::vector<std::pair<int, double>> schedule_trace(const PhaseSchedule& s) {
  s.validate();
  std::vector<std::pair<int, double>> rows;
  rows.reserve(static_cast<std::size_t>(s.total_epochs));
  for (int e = 1; e <= s.total_epochs; ++e) rows.emplace_back(e, alpha_at(s, e));
  return rows;
}

std::string schedule_csv(const PhaseSchedule& s) {
  std::string out = "epoch,alpha\n";
  char buf[64];
  for (const auto& [epoch, alpha] : schedule_trace(s)) {
    std::snprintf(buf, sizeof buf, "%d,%.17g\n", epoch, alpha);
    out += buf;
  }
  return out;
}

std::string to_string(ScheduleGranularity g) {
  return g == ScheduleGranularity::PerEpoch ? "per_epoch" : "per_step";
}

ScheduleGranularity parse_schedule_granularity(const std::string& text) {
  if (text == "per_epoch") return ScheduleGranularity::PerEpoch;
  if (text == "per_step") return ScheduleGranularity::PerStep;
  throw ConfigError("unknown schedule granularity '" + text + "' (expected per_epoch or per_step)");
}

}  // namespace pea

#include "pea/model.hpp"

namespace pea {

template <typename T>
void apply(const PhaseSchedule& s, BasicModel<T>& model, double t) {
  model.set_alpha(alpha_at(s, t));
}

template void apply(const PhaseSchedule&, BasicModel<float>&, double);
template void apply(const PhaseSchedule&, BasicModel<double>&, double);

}  // namespace pea
