#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "pea/model.hpp"
#include "pea/scheduler.hpp"

namespace pea {
namespace {

PhaseSchedule sched(int i, int t, int total, ScheduleGranularity g = ScheduleGranularity::PerEpoch) {
  PhaseSchedule s;
  s.init_end = i;
  s.trans_end = t;
  s.total_epochs = total;
  s.granularity = g;
  return s;
}

TEST(Schedule, DefaultTraceSpotValues) {
  const auto s = default_phase_schedule();
  EXPECT_EQ(alpha_at(s, 1), 0.0);
  EXPECT_EQ(alpha_at(s, 5), 0.0);
  EXPECT_EQ(alpha_at(s, 6), 1.0 / 110.0);
  EXPECT_EQ(alpha_at(s, 60), 55.0 / 110.0);
  EXPECT_EQ(alpha_at(s, 114), 109.0 / 110.0);
  EXPECT_EQ(alpha_at(s, 115), 1.0);
  EXPECT_EQ(alpha_at(s, 120), 1.0);
}

TEST(Schedule, TraceMatchesClosedForm) {
  for (auto s : {default_phase_schedule(), sched(0, 1, 1), sched(0, 10, 10), sched(3, 4, 9), sched(2, 25, 30)}) {
    const auto trace = schedule_trace(s);
    ASSERT_EQ(trace.size(), static_cast<std::size_t>(s.total_epochs));
    double prev = 0.0;
    for (const auto& [e, a] : trace) {
      const double want = std::clamp((e - s.init_end) / static_cast<double>(s.trans_end - s.init_end), 0.0, 1.0);
      EXPECT_EQ(a, want);
      EXPECT_GE(a, prev);
      prev = a;
    }
    EXPECT_EQ(trace.back().second, 1.0);
  }
}

TEST(Schedule, CsvIsRoundTripExact) {
  const auto s = default_phase_schedule();
  std::istringstream in(schedule_csv(s));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "epoch,alpha");
  int e = 0;
  while (std::getline(in, line)) {
    ++e;
    const auto comma = line.find(',');
    EXPECT_EQ(std::stoi(line.substr(0, comma)), e);
    EXPECT_EQ(std::stod(line.substr(comma + 1)), alpha_at(s, e));
  }
  EXPECT_EQ(e, 120);
}

TEST(Schedule, PerEpochUsesContainingEpoch) {
  const auto s = sched(2, 6, 8);
  EXPECT_EQ(alpha_at(s, 2.01), alpha_at(s, 3));
  EXPECT_EQ(alpha_at(s, 3.0), 0.25);
  EXPECT_EQ(alpha_at(s, 0.0), 0.0);
}

TEST(Schedule, PerStepInterpolatesAndAgreesAtEpochEnds) {
  const auto st = sched(2, 6, 8, ScheduleGranularity::PerStep);
  const auto ep = sched(2, 6, 8);
  EXPECT_DOUBLE_EQ(alpha_at(st, 3.5), 0.375);
  for (int e = 0; e <= 8; ++e) EXPECT_EQ(alpha_at(st, e), alpha_at(ep, e));
  double prev = -1.0;
  for (int e = 1; e <= 8; ++e) {
    for (std::size_t k = 0; k < 7; ++k) {
      const double a = alpha_at(st, step_progress(e, k, 7));
      EXPECT_GE(a, prev);
      prev = a;
    }
  }
}

TEST(Schedule, StepProgress) {
  EXPECT_DOUBLE_EQ(step_progress(1, 0, 4), 0.25);
  EXPECT_EQ(step_progress(3, 3, 4), 3.0);
  EXPECT_THROW(step_progress(0, 0, 4), ContractError);
  EXPECT_THROW(step_progress(1, 4, 4), ContractError);
  EXPECT_THROW(step_progress(1, 0, 0), ContractError);
}

TEST(Schedule, Validation) {
  EXPECT_THROW(sched(5, 5, 10).validate(), ConfigError);
  EXPECT_THROW(sched(-1, 5, 10).validate(), ConfigError);
  EXPECT_THROW(sched(1, 11, 10).validate(), ConfigError);
  EXPECT_THROW(alpha_at(sched(1, 5, 10), 10.5), ContractError);
  EXPECT_THROW(alpha_at(sched(1, 5, 10), -0.1), ContractError);
  EXPECT_THROW(alpha_at(sched(1, 5, 10), std::nan("")), ContractError);
  EXPECT_THROW(parse_schedule_granularity("hourly"), ConfigError);
  EXPECT_EQ(parse_schedule_granularity("per_step"), ScheduleGranularity::PerStep);
}

TEST(Schedule, ApplyIsIdempotent) {
  ModelSpec spec;
  spec.slot = ActivationSlot::ensemble_of({}, 0.0);
  auto model = build<float>(spec, 3);
  const auto s = sched(1, 9, 10);
  apply(s, model, 5);
  apply(s, model, 5);
  for (auto* e : model.ensemble_layers()) EXPECT_EQ(e->alpha(), 0.5);
}

}  // namespace
}  // namespace pea
