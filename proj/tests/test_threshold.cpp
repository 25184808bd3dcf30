#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "motormon/error.hpp"
#include "motormon/threshold.hpp"

using namespace motormon;

namespace {

CheckResult run(const std::vector<double>& v, const ThresholdSpec& spec, ThresholdState st = {}) {
  std::vector<double> t(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) t[i] = 0.1 * static_cast<double>(i);
  return check_samples(v, t, spec, std::move(st));
}

ThresholdSpec temp_spec(std::uint32_t min_violations = 1, double hysteresis = 0.0) {
  return {5, 0.0, 80.0, hysteresis, min_violations, ThresholdMode::Samples};
}

}  // namespace

TEST(Threshold, InRangeNoEvents) {
  EXPECT_TRUE(run({10, 20, 79.9, 0.0, 80.0}, temp_spec()).events.empty());
}

TEST(Threshold, ThirdConsecutiveViolationRaises) {
  auto r = run({79, 81, 82, 83, 84}, temp_spec(3));
  ASSERT_EQ(r.events.size(), 1u);
  const auto& e = r.events[0];
  EXPECT_EQ(e.kind, AlarmKind::HighLimit);
  EXPECT_DOUBLE_EQ(e.t, 0.1);          // first violating sample (81)
  EXPECT_DOUBLE_EQ(e.emitted_t, 0.30000000000000004);  // sample 83 completes the run
  EXPECT_DOUBLE_EQ(e.value, 81.0);
  EXPECT_DOUBLE_EQ(e.limit, 80.0);
  EXPECT_FALSE(e.is_clear());
}

TEST(Threshold, InterruptedRunDoesNotRaise) {
  EXPECT_TRUE(run({81, 82, 79, 81, 82, 50}, temp_spec(3)).events.empty());
}

TEST(Threshold, HysteresisPreventsChatter) {
  std::vector<double> v;
  for (int i = 0; i < 40; ++i) v.push_back(i % 2 ? 80.1 : 79.9);
  auto r = run(v, temp_spec(1, 1.0));
  ASSERT_EQ(r.events.size(), 1u);
  EXPECT_FALSE(r.events[0].is_clear());
}

TEST(Threshold, ClearNeedsReentryPastHysteresis) {
  auto r = run({85, 79.5, 79.0, 78.9}, temp_spec(1, 1.0));
  ASSERT_EQ(r.events.size(), 2u);
  EXPECT_TRUE(r.events[1].is_clear());
  EXPECT_DOUBLE_EQ(*r.events[1].cleared_t, 0.2);
  EXPECT_DOUBLE_EQ(r.events[1].t, r.events[0].t);
  EXPECT_GT(*r.events[1].cleared_t, r.events[1].t);
}

TEST(Threshold, LowLimit) {
  auto r = run({5, -1, -2, 3}, temp_spec());
  ASSERT_EQ(r.events.size(), 2u);
  EXPECT_EQ(r.events[0].kind, AlarmKind::LowLimit);
  EXPECT_DOUBLE_EQ(r.events[0].limit, 0.0);
  EXPECT_LT(r.events[0].value, r.events[0].limit);
}

TEST(Threshold, StateCarriesAcrossCalls) {
  auto spec = temp_spec(3);
  auto a = run({81, 82}, spec);
  EXPECT_TRUE(a.events.empty());
  std::vector<double> v{83};
  std::vector<double> t{5.0};
  auto b = check_samples(v, t, spec, a.state);
  ASSERT_EQ(b.events.size(), 1u);
  EXPECT_DOUBLE_EQ(b.events[0].t, 0.0);
}

TEST(Threshold, FrameRmsMode) {
  ThresholdSpec spec{1, -1.0, 0.5, 0.0, 1, ThresholdMode::FrameRms};
  SampleFrame f{1, 2.0, 1000.0, {}, 0};
  for (int i = 0; i < 1000; ++i) f.values.push_back(std::sin(2 * M_PI * 50.0 * i / 1000.0));
  // Peaks reach 1.0 but the RMS is 0.707.
  auto r = check_frame(f, spec, {});
  ASSERT_EQ(r.events.size(), 1u);
  EXPECT_NEAR(r.events[0].value, std::sqrt(0.5), 1e-9);
  EXPECT_DOUBLE_EQ(r.events[0].t, 2.0);
  spec.upper = 0.8;
  EXPECT_TRUE(check_frame(f, spec, {}).events.empty());
}

TEST(Threshold, RaiseClearAlternateAndViolateLimit) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(70.0, 12.0);
  std::vector<double> v(5000);
  for (auto& x : v) x = n(rng);
  for (double hyst : {0.0, 2.0}) {
    for (std::uint32_t mv : {1u, 3u}) {
      auto r = run(v, temp_spec(mv, hyst));
      std::map<AlarmKind, bool> active;
      for (const auto& e : r.events) {
        if (e.is_clear()) {
          EXPECT_TRUE(active[e.kind]);
          active[e.kind] = false;
          EXPECT_GT(*e.cleared_t, e.t);
        } else {
          EXPECT_FALSE(active[e.kind]);
          active[e.kind] = true;
          if (e.kind == AlarmKind::HighLimit) {
            EXPECT_GT(e.value, e.limit);
          } else {
            EXPECT_LT(e.value, e.limit);
          }
        }
      }
      EXPECT_EQ(r.events, run(v, temp_spec(mv, hyst)).events);
    }
  }
}

TEST(Threshold, InvalidSpecs) {
  EXPECT_THROW(validate_threshold({1, 5.0, 5.0, 0.0, 1, ThresholdMode::Samples}), Error);
  EXPECT_THROW(validate_threshold({1, 0.0, 5.0, -1.0, 1, ThresholdMode::Samples}), Error);
  EXPECT_THROW(validate_threshold({1, 0.0, 5.0, 0.0, 0, ThresholdMode::Samples}), Error);
  EXPECT_NO_THROW(validate_threshold({1, 0.0, 5.0, 1.0, 2, ThresholdMode::Samples}));
}

TEST(Combine, States) {
  EXPECT_EQ(combine({}, {}).overall, OverallState::Healthy);

  DiagnosisReport healthy;
  AlarmEvent high{5, AlarmKind::HighLimit, 90.0, 80.0, 1.0, std::nullopt, {}, 1.0};
  std::vector<AlarmEvent> ev{high};
  std::vector<DiagnosisReport> dh{healthy};
  auto w = combine(ev, dh);
  EXPECT_EQ(w.overall, OverallState::Warning);
  EXPECT_EQ(w.active_alarms.size(), 1u);

  auto cleared = high;
  cleared.cleared_t = 2.0;
  ev.push_back(cleared);
  EXPECT_EQ(combine(ev, dh).overall, OverallState::Healthy);

  DiagnosisReport faulty;
  faulty.verdict = Verdict::Faulty;
  faulty.flagged_orders = {10.0, 14.0};
  faulty.findings = {{10.0, 0.01, 0.5, 50.0, 0.05, true}, {14.0, 0.01, 0.4, 40.0, 0.05, true}};
  std::vector<DiagnosisReport> df{faulty};
  auto f = combine({}, df);
  EXPECT_EQ(f.overall, OverallState::Faulty);
  ASSERT_EQ(f.active_alarms.size(), 1u);
  EXPECT_EQ(f.active_alarms[0].kind, AlarmKind::OrderFault);
  EXPECT_EQ(f.active_alarms[0].orders, (std::vector<double>{10.0, 14.0}));
  EXPECT_DOUBLE_EQ(f.active_alarms[0].value, 0.5);
}

TEST(Combine, AddingViolationNeverDowngrades) {
  ThresholdSpec spec = temp_spec();
  std::vector<double> v{50, 60, 70};
  auto base = run(v, spec);
  auto before = combine(base.events, {}).overall;
  v.push_back(95.0);
  auto more = run(v, spec);
  EXPECT_GE(static_cast<int>(combine(more.events, {}).overall), static_cast<int>(before));
}
