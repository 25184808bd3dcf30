#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "motormon/order_analysis.hpp"
#include "motormon/types.hpp"

namespace motormon {

enum class AlarmKind : std::uint8_t { HighLimit = 0, LowLimit = 1, OrderFault = 2 };

std::string_view alarm_kind_name(AlarmKind kind);

// What a vibration channel's limits are applied to.
enum class ThresholdMode : std::uint8_t { Samples, FrameRms };

struct ThresholdSpec {
  ChannelId channel_id = 0;
  double lower = 0.0;
  double upper = 1.0;
  double hysteresis = 0.0;
  std::uint32_t min_violations = 1;
  ThresholdMode mode = ThresholdMode::Samples;
};

void validate_threshold(const ThresholdSpec& spec);

// A raise carries no cleared_t; the matching clear repeats the raise fields
// and sets cleared_t. `t` is the first violating sample; `emitted_t` is the
// sample whose arrival produced the event and decides its archive window.
struct AlarmEvent {
  ChannelId channel_id = 0;
  AlarmKind kind = AlarmKind::HighLimit;
  double value = 0.0;
  double limit = 0.0;
  double t = 0.0;
  std::optional<double> cleared_t;
  std::vector<double> orders;  // OrderFault only
  double emitted_t = 0.0;

  bool is_clear() const { return cleared_t.has_value(); }
  friend bool operator==(const AlarmEvent&, const AlarmEvent&) = default;
};

struct LimitTracker {
  std::uint32_t run = 0;  // consecutive violations so far
  double first_t = 0.0;
  double first_value = 0.0;
  std::optional<AlarmEvent> active;
};

struct ThresholdState {
  LimitTracker high;
  LimitTracker low;
};

struct CheckResult {
  std::vector<AlarmEvent> events;
  ThresholdState state;
};

// Applies the raise/clear rule to (time, value) samples in order.
CheckResult check_samples(std::span<const double> values, std::span<const double> times,
                          const ThresholdSpec& spec, ThresholdState state);

// Frame in physical units. FrameRms mode checks one RMS value stamped at t0.
CheckResult check_frame(const SampleFrame& frame, const ThresholdSpec& spec, ThresholdState state);

enum class OverallState : std::uint8_t { Healthy, Warning, Faulty };

std::string_view overall_name(OverallState s);

struct MotorState {
  OverallState overall = OverallState::Healthy;
  std::vector<AlarmEvent> active_alarms;
  std::optional<DiagnosisReport> last_diagnosis;
};

// Active alarms = raises in `limit_events` with no later clear, plus one
// OrderFault per Faulty diagnosis.
MotorState combine(std::span<const AlarmEvent> limit_events,
                   std::span<const DiagnosisReport> diagnoses);

// OrderFault alarm describing a Faulty report: value and limit belong to the
// flagged order with the largest excess.
AlarmEvent order_fault_event(const DiagnosisReport& report);

}  // namespace motormon
