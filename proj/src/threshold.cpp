#include "motormon/threshold.hpp"

#include <algorithm>
#include <cmath>

#include "motormon/error.hpp"

namespace motormon {

std::string_view alarm_kind_name(AlarmKind kind) {
  switch (kind) {
    case AlarmKind::HighLimit: return "HighLimit";
    case AlarmKind::LowLimit: return "LowLimit";
    case AlarmKind::OrderFault: return "OrderFault";
  }
  return "?";
}

std::string_view overall_name(OverallState s) {
  switch (s) {
    case OverallState::Healthy: return "Healthy";
    case OverallState::Warning: return "Warning";
    case OverallState::Faulty: return "Faulty";
  }
  return "?";
}

void validate_threshold(const ThresholdSpec& spec) {
  const std::string where = "threshold for channel " + std::to_string(spec.channel_id) + ": ";
  if (!(spec.lower < spec.upper)) {
    throw Error(ErrorCategory::Config, where + "lower (" + std::to_string(spec.lower) +
                                           ") must be < upper (" + std::to_string(spec.upper) + ")");
  }
  if (!(spec.hysteresis >= 0.0) || 2.0 * spec.hysteresis > spec.upper - spec.lower) {
    throw Error(ErrorCategory::Config, where + "hysteresis must be in [0, (upper-lower)/2]");
  }
  if (spec.min_violations < 1) {
    throw Error(ErrorCategory::Config, where + "min_violations must be >= 1");
  }
}

namespace {

void step_tracker(LimitTracker& tr, bool violating, bool clear_zone, double t, double v,
                  const ThresholdSpec& spec, AlarmKind kind, double limit,
                  std::vector<AlarmEvent>& events) {
  if (tr.active) {
    if (clear_zone) {
      AlarmEvent clear = *tr.active;
      clear.cleared_t = t;
      clear.emitted_t = t;
      events.push_back(clear);
      tr.active.reset();
      tr.run = 0;
    }
    return;
  }
  if (!violating) {
    tr.run = 0;
    return;
  }
  if (tr.run == 0) {
    tr.first_t = t;
    tr.first_value = v;
  }
  if (++tr.run >= spec.min_violations) {
    AlarmEvent raise;
    raise.channel_id = spec.channel_id;
    raise.kind = kind;
    raise.value = tr.first_value;
    raise.limit = limit;
    raise.t = tr.first_t;
    raise.emitted_t = t;
    events.push_back(raise);
    tr.active = raise;
    tr.run = 0;
  }
}

}  // namespace

CheckResult check_samples(std::span<const double> values, std::span<const double> times,
                          const ThresholdSpec& spec, ThresholdState state) {
  CheckResult out{{}, std::move(state)};
  const double clear_lo = spec.lower + spec.hysteresis;
  const double clear_hi = spec.upper - spec.hysteresis;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    const double t = times[i];
    const bool clear_zone = v >= clear_lo && v <= clear_hi;
    step_tracker(out.state.high, v > spec.upper, clear_zone, t, v, spec, AlarmKind::HighLimit,
                 spec.upper, out.events);
    step_tracker(out.state.low, v < spec.lower, clear_zone, t, v, spec, AlarmKind::LowLimit,
                 spec.lower, out.events);
  }
  return out;
}

CheckResult check_frame(const SampleFrame& frame, const ThresholdSpec& spec, ThresholdState state) {
  if (frame.values.empty()) return {{}, std::move(state)};
  if (spec.mode == ThresholdMode::FrameRms) {
    double sq = 0.0;
    for (double v : frame.values) sq += v * v;
    const double rms = std::sqrt(sq / static_cast<double>(frame.values.size()));
    const double t = frame.t0;
    return check_samples(std::span(&rms, 1), std::span(&t, 1), spec, std::move(state));
  }
  std::vector<double> times(frame.values.size());
  for (std::size_t i = 0; i < times.size(); ++i) times[i] = frame.sample_time(i);
  return check_samples(frame.values, times, spec, std::move(state));
}

AlarmEvent order_fault_event(const DiagnosisReport& report) {
  AlarmEvent ev;
  ev.channel_id = report.channel_id;
  ev.kind = AlarmKind::OrderFault;
  ev.t = report.t;
  ev.emitted_t = report.t;
  ev.orders = report.flagged_orders;
  double best_excess = -1.0;
  for (const auto& f : report.findings) {
    if (!f.flagged) continue;
    const double excess = f.measured_amplitude - f.limit;
    if (excess > best_excess) {
      best_excess = excess;
      ev.value = f.measured_amplitude;
      ev.limit = f.limit;
    }
  }
  return ev;
}

MotorState combine(std::span<const AlarmEvent> limit_events,
                   std::span<const DiagnosisReport> diagnoses) {
  MotorState state;
  for (const auto& ev : limit_events) {
    auto same = [&](const AlarmEvent& a) {
      return a.channel_id == ev.channel_id && a.kind == ev.kind && a.t == ev.t;
    };
    if (ev.is_clear()) {
      std::erase_if(state.active_alarms, same);
    } else if (std::none_of(state.active_alarms.begin(), state.active_alarms.end(), same)) {
      state.active_alarms.push_back(ev);
    }
  }
  bool limit_active = !state.active_alarms.empty();
  bool order_fault = false;

  if (!diagnoses.empty()) {
    DiagnosisReport merged;
    for (const auto& d : diagnoses) {
      merged.findings.insert(merged.findings.end(), d.findings.begin(), d.findings.end());
      for (double o : d.flagged_orders) {
        if (std::find(merged.flagged_orders.begin(), merged.flagged_orders.end(), o) ==
            merged.flagged_orders.end()) {
          merged.flagged_orders.push_back(o);
        }
      }
      merged.t = std::max(merged.t, d.t);
      if (d.verdict == Verdict::Faulty) {
        state.active_alarms.push_back(order_fault_event(d));
        order_fault = true;
      }
    }
    std::sort(merged.flagged_orders.begin(), merged.flagged_orders.end());
    merged.verdict = merged.flagged_orders.empty() ? Verdict::Healthy : Verdict::Faulty;
    state.last_diagnosis = std::move(merged);
  }

  if (order_fault) {
    state.overall = OverallState::Faulty;
  } else if (limit_active) {
    state.overall = OverallState::Warning;
  }
  return state;
}

}  // namespace motormon
