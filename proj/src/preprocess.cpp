#include "motormon/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "motormon/error.hpp"

namespace motormon {

KalmanStep kalman_step(const KalmanState& state, double z) {
  if (!std::isfinite(z)) {
    throw Error(ErrorCategory::DataQuality, "non-finite measurement rejected");
  }
  const double p_prior = state.p + state.q;
  const double k = p_prior / (p_prior + state.r);
  KalmanStep out;
  out.state = state;
  out.state.x_hat = state.x_hat + k * (z - state.x_hat);
  out.state.p = (1.0 - k) * p_prior;
  out.filtered = out.state.x_hat;
  out.gain = k;
  return out;
}

PhysicalResult to_physical(const SampleFrame& frame, const ChannelSpec& spec,
                           const ChannelFilterState& state) {
  if (frame.channel_id != spec.id) {
    throw Error(ErrorCategory::Routing, "frame for channel " + std::to_string(frame.channel_id) +
                                            " routed to channel " + std::to_string(spec.id));
  }
  if (!std::all_of(frame.values.begin(), frame.values.end(),
                   [](double v) { return std::isfinite(v); })) {
    throw Error(ErrorCategory::DataQuality, "channel " + std::to_string(spec.id) + " frame " +
                                                std::to_string(frame.sequence) +
                                                " contains a non-finite sample");
  }

  PhysicalResult out{frame, state};
  auto& values = out.frame.values;
  if (!spec.filter.enabled) {
    for (auto& v : values) v = spec.gain * v + spec.offset;
    return out;
  }

  std::size_t i = 0;
  if (!out.state.kalman && !values.empty()) {
    out.state.kalman = KalmanState{values[0], spec.filter.r, spec.filter.q, spec.filter.r};
    values[0] = spec.gain * values[0] + spec.offset;
    i = 1;
  }
  for (; i < values.size(); ++i) {
    auto step = kalman_step(*out.state.kalman, values[i]);
    out.state.kalman = step.state;
    values[i] = spec.gain * step.filtered + spec.offset;
  }
  return out;
}

}  // namespace motormon
