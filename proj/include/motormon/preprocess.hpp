#pragma once

#include <optional>

#include "motormon/types.hpp"

namespace motormon {

// Scalar random-walk Kalman filter state (raw units).
struct KalmanState {
  double x_hat = 0.0;
  double p = 1.0;
  double q = 0.0;
  double r = 1.0;
};

struct KalmanStep {
  KalmanState state;
  double filtered = 0.0;
  double gain = 0.0;
};

// predict: p- = p + q; K = p- / (p- + r); x' = x + K (z - x); p' = (1 - K) p-.
// Non-finite z throws Error(DataQuality).
KalmanStep kalman_step(const KalmanState& state, double z);

// Filter state carried across frames of one channel. Empty until the first
// measurement, which seeds x_hat = z and p = r.
struct ChannelFilterState {
  std::optional<KalmanState> kalman;
};

struct PhysicalResult {
  SampleFrame frame;
  ChannelFilterState state;
};

// value -> gain * kalman(value) + offset (or gain * value + offset when the
// channel filter is disabled). Timestamps and sequence are preserved. A frame
// with any non-finite value is rejected whole and the state is left as is.
PhysicalResult to_physical(const SampleFrame& frame, const ChannelSpec& spec,
                           const ChannelFilterState& state);

}  // namespace motormon
