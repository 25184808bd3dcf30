#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "motormon/order_analysis.hpp"
#include "motormon/recording.hpp"

namespace motormon {

struct AxisSpectrum {
  ChannelId channel_id = 0;
  ChannelKind kind = ChannelKind::VibrationX;
  OrderSpectrum spectrum;
};

// Order spectrum of every vibration channel in a recording, from the
// equal-angle samples the vibration data covers. At most `max_samples`
// resampled points feed the FFT.
// Fewer than 3 pulses -> InsufficientPulses; no covered grid point -> Coverage.
std::vector<AxisSpectrum> recording_spectra(const Recording& rec, unsigned pulses_per_rev, double theta_step,
                                            std::size_t max_samples = std::numeric_limits<std::size_t>::max());

// Samples that produced `s` (inverse of the single-sided bin count).
inline std::size_t spectrum_length(const OrderSpectrum& s) {
  return s.amplitudes.empty() ? 0 : (s.amplitudes.size() - 1) * 2;
}

}  // namespace motormon
