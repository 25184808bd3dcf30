#include "motormon/offline.hpp"

#include <algorithm>

#include "motormon/error.hpp"

namespace motormon {

std::vector<AxisSpectrum> recording_spectra(const Recording& rec, unsigned pulses_per_rev, double theta_step,
                                            std::size_t max_samples) {
  const TachPulseTrain train = tach_pulses(rec, pulses_per_rev);
  if (train.times.size() < 3) {
    throw Error(ErrorCategory::InsufficientPulses,
                "recording holds " + std::to_string(train.times.size()) + " tachometer pulses, need at least 3");
  }
  const ResampleGrid grid = resample_grid(train, theta_step);

  std::vector<AxisSpectrum> out;
  for (const auto& c : rec.channels) {
    if (!is_vibration(c.kind)) continue;
    const ContinuousSignal sig = concat_channel(rec, c.id);
    const double last = sig.values.empty() ? sig.t0 - 1.0
                                           : sig.t0 + static_cast<double>(sig.values.size() - 1) / sig.rate;
    const auto& times = grid.times;
    const auto first = std::find_if(times.begin(), times.end(), [&](double t) { return t >= sig.t0; });
    const auto end = std::find_if(first, times.end(), [&](double t) { return t > last; });
    if (first == end) {
      resample_signal(sig.values, sig.t0, sig.rate, times);  // throws the coverage error
    }
    const auto available = std::min(static_cast<std::size_t>(end - first), max_samples);
    const std::size_t n = fft_block_length(available, theta_step);
    const std::span<const double> window(&*first, n);
    const auto samples = resample_signal(sig.values, sig.t0, sig.rate, window);
    out.push_back({c.id, c.kind, order_spectrum(samples, theta_step)});
  }
  if (out.empty()) throw Error(ErrorCategory::Coverage, "recording holds no vibration channel");
  return out;
}

}  // namespace motormon
