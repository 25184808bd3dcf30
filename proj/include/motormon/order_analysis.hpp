#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "motormon/types.hpp"

namespace motormon {

// Quadratic shaft-angle model theta(t) = b0 + b1 t + b2 t^2 fitted to one
// 3-pulse window, with angles measured from the window's first pulse.
struct PhaseFitCoeffs {
  double b0 = 0.0;  // rad
  double b1 = 0.0;  // rad/s
  double b2 = 0.0;  // rad/s^2
  double t_start = 0.0;
  double t_end = 0.0;

  double angle(double t) const { return b0 + b1 * t + b2 * t * t; }
  double speed(double t) const { return b1 + 2.0 * b2 * t; }
};

// Below this |b2| the model is treated as constant speed.
inline constexpr double kB2Epsilon = 1e-9;

// Solves theta(t1) = 0, theta(t2) = dtheta, theta(t3) = 2 dtheta.
// Throws SingularWindow when a pulse gap is below 1e-9 s and InvalidWindow
// when the fitted speed is not positive across the window.
PhaseFitCoeffs fit_phase(const std::array<double, 3>& pulse_times, double delta_theta);

// Time at which the fitted shaft reaches `theta`, on the increasing branch:
//   t = (sqrt(4 b2 (theta - b0) + b1^2) - b1) / (2 b2)
// evaluated in its rationalized form 2 (theta - b0) / (b1 + sqrt(...)) when
// b1 >= 0, which stays exact as b2 -> 0.
double invert_phase(const PhaseFitCoeffs& coeffs, double theta);

struct ResampleGrid {
  double theta_step = 0.0;
  double theta0 = 0.0;  // angle of times[0], relative to the first pulse
  std::vector<double> times;
};

// Equal-angle sample instants over the whole pulse train, one sliding
// 3-pulse window per pulse gap.
ResampleGrid resample_grid(const TachPulseTrain& pulses, double theta_step);

// Linear interpolation of a uniformly sampled signal at the grid times.
// Throws CoverageError naming the first grid index outside the signal span.
std::vector<double> resample_signal(std::span<const double> values, double t0, double rate,
                                    std::span<const double> times);

struct OrderSpectrum {
  double order_resolution = 0.0;  // orders per bin
  double revolutions = 0.0;
  std::vector<double> amplitudes;

  double order_at(std::size_t bin) const { return static_cast<double>(bin) * order_resolution; }
  double max_order() const { return order_at(amplitudes.empty() ? 0 : amplitudes.size() - 1); }
};

// Hann-windowed single-sided amplitude spectrum of a real sequence:
// 2|X_k| / (N * 0.5) for interior bins, |X_k| / (N * 0.5) at DC and Nyquist.
std::vector<double> amplitude_spectrum(std::span<const double> samples);

// Amplitude versus order for angle-domain samples spaced theta_step apart.
OrderSpectrum order_spectrum(std::span<const double> angle_samples, double theta_step);

// Largest power-of-two sample count <= available spanning whole revolutions.
// Requires 2pi/theta_step to be a power-of-two integer.
std::size_t fft_block_length(std::size_t available, double theta_step);

// True when 2pi/theta_step is a power-of-two integer.
bool is_power_of_two_step(double theta_step);

enum class Verdict : std::uint8_t { Healthy, Faulty };

struct OrderFinding {
  double order = 0.0;
  double healthy_amplitude = 0.0;
  double measured_amplitude = 0.0;
  double ratio = 0.0;
  double limit = 0.0;  // max(ratio_threshold * healthy, floor)
  bool flagged = false;
};

struct DiagnosisReport {
  std::vector<OrderFinding> findings;
  Verdict verdict = Verdict::Healthy;
  std::vector<double> flagged_orders;
  ChannelId channel_id = 0;  // analyzed axis, when known
  double t = 0.0;            // end of the analyzed block
};

// Per watched order, the max amplitude within +/-0.5 order is compared:
// flagged when measured > max(ratio_threshold * baseline, floor).
DiagnosisReport diagnose(const OrderSpectrum& measured, const OrderSpectrum& baseline,
                         std::span<const double> watch_orders, double ratio_threshold,
                         double floor);

// All-zero spectrum on the same order axis; stands in for a missing baseline.
OrderSpectrum zero_baseline(const OrderSpectrum& like);

}  // namespace motormon
