#include "motormon/order_analysis.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>

#include "motormon/error.hpp"

namespace motormon {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kMinPulseGap = 1e-9;

// FFTW planning is not thread-safe.
std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

PhaseFitCoeffs fit_phase(const std::array<double, 3>& t, double delta_theta) {
  if (!(delta_theta > 0.0)) {
    throw Error(ErrorCategory::InvalidWindow, "delta_theta must be > 0");
  }
  const double h1 = t[1] - t[0];
  const double h2 = t[2] - t[1];
  if (!(h1 >= kMinPulseGap) || !(h2 >= kMinPulseGap)) {
    throw Error(ErrorCategory::SingularWindow,
                "pulse gaps below 1e-9 s in window starting at t=" + std::to_string(t[0]));
  }

  // Newton divided differences in window-local time s = t - t1.
  const double f12 = delta_theta / h1;
  const double f23 = delta_theta / h2;
  const double c2 = (f23 - f12) / (h1 + h2);
  const double c1 = f12 - c2 * h1;
  const double end_speed = c1 + 2.0 * c2 * (h1 + h2);
  if (!(c1 > 0.0) || !(end_speed > 0.0)) {
    throw Error(ErrorCategory::InvalidWindow,
                "fit implies shaft reversal in window starting at t=" + std::to_string(t[0]));
  }

  PhaseFitCoeffs out;
  out.b2 = c2;
  out.b1 = c1 - 2.0 * c2 * t[0];
  out.b0 = t[0] * (c2 * t[0] - c1);
  out.t_start = t[0];
  out.t_end = t[2];
  return out;
}

double invert_phase(const PhaseFitCoeffs& c, double theta) {
  const double d = theta - c.b0;
  const bool tiny_b2 = std::abs(c.b2) < kB2Epsilon;
  if (tiny_b2 && std::abs(c.b1) < 1e-12) {
    throw Error(ErrorCategory::StalledShaft, "b1 and b2 both vanish");
  }
  if (tiny_b2 && c.b1 < 0.0) {
    throw Error(ErrorCategory::InvalidWindow, "constant-speed fit with negative speed");
  }

  const double disc = c.b1 * c.b1 + 4.0 * c.b2 * d;
  if (disc < 0.0) {
    throw Error(ErrorCategory::OutOfRange,
                "angle " + std::to_string(theta) + " rad is beyond the fitted window's reach");
  }
  const double root = std::sqrt(disc);
  if (c.b1 >= 0.0) {
    const double denom = c.b1 + root;
    if (denom == 0.0) throw Error(ErrorCategory::StalledShaft, "zero shaft speed at angle");
    return 2.0 * d / denom;
  }
  if (!(c.b2 > 0.0)) {
    throw Error(ErrorCategory::OutOfRange, "no increasing-branch root for angle");
  }
  return (root - c.b1) / (2.0 * c.b2);
}

ResampleGrid resample_grid(const TachPulseTrain& pulses, double theta_step) {
  const std::size_t n = pulses.times.size();
  if (n < 3) {
    throw Error(ErrorCategory::InsufficientPulses,
                "need at least 3 tach pulses, got " + std::to_string(n));
  }
  const double dtheta = pulses.delta_theta;
  if (!(theta_step > 0.0) || theta_step > dtheta * (1.0 + 1e-12)) {
    throw Error(ErrorCategory::Validation, "theta_step must satisfy 0 < theta_step <= delta_theta");
  }

  const double total = static_cast<double>(n - 1) * dtheta;
  const auto count = static_cast<std::size_t>(std::floor(total / theta_step + 1e-9)) + 1;
  const std::size_t last_window = n - 3;

  ResampleGrid grid;
  grid.theta_step = theta_step;
  grid.times.reserve(count);

  std::size_t fitted = std::numeric_limits<std::size_t>::max();
  PhaseFitCoeffs fit;
  for (std::size_t g = 0; g < count; ++g) {
    const double angle = static_cast<double>(g) * theta_step;
    const auto j = std::min(last_window, static_cast<std::size_t>(std::floor(angle / dtheta + 1e-12)));
    if (j != fitted) {
      fit = fit_phase({pulses.times[j], pulses.times[j + 1], pulses.times[j + 2]}, dtheta);
      fitted = j;
    }
    const double local = std::max(0.0, angle - static_cast<double>(j) * dtheta);
    const double t = invert_phase(fit, local);
    if (!grid.times.empty() && !(t > grid.times.back())) {
      throw Error(ErrorCategory::InvalidWindow,
                  "resample times not increasing at grid index " + std::to_string(g));
    }
    grid.times.push_back(t);
  }
  return grid;
}

std::vector<double> resample_signal(std::span<const double> values, double t0, double rate,
                                    std::span<const double> times) {
  const std::size_t n = values.size();
  std::vector<double> out;
  out.reserve(times.size());
  // Half a nanosecond of slack absorbs rounding at the span ends.
  const double slack = 5e-10 * rate;
  for (std::size_t g = 0; g < times.size(); ++g) {
    const double u = (times[g] - t0) * rate;
    if (n < 2 || u < -slack || u > static_cast<double>(n - 1) + slack) {
      throw CoverageError(g, times[g]);
    }
    const double clamped = std::clamp(u, 0.0, static_cast<double>(n - 1));
    const auto i = std::min(static_cast<std::size_t>(clamped), n - 2);
    const double frac = clamped - static_cast<double>(i);
    out.push_back(values[i] + frac * (values[i + 1] - values[i]));
  }
  return out;
}

std::vector<double> amplitude_spectrum(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 8) {
    throw Error(ErrorCategory::InsufficientData,
                "spectrum needs at least 8 samples, got " + std::to_string(n));
  }
  const std::size_t bins = n / 2 + 1;

  double* in = fftw_alloc_real(n);
  fftw_complex* out = fftw_alloc_complex(bins);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(n));
    in[i] = samples[i] * w;
  }
  {
    std::lock_guard lock(fftw_mutex());
    fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
  }

  // Periodic Hann has coherent gain exactly 0.5.
  const double norm = static_cast<double>(n) * 0.5;
  std::vector<double> amp(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    const double mag = std::hypot(out[k][0], out[k][1]);
    const bool edge = k == 0 || (n % 2 == 0 && k == n / 2);
    amp[k] = (edge ? 1.0 : 2.0) * mag / norm;
  }
  fftw_free(in);
  fftw_free(out);
  return amp;
}

OrderSpectrum order_spectrum(std::span<const double> angle_samples, double theta_step) {
  if (!(theta_step > 0.0)) throw Error(ErrorCategory::Validation, "theta_step must be > 0");
  OrderSpectrum s;
  s.amplitudes = amplitude_spectrum(angle_samples);
  s.revolutions = static_cast<double>(angle_samples.size()) * theta_step / kTwoPi;
  s.order_resolution = 1.0 / s.revolutions;
  return s;
}

bool is_power_of_two_step(double theta_step) {
  if (!(theta_step > 0.0)) return false;
  const double spr = kTwoPi / theta_step;
  const double rounded = std::round(spr);
  if (rounded < 1.0 || std::abs(spr - rounded) > 1e-9 * rounded) return false;
  const auto k = static_cast<std::uint64_t>(rounded);
  return (k & (k - 1)) == 0;
}

std::size_t fft_block_length(std::size_t available, double theta_step) {
  if (!is_power_of_two_step(theta_step)) {
    throw Error(ErrorCategory::Validation,
                "2pi/theta_step must be a power-of-two integer for whole-revolution FFT blocks");
  }
  const auto spr = static_cast<std::size_t>(std::round(kTwoPi / theta_step));
  if (available < spr || available < 8) {
    throw Error(ErrorCategory::InsufficientData,
                "need at least one revolution (" + std::to_string(spr) + " samples), have " +
                    std::to_string(available));
  }
  std::size_t n = 1;
  while (n * 2 <= available) n *= 2;
  return std::max(n, spr);
}

DiagnosisReport diagnose(const OrderSpectrum& measured, const OrderSpectrum& baseline,
                         std::span<const double> watch_orders, double ratio_threshold,
                         double floor) {
  if (!(baseline.order_resolution > 0.0) ||
      std::abs(measured.order_resolution - baseline.order_resolution) >
          0.01 * baseline.order_resolution) {
    throw Error(ErrorCategory::Comparability,
                "order resolutions differ: " + std::to_string(measured.order_resolution) + " vs " +
                    std::to_string(baseline.order_resolution));
  }

  auto band_max = [](const OrderSpectrum& s, double order) {
    double best = 0.0;
    for (std::size_t k = 0; k < s.amplitudes.size(); ++k) {
      if (std::abs(s.order_at(k) - order) <= 0.5 + 1e-9) best = std::max(best, s.amplitudes[k]);
    }
    return best;
  };

  DiagnosisReport report;
  const double reach = std::min(measured.max_order(), baseline.max_order());
  for (double order : watch_orders) {
    if (order - 0.5 < 0.0 || order + 0.5 > reach + 1e-9) {
      throw Error(ErrorCategory::OutOfRange,
                  "watched order " + std::to_string(order) + " outside spectral range");
    }
    OrderFinding f;
    f.order = order;
    f.healthy_amplitude = band_max(baseline, order);
    f.measured_amplitude = band_max(measured, order);
    if (f.healthy_amplitude > 0.0) {
      f.ratio = f.measured_amplitude / f.healthy_amplitude;
    } else {
      f.ratio = f.measured_amplitude > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
    }
    f.limit = std::max(ratio_threshold * f.healthy_amplitude, floor);
    f.flagged = f.measured_amplitude > f.limit;
    if (f.flagged) report.flagged_orders.push_back(order);
    report.findings.push_back(f);
  }
  report.verdict = report.flagged_orders.empty() ? Verdict::Healthy : Verdict::Faulty;
  return report;
}

OrderSpectrum zero_baseline(const OrderSpectrum& like) {
  OrderSpectrum z = like;
  std::fill(z.amplitudes.begin(), z.amplitudes.end(), 0.0);
  return z;
}

}  // namespace motormon
