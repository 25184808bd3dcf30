#include "motormon/signal_source.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "motormon/error.hpp"

namespace motormon {

namespace {

constexpr double kRpmToRadPerSec = 2.0 * std::numbers::pi / 60.0;

double vibration_value(const std::map<double, Harmonic>& components, double theta) {
  double v = 0.0;
  for (const auto& [order, h] : components) v += h.amplitude * std::sin(order * theta + h.phase);
  return v;
}

}  // namespace

void validate_profile(const MotorProfile& profile) {
  if (profile.speed_segments.empty()) {
    throw Error(ErrorCategory::Config, "profile: at least one speed segment is required");
  }
  for (std::size_t i = 0; i < profile.speed_segments.size(); ++i) {
    const auto& s = profile.speed_segments[i];
    if (!(s.duration > 0.0) || !(s.rpm_start > 0.0) || !(s.rpm_end > 0.0) ||
        !std::isfinite(s.duration) || !std::isfinite(s.rpm_start) || !std::isfinite(s.rpm_end)) {
      throw Error(ErrorCategory::Config, "profile.segments[" + std::to_string(i) +
                                             "]: duration and rpm values must be > 0");
    }
  }
  for (const auto& axis : profile.order_components) {
    for (const auto& [order, h] : axis) {
      if (!(order > 0.0)) throw Error(ErrorCategory::Config, "profile.orders: order must be > 0");
      if (!(h.amplitude >= 0.0)) {
        throw Error(ErrorCategory::Config, "profile.orders: amplitude must be >= 0");
      }
    }
  }
  if (!(profile.noise_sigma >= 0.0) || !(profile.aux_noise_sigma >= 0.0)) {
    throw Error(ErrorCategory::Config, "profile: noise sigma must be >= 0");
  }
  if (profile.pulses_per_rev < 1) {
    throw Error(ErrorCategory::Config, "profile.pulses_per_rev must be >= 1");
  }
}

ShaftAngle::ShaftAngle(std::span<const SpeedSegment> segments) {
  double t = 0.0;
  double theta = 0.0;
  double last_omega = 0.0;
  for (const auto& s : segments) {
    const double w0 = s.rpm_start * kRpmToRadPerSec;
    const double w1 = s.rpm_end * kRpmToRadPerSec;
    const double alpha = (w1 - w0) / s.duration;
    pieces_.push_back({t, theta, w0, alpha, s.duration});
    theta += w0 * s.duration + 0.5 * alpha * s.duration * s.duration;
    t += s.duration;
    last_omega = w1;
  }
  if (pieces_.empty()) throw Error(ErrorCategory::Config, "shaft profile has no segments");
  pieces_.push_back({t, theta, last_omega, 0.0, std::numeric_limits<double>::infinity()});
}

std::size_t ShaftAngle::piece_for_time(double t) const {
  auto it = std::upper_bound(pieces_.begin(), pieces_.end(), t,
                             [](double v, const Piece& p) { return v < p.t_start; });
  if (it == pieces_.begin()) return 0;
  return static_cast<std::size_t>(std::distance(pieces_.begin(), it) - 1);
}

double ShaftAngle::angle(double t) const {
  const Piece& p = pieces_[piece_for_time(t)];
  const double tau = t - p.t_start;
  return p.theta_start + p.omega0 * tau + 0.5 * p.alpha * tau * tau;
}

double ShaftAngle::speed(double t) const {
  const Piece& p = pieces_[piece_for_time(t)];
  return p.omega0 + p.alpha * (t - p.t_start);
}

double ShaftAngle::time_at(double theta) const {
  auto it = std::upper_bound(pieces_.begin(), pieces_.end(), theta,
                             [](double v, const Piece& p) { return v < p.theta_start; });
  const Piece& p = it == pieces_.begin() ? pieces_.front() : *std::prev(it);
  const double d = theta - p.theta_start;
  // Root of 0.5*alpha*tau^2 + omega0*tau - d = 0 on the increasing branch,
  // written without the b^2 - 4ac cancellation.
  const double disc = p.omega0 * p.omega0 + 2.0 * p.alpha * d;
  const double tau = 2.0 * d / (p.omega0 + std::sqrt(std::max(disc, 0.0)));
  return p.t_start + tau;
}

SampleFrame synth_vibration(const MotorProfile& profile, ChannelKind axis, double t0, std::size_t n,
                            double rate, std::mt19937_64& rng) {
  if (!is_vibration(axis)) {
    throw Error(ErrorCategory::Config, "synth_vibration requires a vibration axis");
  }
  if (!(rate >= 1000.0 && rate <= 25000.0)) {
    throw Error(ErrorCategory::Config,
                "vibration rate " + std::to_string(rate) + " outside [1000, 25000]");
  }
  if (n == 0) throw Error(ErrorCategory::Config, "synth_vibration requires n > 0");

  const ShaftAngle shaft(profile.speed_segments);
  const auto& components = profile.order_components[vibration_axis(axis)];
  std::normal_distribution<double> noise(0.0, profile.noise_sigma > 0 ? profile.noise_sigma : 1.0);

  SampleFrame frame;
  frame.t0 = t0;
  frame.sample_rate = rate;
  frame.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = t0 + static_cast<double>(i) / rate;
    double v = vibration_value(components, shaft.angle(t));
    if (profile.noise_sigma > 0) v += noise(rng);
    frame.values[i] = v;
  }
  return frame;
}

std::vector<double> tach_pulses_between(const ShaftAngle& shaft, double delta_theta, double t_begin,
                                        double t_end) {
  std::vector<double> out;
  if (!(t_end > t_begin)) return out;
  const double start_angle = std::max(0.0, shaft.angle(std::max(t_begin, 0.0)));
  auto m = static_cast<std::int64_t>(std::floor(start_angle / delta_theta)) - 1;
  m = std::max<std::int64_t>(m, 0);
  for (;; ++m) {
    const double t = shaft.time_at(static_cast<double>(m) * delta_theta);
    if (t < t_begin) continue;
    if (t >= t_end) break;
    out.push_back(t);
  }
  return out;
}

TachPulseTrain synth_tach(const MotorProfile& profile, double t_end) {
  if (!(t_end > 0.0)) throw Error(ErrorCategory::Config, "synth_tach requires t_end > 0");
  const ShaftAngle shaft(profile.speed_segments);
  TachPulseTrain train;
  train.delta_theta = 2.0 * std::numbers::pi / profile.pulses_per_rev;
  train.times = tach_pulses_between(shaft, train.delta_theta, 0.0, t_end);
  return train;
}

std::int64_t sample_index_at(double t, double rate) {
  return static_cast<std::int64_t>(std::ceil(t * rate - 1e-9));
}

ChannelSynth::ChannelSynth(const ChannelSpec& spec, const MotorProfile& profile, std::uint64_t seed)
    : spec_(spec), profile_(&profile), shaft_(profile.speed_segments) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(spec.id), static_cast<std::uint32_t>(spec.kind)};
  rng_.seed(seq);
}

double ChannelSynth::physical_value(double t) {
  const MotorProfile& p = *profile_;
  double base = 0.0;
  switch (spec_.kind) {
    case ChannelKind::Temperature: base = p.temperature_base; break;
    case ChannelKind::Current: base = p.current_base; break;
    case ChannelKind::Voltage: base = p.voltage_base; break;
    default: break;
  }
  for (const auto& s : p.steps) {
    if (s.kind == spec_.kind && t >= s.start && t < s.end) base += s.delta;
  }
  if (p.aux_noise_sigma > 0) {
    std::normal_distribution<double> noise(0.0, p.aux_noise_sigma);
    base += noise(rng_);
  }
  return base;
}

SampleFrame ChannelSynth::next_frame(double t_begin, double t_end) {
  SampleFrame frame;
  frame.channel_id = spec_.id;
  frame.sample_rate = spec_.sample_rate;
  frame.sequence = sequence_++;

  if (spec_.kind == ChannelKind::Tachometer) {
    frame.t0 = t_begin;
    frame.values = tach_pulses_between(
        shaft_, 2.0 * std::numbers::pi / profile_->pulses_per_rev, t_begin, t_end);
    return frame;
  }

  const std::int64_t i0 = sample_index_at(t_begin, spec_.sample_rate);
  const std::int64_t i1 = sample_index_at(t_end, spec_.sample_rate);
  frame.t0 = i1 > i0 ? static_cast<double>(i0) / spec_.sample_rate : t_begin;
  if (i1 <= i0) return frame;
  frame.values.resize(static_cast<std::size_t>(i1 - i0));

  if (is_vibration(spec_.kind)) {
    const auto& components = profile_->order_components[vibration_axis(spec_.kind)];
    std::normal_distribution<double> noise(0.0, profile_->noise_sigma);
    for (std::int64_t i = i0; i < i1; ++i) {
      const double t = static_cast<double>(i) / spec_.sample_rate;
      double v = vibration_value(components, shaft_.angle(t));
      if (profile_->noise_sigma > 0) v += noise(rng_);
      frame.values[static_cast<std::size_t>(i - i0)] = (v - spec_.offset) / spec_.gain;
    }
  } else {
    for (std::int64_t i = i0; i < i1; ++i) {
      const double t = static_cast<double>(i) / spec_.sample_rate;
      frame.values[static_cast<std::size_t>(i - i0)] =
          (physical_value(t) - spec_.offset) / spec_.gain;
    }
  }
  return frame;
}

}  // namespace motormon
