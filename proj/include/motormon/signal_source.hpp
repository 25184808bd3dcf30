#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <vector>

#include "motormon/types.hpp"

namespace motormon {

struct SpeedSegment {
  double duration = 1.0;  // seconds
  double rpm_start = 600.0;
  double rpm_end = 600.0;
};

struct Harmonic {
  double amplitude = 0.0;  // m/s^2
  double phase = 0.0;      // radians
};

// Injected step on an auxiliary channel, active on [start, end).
struct StepInjection {
  ChannelKind kind = ChannelKind::Temperature;
  double start = 0.0;
  double end = 0.0;
  double delta = 0.0;
};

struct MotorProfile {
  std::vector<SpeedSegment> speed_segments;
  // order -> harmonic, one map per vibration axis (X, Y, Z).
  std::array<std::map<double, Harmonic>, 3> order_components;
  double noise_sigma = 0.0;
  double temperature_base = 40.0;
  double current_base = 10.0;
  double voltage_base = 380.0;
  double aux_noise_sigma = 0.0;
  unsigned pulses_per_rev = 1;
  std::vector<StepInjection> steps;
};

void validate_profile(const MotorProfile& profile);

// Closed-form cumulative shaft angle for piecewise-linear RPM. theta(0) = 0;
// past the last segment the final speed is held.
class ShaftAngle {
 public:
  explicit ShaftAngle(std::span<const SpeedSegment> segments);

  double angle(double t) const;
  double speed(double t) const;  // rad/s
  // Smallest t >= 0 with angle(t) == theta, for theta >= 0.
  double time_at(double theta) const;

 private:
  struct Piece {
    double t_start;
    double theta_start;
    double omega0;
    double alpha;
    double duration;  // +inf for the hold piece
  };
  std::size_t piece_for_time(double t) const;

  std::vector<Piece> pieces_;
};

// values[i] = sum_k A_k sin(k theta(t_i) + phi_k) + N(0, noise_sigma) with
// t_i = t0 + i / rate. Returned frame has channel_id 0 and sequence 0.
SampleFrame synth_vibration(const MotorProfile& profile, ChannelKind axis, double t0, std::size_t n,
                            double rate, std::mt19937_64& rng);

// Pulse times in [0, t_end) where theta crosses m * 2pi / pulses_per_rev.
TachPulseTrain synth_tach(const MotorProfile& profile, double t_end);

// Pulses with t in [t_begin, t_end).
std::vector<double> tach_pulses_between(const ShaftAngle& shaft, double delta_theta, double t_begin,
                                        double t_end);

// Index of the first sample at or after time t for a channel of the given rate.
std::int64_t sample_index_at(double t, double rate);

// Stateful per-channel generator. Frames cover consecutive half-open time
// windows; sample times are index/rate so frame boundaries never drift.
class ChannelSynth {
 public:
  ChannelSynth(const ChannelSpec& spec, const MotorProfile& profile, std::uint64_t seed);

  // Raw frame for [t_begin, t_end). Sampled channels may yield an empty
  // frame when the window holds no sample instant.
  SampleFrame next_frame(double t_begin, double t_end);

  const ChannelSpec& spec() const { return spec_; }

 private:
  double physical_value(double t);

  ChannelSpec spec_;
  const MotorProfile* profile_;
  ShaftAngle shaft_;
  std::mt19937_64 rng_;
  std::uint64_t sequence_ = 0;
};

}  // namespace motormon
