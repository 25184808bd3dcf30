#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace motormon {

using ChannelId = std::uint16_t;

// Wire/recording codes are the enumerator values; keep them stable.
enum class ChannelKind : std::uint8_t {
  VibrationX = 0,
  VibrationY = 1,
  VibrationZ = 2,
  Tachometer = 3,
  Temperature = 4,
  Current = 5,
  Voltage = 6,
};

std::string_view kind_name(ChannelKind kind);
std::optional<ChannelKind> parse_kind(std::string_view name);
std::optional<ChannelKind> kind_from_code(std::uint8_t code);

constexpr bool is_vibration(ChannelKind k) {
  return k == ChannelKind::VibrationX || k == ChannelKind::VibrationY ||
         k == ChannelKind::VibrationZ;
}

constexpr int vibration_axis(ChannelKind k) { return static_cast<int>(k); }

// Per-channel Kalman settings. Vibration channels default to bypass so the
// order components reach the analysis untouched.
struct FilterConfig {
  bool enabled = false;
  double q = 1e-4;
  double r = 1.0;
};

struct ChannelSpec {
  ChannelId id = 0;
  ChannelKind kind = ChannelKind::VibrationX;
  double sample_rate = 1000.0;
  double gain = 1.0;
  double offset = 0.0;
  FilterConfig filter{};
};

// Throws Error(Config) naming the violated limit.
void validate_channel(const ChannelSpec& spec);

inline FilterConfig default_filter(ChannelKind kind, double r = 1.0) {
  if (is_vibration(kind) || kind == ChannelKind::Tachometer) return {false, 1e-4 * r, r};
  return {true, 1e-4 * r, r};
}

// Unit of flow through the pipeline. For Tachometer channels `values` holds
// pulse times and may be empty.
struct SampleFrame {
  ChannelId channel_id = 0;
  double t0 = 0.0;
  double sample_rate = 1.0;
  std::vector<double> values;
  std::uint64_t sequence = 0;

  double sample_time(std::size_t i) const { return t0 + static_cast<double>(i) / sample_rate; }
  double end_time() const { return t0 + static_cast<double>(values.size()) / sample_rate; }
};

struct TachPulseTrain {
  std::vector<double> times;
  double delta_theta = 0.0;  // radians per pulse
};

}  // namespace motormon
