#include "motormon/types.hpp"

#include <array>
#include <cmath>

#include "motormon/error.hpp"

namespace motormon {

namespace {
constexpr std::array<std::string_view, 7> kKindNames = {
    "VibrationX", "VibrationY", "VibrationZ", "Tachometer", "Temperature", "Current", "Voltage"};
}

std::string_view kind_name(ChannelKind kind) {
  return kKindNames.at(static_cast<std::size_t>(kind));
}

std::optional<ChannelKind> parse_kind(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<ChannelKind>(i);
  }
  return std::nullopt;
}

std::optional<ChannelKind> kind_from_code(std::uint8_t code) {
  if (code >= kKindNames.size()) return std::nullopt;
  return static_cast<ChannelKind>(code);
}

void validate_channel(const ChannelSpec& spec) {
  const std::string where = "channel " + std::to_string(spec.id) + ": ";
  if (!std::isfinite(spec.sample_rate)) {
    throw Error(ErrorCategory::Config, where + "sample_rate must be finite");
  }
  if (is_vibration(spec.kind)) {
    if (spec.sample_rate < 1000.0 || spec.sample_rate > 25000.0) {
      throw Error(ErrorCategory::Config,
                  where + "vibration sample_rate " + std::to_string(spec.sample_rate) +
                      " outside [1000, 25000]");
    }
  } else if (spec.sample_rate < 1.0 || spec.sample_rate > 10000.0) {
    throw Error(ErrorCategory::Config, where + "sample_rate " + std::to_string(spec.sample_rate) +
                                           " outside [1, 10000]");
  }
  if (!std::isfinite(spec.gain) || spec.gain == 0.0) {
    throw Error(ErrorCategory::Config, where + "gain must be finite and nonzero");
  }
  if (!std::isfinite(spec.offset)) {
    throw Error(ErrorCategory::Config, where + "offset must be finite");
  }
  if (spec.filter.enabled && !(spec.filter.r > 0.0 && spec.filter.q >= 0.0 &&
                               std::isfinite(spec.filter.r) && std::isfinite(spec.filter.q))) {
    throw Error(ErrorCategory::Config, where + "filter requires r > 0 and q >= 0");
  }
}

}  // namespace motormon
