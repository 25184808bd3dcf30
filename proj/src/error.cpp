#include "motormon/error.hpp"

namespace motormon {

std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Config: return "config";
    case ErrorCategory::Format: return "format";
    case ErrorCategory::PartialRead: return "partial-read";
    case ErrorCategory::DataQuality: return "data-quality";
    case ErrorCategory::Routing: return "routing";
    case ErrorCategory::SingularWindow: return "singular-window";
    case ErrorCategory::InvalidWindow: return "invalid-window";
    case ErrorCategory::OutOfRange: return "out-of-range";
    case ErrorCategory::StalledShaft: return "stalled-shaft";
    case ErrorCategory::InsufficientPulses: return "insufficient-pulses";
    case ErrorCategory::Coverage: return "coverage";
    case ErrorCategory::InsufficientData: return "insufficient-data";
    case ErrorCategory::Comparability: return "comparability";
    case ErrorCategory::Validation: return "validation";
    case ErrorCategory::Io: return "io";
    case ErrorCategory::Store: return "store";
    case ErrorCategory::Protocol: return "protocol";
    case ErrorCategory::Runtime: return "runtime";
  }
  return "runtime";
}

}  // namespace motormon
