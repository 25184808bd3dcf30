#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace motormon {

enum class ErrorCategory {
  Config,
  Format,
  PartialRead,
  DataQuality,
  Routing,
  SingularWindow,
  InvalidWindow,
  OutOfRange,
  StalledShaft,
  InsufficientPulses,
  Coverage,
  InsufficientData,
  Comparability,
  Validation,
  Io,
  Store,
  Protocol,
  Runtime,
};

// Stable lowercase tag used in `error:<category>:` CLI output.
std::string_view category_name(ErrorCategory c);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

// Recording/wire decode failure at a known byte offset.
class FormatError : public Error {
 public:
  FormatError(ErrorCategory category, std::uint64_t offset, const std::string& what)
      : Error(category, what + " at byte offset " + std::to_string(offset)), offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

// resample_signal: first grid index that falls outside the sampled span.
class CoverageError : public Error {
 public:
  CoverageError(std::size_t index, double t)
      : Error(ErrorCategory::Coverage,
              "grid index " + std::to_string(index) + " (t=" + std::to_string(t) +
                  " s) lies outside the signal span"),
        index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

}  // namespace motormon
