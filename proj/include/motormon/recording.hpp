#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <vector>

#include "motormon/types.hpp"

namespace motormon {

// Binary recording file, little-endian:
//   "MOTR" | version u16 = 1 | channel count u16 |
//   per channel: id u16, kind u8, rate f64, gain f64, offset f64
// followed by frames:
//   channel id u16 | sequence u64 | t0 f64 | count u32 | count x f64 | CRC32(body)
// where body is every frame byte before the CRC.
inline constexpr std::uint16_t kRecordingVersion = 1;

std::vector<std::uint8_t> encode_recording_header(std::span<const ChannelSpec> channels);
std::vector<std::uint8_t> encode_recording_frame(const SampleFrame& frame);

class RecordingWriter {
 public:
  RecordingWriter(const std::filesystem::path& path, std::span<const ChannelSpec> channels);

  void write(const SampleFrame& frame);
  void flush();
  std::uint64_t frames_written() const { return frames_; }

 private:
  std::ofstream out_;
  std::filesystem::path path_;
  std::uint64_t frames_ = 0;
};

class RecordingReader {
 public:
  // Reads and validates the header; throws FormatError on a bad or empty file.
  explicit RecordingReader(const std::filesystem::path& path);

  const std::vector<ChannelSpec>& channels() const { return channels_; }

  // Next frame in recorded order, or nullopt at a clean end of file. A CRC or
  // structure fault throws FormatError; a truncated frame throws FormatError
  // with category PartialRead.
  std::optional<SampleFrame> next();

  std::uint64_t offset() const { return offset_; }

 private:
  bool read_exact(void* dst, std::size_t n, bool& eof_at_start);

  std::ifstream in_;
  std::vector<ChannelSpec> channels_;
  std::uint64_t offset_ = 0;
};

struct Recording {
  std::vector<ChannelSpec> channels;
  std::vector<SampleFrame> frames;
};

Recording read_recording(const std::filesystem::path& path);
void write_recording(const std::filesystem::path& path, const Recording& rec);

// Concatenated pulse times of the first Tachometer channel.
TachPulseTrain tach_pulses(const Recording& rec, unsigned pulses_per_rev);

// Contiguous samples of one sampled channel (frames must abut in time).
struct ContinuousSignal {
  double t0 = 0.0;
  double rate = 1.0;
  std::vector<double> values;
};
ContinuousSignal concat_channel(const Recording& rec, ChannelId id);

}  // namespace motormon
