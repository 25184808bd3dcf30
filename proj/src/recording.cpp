#include "motormon/recording.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include "motormon/byte_io.hpp"
#include "motormon/error.hpp"

namespace motormon {

namespace {

constexpr std::array<std::uint8_t, 4> kMagic = {'M', 'O', 'T', 'R'};
constexpr std::size_t kChannelEntryBytes = 2 + 1 + 8 + 8 + 8;
constexpr std::size_t kFrameHeadBytes = 2 + 8 + 8 + 4;
constexpr std::uint32_t kMaxFrameValues = 1u << 26;

}  // namespace

std::vector<std::uint8_t> encode_recording_header(std::span<const ChannelSpec> channels) {
  std::vector<std::uint8_t> out;
  LeWriter w(out);
  w.put_bytes(kMagic);
  w.put(kRecordingVersion);
  w.put(static_cast<std::uint16_t>(channels.size()));
  for (const auto& c : channels) {
    w.put(c.id);
    w.put(static_cast<std::uint8_t>(c.kind));
    w.put_f64(c.sample_rate);
    w.put_f64(c.gain);
    w.put_f64(c.offset);
  }
  return out;
}

std::vector<std::uint8_t> encode_recording_frame(const SampleFrame& frame) {
  std::vector<std::uint8_t> out;
  out.reserve(kFrameHeadBytes + frame.values.size() * 8 + 4);
  LeWriter w(out);
  w.put(frame.channel_id);
  w.put(frame.sequence);
  w.put_f64(frame.t0);
  w.put(static_cast<std::uint32_t>(frame.values.size()));
  for (double v : frame.values) w.put_f64(v);
  w.put(crc32(out));
  return out;
}

RecordingWriter::RecordingWriter(const std::filesystem::path& path,
                                 std::span<const ChannelSpec> channels)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
  if (!out_) throw Error(ErrorCategory::Io, "cannot open recording for writing: " + path.string());
  auto header = encode_recording_header(channels);
  out_.write(reinterpret_cast<const char*>(header.data()),
             static_cast<std::streamsize>(header.size()));
}

void RecordingWriter::write(const SampleFrame& frame) {
  auto bytes = encode_recording_frame(frame);
  out_.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out_) throw Error(ErrorCategory::Io, "write failed on recording " + path_.string());
  ++frames_;
}

void RecordingWriter::flush() { out_.flush(); }

RecordingReader::RecordingReader(const std::filesystem::path& path)
    : in_(path, std::ios::binary) {
  if (!in_) throw Error(ErrorCategory::Io, "cannot open recording: " + path.string());

  std::array<std::uint8_t, 8> head{};
  bool eof = false;
  if (!read_exact(head.data(), head.size(), eof)) {
    throw FormatError(ErrorCategory::Format, 0, eof ? "empty recording" : "truncated header");
  }
  if (!std::equal(kMagic.begin(), kMagic.end(), head.begin())) {
    throw FormatError(ErrorCategory::Format, 0, "bad magic");
  }
  LeReader r(head);
  r.get_bytes(4);
  const auto version = r.get<std::uint16_t>();
  if (version != kRecordingVersion) {
    throw FormatError(ErrorCategory::Format, 4, "unsupported version " + std::to_string(version));
  }
  const auto count = r.get<std::uint16_t>();
  for (std::uint16_t i = 0; i < count; ++i) {
    const std::uint64_t at = offset_;
    std::array<std::uint8_t, kChannelEntryBytes> entry{};
    if (!read_exact(entry.data(), entry.size(), eof)) {
      throw FormatError(ErrorCategory::Format, at, "truncated channel table");
    }
    LeReader e(entry);
    ChannelSpec spec;
    spec.id = e.get<std::uint16_t>();
    auto kind = kind_from_code(e.get<std::uint8_t>());
    if (!kind) throw FormatError(ErrorCategory::Format, at + 2, "unknown channel kind");
    spec.kind = *kind;
    spec.sample_rate = e.get_f64();
    spec.gain = e.get_f64();
    spec.offset = e.get_f64();
    spec.filter = default_filter(spec.kind);
    channels_.push_back(spec);
  }
}

bool RecordingReader::read_exact(void* dst, std::size_t n, bool& eof_at_start) {
  in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  const auto got = static_cast<std::size_t>(in_.gcount());
  eof_at_start = got == 0;
  offset_ += got;
  return got == n;
}

std::optional<SampleFrame> RecordingReader::next() {
  const std::uint64_t frame_start = offset_;
  std::vector<std::uint8_t> body(kFrameHeadBytes);
  bool eof = false;
  if (!read_exact(body.data(), body.size(), eof)) {
    if (eof) return std::nullopt;
    throw FormatError(ErrorCategory::PartialRead, frame_start, "truncated frame header");
  }
  LeReader head(body);
  SampleFrame frame;
  frame.channel_id = head.get<std::uint16_t>();
  frame.sequence = head.get<std::uint64_t>();
  frame.t0 = head.get_f64();
  const auto count = head.get<std::uint32_t>();
  if (count > kMaxFrameValues) {
    throw FormatError(ErrorCategory::Format, frame_start + 18, "implausible value count");
  }

  body.resize(kFrameHeadBytes + std::size_t{count} * 8 + 4);
  if (!read_exact(body.data() + kFrameHeadBytes, body.size() - kFrameHeadBytes, eof)) {
    throw FormatError(ErrorCategory::PartialRead, frame_start, "truncated frame");
  }
  const std::span<const std::uint8_t> covered(body.data(), body.size() - 4);
  LeReader tail(std::span<const std::uint8_t>(body).subspan(body.size() - 4));
  if (tail.get<std::uint32_t>() != crc32(covered)) {
    throw FormatError(ErrorCategory::Format, frame_start, "frame CRC mismatch");
  }

  const ChannelSpec* spec = nullptr;
  for (const auto& c : channels_) {
    if (c.id == frame.channel_id) spec = &c;
  }
  if (spec == nullptr) {
    throw FormatError(ErrorCategory::Format, frame_start,
                      "frame for unknown channel " + std::to_string(frame.channel_id));
  }
  frame.sample_rate = spec->sample_rate;
  LeReader values(std::span<const std::uint8_t>(body).subspan(kFrameHeadBytes, std::size_t{count} * 8));
  frame.values.resize(count);
  for (auto& v : frame.values) v = values.get_f64();
  return frame;
}

Recording read_recording(const std::filesystem::path& path) {
  RecordingReader reader(path);
  Recording rec;
  rec.channels = reader.channels();
  while (auto f = reader.next()) rec.frames.push_back(std::move(*f));
  return rec;
}

void write_recording(const std::filesystem::path& path, const Recording& rec) {
  RecordingWriter w(path, rec.channels);
  for (const auto& f : rec.frames) w.write(f);
  w.flush();
}

TachPulseTrain tach_pulses(const Recording& rec, unsigned pulses_per_rev) {
  TachPulseTrain train;
  train.delta_theta = 2.0 * std::numbers::pi / pulses_per_rev;
  const ChannelSpec* tach = nullptr;
  for (const auto& c : rec.channels) {
    if (c.kind == ChannelKind::Tachometer) {
      tach = &c;
      break;
    }
  }
  if (tach == nullptr) return train;
  for (const auto& f : rec.frames) {
    if (f.channel_id != tach->id) continue;
    train.times.insert(train.times.end(), f.values.begin(), f.values.end());
  }
  return train;
}

ContinuousSignal concat_channel(const Recording& rec, ChannelId id) {
  ContinuousSignal sig;
  bool first = true;
  for (const auto& f : rec.frames) {
    if (f.channel_id != id || f.values.empty()) continue;
    if (first) {
      sig.t0 = f.t0;
      sig.rate = f.sample_rate;
      first = false;
    } else {
      const double expected = sig.t0 + static_cast<double>(sig.values.size()) / sig.rate;
      if (std::abs(f.t0 - expected) > 1e-6) {
        throw Error(ErrorCategory::Coverage, "channel " + std::to_string(id) +
                                                 " has a gap at t=" + std::to_string(expected));
      }
    }
    sig.values.insert(sig.values.end(), f.values.begin(), f.values.end());
  }
  return sig;
}

}  // namespace motormon
