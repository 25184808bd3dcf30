#include "motormon/wire.hpp"

#include <algorithm>

#include "motormon/byte_io.hpp"
#include "motormon/error.hpp"

namespace motormon {

namespace {

constexpr std::array<std::uint8_t, 4> kMagic = {'M', 'O', 'T', 'R'};

std::uint32_t frame_crc(MessageType type, std::uint32_t length,
                        std::span<const std::uint8_t> payload) {
  std::vector<std::uint8_t> covered;
  covered.reserve(5 + payload.size());
  BeWriter w(covered);
  w.put(static_cast<std::uint8_t>(type));
  w.put(length);
  w.put_bytes(payload);
  return crc32(covered);
}

[[noreturn]] void bad_payload(std::size_t offset, const char* what) {
  throw FormatError(ErrorCategory::Protocol, offset, what);
}

void put_event(BeWriter& w, const AlarmEvent& e) {
  w.put(e.channel_id);
  w.put(static_cast<std::uint8_t>(e.kind));
  w.put_f64(e.value);
  w.put_f64(e.limit);
  w.put_f64(e.t);
  w.put_f64(e.emitted_t);
  w.put(static_cast<std::uint8_t>(e.cleared_t ? 1 : 0));
  w.put_f64(e.cleared_t.value_or(0.0));
  w.put(static_cast<std::uint16_t>(e.orders.size()));
  for (double o : e.orders) w.put_f64(o);
}

AlarmEvent get_event(BeReader& r) {
  AlarmEvent e;
  e.channel_id = r.get<std::uint16_t>();
  const auto kind = r.get<std::uint8_t>();
  if (kind > static_cast<std::uint8_t>(AlarmKind::OrderFault)) bad_payload(r.position(), "bad alarm kind");
  e.kind = static_cast<AlarmKind>(kind);
  e.value = r.get_f64();
  e.limit = r.get_f64();
  e.t = r.get_f64();
  e.emitted_t = r.get_f64();
  const bool cleared = r.get<std::uint8_t>() != 0;
  const double cleared_t = r.get_f64();
  if (cleared) e.cleared_t = cleared_t;
  const auto n = r.get<std::uint16_t>();
  for (std::uint16_t i = 0; i < n && r.ok(); ++i) e.orders.push_back(r.get_f64());
  return e;
}

}  // namespace

std::vector<std::uint8_t> encode_message(MessageType type, std::span<const std::uint8_t> payload) {
  std::vector<std::uint8_t> out;
  out.reserve(kWireHeaderBytes + payload.size() + 4);
  BeWriter w(out);
  w.put_bytes(kMagic);
  w.put(kWireVersion);
  w.put(static_cast<std::uint8_t>(type));
  w.put(static_cast<std::uint32_t>(payload.size()));
  w.put_bytes(payload);
  w.put(frame_crc(type, static_cast<std::uint32_t>(payload.size()), payload));
  return out;
}

WireHeader parse_wire_header(std::span<const std::uint8_t, kWireHeaderBytes> bytes) {
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw FormatError(ErrorCategory::Protocol, 0, "bad magic");
  }
  if (bytes[4] != kWireVersion) throw FormatError(ErrorCategory::Protocol, 4, "unsupported version");
  const auto type = bytes[5];
  if (type < 1 || type > 4) throw FormatError(ErrorCategory::Protocol, 5, "unknown message type");
  BeReader r(bytes.subspan(6));
  WireHeader h;
  h.type = static_cast<MessageType>(type);
  h.length = r.get<std::uint32_t>();
  if (h.length > kMaxPayloadBytes) throw FormatError(ErrorCategory::Protocol, 6, "payload too large");
  return h;
}

bool wire_crc_matches(const WireHeader& header, std::span<const std::uint8_t> payload,
                      std::uint32_t crc) {
  return frame_crc(header.type, header.length, payload) == crc;
}

std::optional<Message> decode_message(std::span<const std::uint8_t> buffer, std::size_t& consumed) {
  if (buffer.size() < kWireHeaderBytes) return std::nullopt;
  const WireHeader h = parse_wire_header(buffer.first<kWireHeaderBytes>());
  const std::size_t total = kWireHeaderBytes + h.length + 4;
  if (buffer.size() < total) return std::nullopt;
  auto payload = buffer.subspan(kWireHeaderBytes, h.length);
  BeReader crc_reader(buffer.subspan(kWireHeaderBytes + h.length, 4));
  consumed = total;
  if (!wire_crc_matches(h, payload, crc_reader.get<std::uint32_t>())) {
    throw FormatError(ErrorCategory::Protocol, kWireHeaderBytes + h.length, "CRC mismatch");
  }
  return Message{h.type, std::vector<std::uint8_t>(payload.begin(), payload.end())};
}

std::vector<std::uint8_t> encode_batch(const ArchiveBatch& b) {
  std::vector<std::uint8_t> out;
  out.reserve(64 + b.rows.size() * 18);
  BeWriter w(out);
  w.put_bytes(b.run_id);
  w.put(b.batch_id);
  w.put_f64(b.t_start);
  w.put_f64(b.t_end);
  w.put(static_cast<std::uint32_t>(b.rows.size()));
  for (const auto& row : b.rows) {
    w.put(row.channel_id);
    w.put_f64(row.t);
    w.put_f64(row.value);
  }
  w.put(static_cast<std::uint32_t>(b.events.size()));
  for (const auto& e : b.events) put_event(w, e);
  w.put(static_cast<std::uint32_t>(b.spectra.size()));
  for (const auto& s : b.spectra) {
    w.put(s.channel_id);
    w.put_f64(s.t);
    w.put_f64(s.order_resolution);
    w.put(static_cast<std::uint8_t>(s.baseline ? 1 : 0));
    w.put(static_cast<std::uint32_t>(s.amplitudes.size()));
    for (double a : s.amplitudes) w.put_f64(a);
  }
  return out;
}

ArchiveBatch decode_batch(std::span<const std::uint8_t> payload) {
  BeReader r(payload);
  ArchiveBatch b;
  auto id = r.get_bytes(16);
  if (!r.ok()) bad_payload(0, "truncated batch");
  std::copy(id.begin(), id.end(), b.run_id.begin());
  b.batch_id = r.get<std::uint64_t>();
  b.t_start = r.get_f64();
  b.t_end = r.get_f64();

  const auto rows = r.get<std::uint32_t>();
  if (rows > r.remaining() / 18) bad_payload(r.position(), "row count exceeds payload");
  b.rows.reserve(rows);
  for (std::uint32_t i = 0; i < rows; ++i) {
    SampleRow row;
    row.channel_id = r.get<std::uint16_t>();
    row.t = r.get_f64();
    row.value = r.get_f64();
    b.rows.push_back(row);
  }
  const auto events = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < events && r.ok(); ++i) b.events.push_back(get_event(r));
  const auto spectra = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < spectra && r.ok(); ++i) {
    SpectrumRecord s;
    s.channel_id = r.get<std::uint16_t>();
    s.t = r.get_f64();
    s.order_resolution = r.get_f64();
    s.baseline = r.get<std::uint8_t>() != 0;
    const auto n = r.get<std::uint32_t>();
    if (n > r.remaining() / 8) bad_payload(r.position(), "spectrum length exceeds payload");
    s.amplitudes.resize(n);
    for (auto& a : s.amplitudes) a = r.get_f64();
    b.spectra.push_back(std::move(s));
  }
  if (!r.ok()) bad_payload(r.position(), "truncated batch");
  if (r.remaining() != 0) bad_payload(r.position(), "trailing bytes in batch");
  return b;
}

std::vector<std::uint8_t> encode_hello(const RunInfo& run) {
  std::vector<std::uint8_t> out;
  BeWriter w(out);
  w.put_bytes(run.id);
  w.put_string(run.started_at);
  w.put_string(run.channels);
  w.put_string(run.thresholds);
  w.put_string(run.analysis);
  return out;
}

RunInfo decode_hello(std::span<const std::uint8_t> payload) {
  BeReader r(payload);
  RunInfo run;
  auto id = r.get_bytes(16);
  if (!r.ok()) bad_payload(0, "truncated hello");
  std::copy(id.begin(), id.end(), run.id.begin());
  run.started_at = r.get_string();
  run.channels = r.get_string();
  run.thresholds = r.get_string();
  run.analysis = r.get_string();
  if (!r.ok()) bad_payload(r.position(), "truncated hello");
  return run;
}

std::vector<std::uint8_t> encode_ack(std::uint64_t highest_contiguous) {
  std::vector<std::uint8_t> out;
  BeWriter w(out);
  w.put(highest_contiguous);
  return out;
}

std::uint64_t decode_ack(std::span<const std::uint8_t> payload) {
  BeReader r(payload);
  const auto v = r.get<std::uint64_t>();
  if (!r.ok() || r.remaining() != 0) bad_payload(0, "malformed ack");
  return v;
}

}  // namespace motormon
