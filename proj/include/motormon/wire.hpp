#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "motormon/archive.hpp"

namespace motormon {

// Replication framing, big-endian:
//   "MOTR" | version u8 = 1 | type u8 | payload length u32 | payload |
//   CRC32 over (type, length, payload)
enum class MessageType : std::uint8_t { Batch = 1, Ack = 2, Nak = 3, Hello = 4 };

inline constexpr std::uint8_t kWireVersion = 1;
inline constexpr std::size_t kWireHeaderBytes = 10;
inline constexpr std::uint32_t kMaxPayloadBytes = 64u << 20;

std::vector<std::uint8_t> encode_message(MessageType type, std::span<const std::uint8_t> payload);

struct WireHeader {
  MessageType type = MessageType::Nak;
  std::uint32_t length = 0;
};

// Validates magic, version, type and length. Throws FormatError(Protocol).
WireHeader parse_wire_header(std::span<const std::uint8_t, kWireHeaderBytes> bytes);

bool wire_crc_matches(const WireHeader& header, std::span<const std::uint8_t> payload,
                      std::uint32_t crc);

struct Message {
  MessageType type = MessageType::Nak;
  std::vector<std::uint8_t> payload;
};

// Decodes one complete message from the front of `buffer`. Returns nullopt if
// more bytes are needed; sets `consumed` on success. A CRC mismatch throws
// FormatError(Protocol) after setting `consumed` past the bad frame.
std::optional<Message> decode_message(std::span<const std::uint8_t> buffer, std::size_t& consumed);

// BATCH: run id (16) | batch id u64 | window start f64 | end f64 |
//        row count u32 | rows (channel u16, t f64, value f64) |
//        event count u32 | events | spectrum count u32 | spectra
std::vector<std::uint8_t> encode_batch(const ArchiveBatch& batch);
ArchiveBatch decode_batch(std::span<const std::uint8_t> payload);

// HELLO: run id (16) | started_at | channels | thresholds | analysis, each
// string u32-length-prefixed.
std::vector<std::uint8_t> encode_hello(const RunInfo& run);
RunInfo decode_hello(std::span<const std::uint8_t> payload);

// ACK: highest contiguous batch id u64 (kNoBatches when none).
inline constexpr std::uint64_t kNoBatches = ~std::uint64_t{0};
std::vector<std::uint8_t> encode_ack(std::uint64_t highest_contiguous);
std::uint64_t decode_ack(std::span<const std::uint8_t> payload);

}  // namespace motormon
