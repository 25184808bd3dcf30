#include "motormon/byte_io.hpp"

#include <zlib.h>

namespace motormon {

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; chunk to stay within range on huge frames.
  constexpr std::size_t kChunk = 1u << 30;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    std::size_t n = std::min(kChunk, bytes.size() - pos);
    crc = ::crc32(crc, bytes.data() + pos, static_cast<uInt>(n));
    pos += n;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace motormon
