#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace motormon {

// Byte-order explicit codecs shared by the recording format (little-endian)
// and the replication wire protocol (big-endian).
template <std::endian Order>
class ByteWriter {
 public:
  explicit ByteWriter(std::vector<std::uint8_t>& out) : out_(out) {}

  template <typename T>
    requires std::is_integral_v<T>
  void put(T v) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      std::size_t shift = Order == std::endian::little ? i : sizeof(T) - 1 - i;
      out_.push_back(static_cast<std::uint8_t>(u >> (8 * shift)));
    }
  }

  void put_f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }

  void put_bytes(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) return;
    const std::size_t at = out_.size();
    out_.resize(at + bytes.size());
    std::memcpy(out_.data() + at, bytes.data(), bytes.size());
  }

  // u32 length prefix followed by raw bytes.
  void put_string(std::string_view s) {
    put(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }

  std::size_t size() const { return out_.size(); }

 private:
  std::vector<std::uint8_t>& out_;
};

// Reader over a borrowed buffer. Reads past the end set `ok()` to false and
// return zero; callers check once after a record.
template <std::endian Order>
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  template <typename T>
    requires std::is_integral_v<T>
  T get() {
    using U = std::make_unsigned_t<T>;
    if (!need(sizeof(T))) return T{};
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      std::size_t shift = Order == std::endian::little ? i : sizeof(T) - 1 - i;
      u |= static_cast<U>(static_cast<U>(in_[pos_ + i]) << (8 * shift));
    }
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }

  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }

  std::span<const std::uint8_t> get_bytes(std::size_t n) {
    if (!need(n)) return {};
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::string get_string() {
    auto n = get<std::uint32_t>();
    auto b = get_bytes(n);
    return std::string(b.begin(), b.end());
  }

  bool ok() const { return ok_; }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  bool need(std::size_t n) {
    if (!ok_ || in_.size() - pos_ < n) {
      ok_ = false;
      return false;
    }
    return true;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
  bool ok_ = true;
};

using LeWriter = ByteWriter<std::endian::little>;
using LeReader = ByteReader<std::endian::little>;
using BeWriter = ByteWriter<std::endian::big>;
using BeReader = ByteReader<std::endian::big>;

// CRC-32 (IEEE 802.3 polynomial).
std::uint32_t crc32(std::span<const std::uint8_t> bytes);

}  // namespace motormon
