#include <cmath>
#include <random>

#include "motormon/archive.hpp"
#include "motormon/error.hpp"

namespace motormon {

std::string run_id_hex(const RunId& id) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  s.reserve(32);
  for (auto b : id) {
    s.push_back(kHex[b >> 4]);
    s.push_back(kHex[b & 0xF]);
  }
  return s;
}

RunId parse_run_id(std::string_view hex) {
  auto nibble = [&](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw Error(ErrorCategory::Validation, "run id must be 32 hex digits");
  };
  if (hex.size() != 32) throw Error(ErrorCategory::Validation, "run id must be 32 hex digits");
  RunId id{};
  for (std::size_t i = 0; i < 16; ++i) {
    id[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
  }
  return id;
}

RunId random_run_id() {
  std::random_device rd;
  RunId id{};
  for (std::size_t i = 0; i < id.size(); i += 4) {
    const auto v = rd();
    for (std::size_t k = 0; k < 4; ++k) id[i + k] = static_cast<std::uint8_t>(v >> (8 * k));
  }
  return id;
}

Batcher::Batcher(const RunId& run, double period) : run_(run), period_(period) {
  if (!(period > 0.0)) throw Error(ErrorCategory::Config, "archive period must be > 0");
}

std::uint64_t Batcher::window_of(double t) const {
  const double w = std::floor(t / period_ + 1e-9);
  const auto idx = static_cast<std::uint64_t>(std::max(0.0, w));
  if (idx < next_) {
    throw Error(ErrorCategory::Runtime, "data at t=" + std::to_string(t) +
                                            " arrived after its archive window was committed");
  }
  return idx;
}

Batcher::Window& Batcher::open_window(std::uint64_t w) { return open_[w]; }

void Batcher::add_frame(const SampleFrame& frame) {
  const std::size_t n = frame.values.size();
  std::size_t i = 0;
  while (i < n) {
    const std::uint64_t w = window_of(frame.sample_time(i));
    Acc run;
    while (i < n && window_of(frame.sample_time(i)) == w) {
      run.sum += frame.values[i];
      ++run.n;
      ++i;
    }
    Acc& acc = open_window(w).acc[frame.channel_id];
    acc.sum += run.sum;
    acc.n += run.n;
    samples_ += run.n;
  }
}

void Batcher::add_points(ChannelId channel, std::span<const double> times,
                         std::span<const double> values) {
  for (std::size_t i = 0; i < times.size(); ++i) {
    Acc& acc = open_window(window_of(times[i])).acc[channel];
    acc.sum += values[i];
    ++acc.n;
    ++samples_;
  }
}

void Batcher::add_event(const AlarmEvent& event) {
  open_window(window_of(event.emitted_t)).events.push_back(event);
}

void Batcher::add_spectrum(SpectrumRecord spectrum) {
  const auto w = window_of(spectrum.t);
  open_window(w).spectra.push_back(std::move(spectrum));
}

ArchiveBatch Batcher::emit(std::uint64_t w) {
  ArchiveBatch b;
  b.run_id = run_;
  b.batch_id = w;
  b.t_start = static_cast<double>(w) * period_;
  b.t_end = static_cast<double>(w + 1) * period_;
  auto it = open_.find(w);
  if (it != open_.end()) {
    for (const auto& [ch, acc] : it->second.acc) {
      b.rows.push_back({ch, b.t_start, acc.sum / static_cast<double>(acc.n)});
    }
    b.events = std::move(it->second.events);
    b.spectra = std::move(it->second.spectra);
    open_.erase(it);
  }
  return b;
}

std::vector<ArchiveBatch> Batcher::close_through(double t) {
  std::vector<ArchiveBatch> out;
  while (static_cast<double>(next_ + 1) * period_ <= t + 1e-9 * period_) {
    out.push_back(emit(next_));
    ++next_;
  }
  return out;
}

std::vector<ArchiveBatch> Batcher::flush() {
  std::vector<ArchiveBatch> out;
  if (open_.empty()) return out;
  const std::uint64_t last = open_.rbegin()->first;
  while (next_ <= last) {
    out.push_back(emit(next_));
    ++next_;
  }
  return out;
}

}  // namespace motormon
