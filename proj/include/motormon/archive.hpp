#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "motormon/threshold.hpp"
#include "motormon/types.hpp"

namespace motormon {

using RunId = std::array<std::uint8_t, 16>;

std::string run_id_hex(const RunId& id);
RunId parse_run_id(std::string_view hex);  // throws Error(Validation)
RunId random_run_id();

struct SampleRow {
  ChannelId channel_id = 0;
  double t = 0.0;
  double value = 0.0;
  friend bool operator==(const SampleRow&, const SampleRow&) = default;
};

struct SpectrumRecord {
  ChannelId channel_id = 0;
  double t = 0.0;
  double order_resolution = 0.0;
  bool baseline = false;
  std::vector<double> amplitudes;
  friend bool operator==(const SpectrumRecord&, const SpectrumRecord&) = default;
};

// Row of the run_config table. The three settings columns are JSON text.
struct RunInfo {
  RunId id{};
  std::string started_at;
  std::string channels;
  std::string thresholds;
  std::string analysis;
  friend bool operator==(const RunInfo&, const RunInfo&) = default;
};

// One archive period of summarized data, committed and replicated as a unit.
struct ArchiveBatch {
  RunId run_id{};
  std::uint64_t batch_id = 0;
  double t_start = 0.0;
  double t_end = 0.0;
  std::vector<SampleRow> rows;
  std::vector<AlarmEvent> events;
  std::vector<SpectrumRecord> spectra;
  friend bool operator==(const ArchiveBatch&, const ArchiveBatch&) = default;
};

// Folds processed samples into fixed windows [w*period, (w+1)*period). Each
// window emits one mean row per channel with samples in it; windows are
// emitted in order with contiguous ids, empty ones included.
class Batcher {
 public:
  Batcher(const RunId& run, double period);

  // Uniformly sampled physical frame.
  void add_frame(const SampleFrame& frame);
  // Irregular points (e.g. per-pulse speed).
  void add_points(ChannelId channel, std::span<const double> times, std::span<const double> values);
  // Events land in the window of their emitted_t, spectra in the window of t.
  void add_event(const AlarmEvent& event);
  void add_spectrum(SpectrumRecord spectrum);

  // Emits every window ending at or before t.
  std::vector<ArchiveBatch> close_through(double t);
  // Emits every remaining window that holds data (and the gaps before them).
  std::vector<ArchiveBatch> flush();

  std::uint64_t samples_batched() const { return samples_; }
  std::uint64_t next_batch_id() const { return next_; }
  double period() const { return period_; }

 private:
  struct Acc {
    double sum = 0.0;
    std::uint64_t n = 0;
  };
  struct Window {
    std::map<ChannelId, Acc> acc;
    std::vector<AlarmEvent> events;
    std::vector<SpectrumRecord> spectra;
  };

  std::uint64_t window_of(double t) const;
  Window& open_window(std::uint64_t w);
  ArchiveBatch emit(std::uint64_t w);

  RunId run_;
  double period_;
  std::map<std::uint64_t, Window> open_;
  std::uint64_t next_ = 0;
  std::uint64_t samples_ = 0;
};

}  // namespace motormon
