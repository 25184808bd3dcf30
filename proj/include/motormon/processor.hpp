#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "motormon/archive.hpp"
#include "motormon/config.hpp"
#include "motormon/order_analysis.hpp"
#include "motormon/preprocess.hpp"
#include "motormon/threshold.hpp"

namespace motormon {

// Tier-2 unit: one processed frame, or the end-of-round marker carrying the
// round's order-analysis output.
struct ProcessedItem {
  enum class Kind : std::uint8_t { Frame, RoundEnd };
  Kind kind = Kind::Frame;
  SampleFrame raw;       // as acquired, for the recording
  SampleFrame physical;  // sampled channels; empty for the tachometer
  std::vector<double> point_times;   // tachometer: per-pulse speed
  std::vector<double> point_values;  // rpm
  std::vector<AlarmEvent> events;
  std::vector<SpectrumRecord> spectra;
  std::uint64_t round = 0;
  double round_end = 0.0;
  std::chrono::steady_clock::time_point produced_at{};
};

struct ChannelReading {
  ChannelId channel_id = 0;
  ChannelKind kind = ChannelKind::VibrationX;
  double value = 0.0;  // last physical value, frame RMS for vibration, rpm for the tachometer
  bool valid = false;
};

struct StatusSnapshot {
  std::uint64_t round = 0;
  double t = 0.0;
  std::vector<ChannelReading> readings;
  MotorState state;
};

// Latest healthy spectrum per vibration axis (X, Y, Z).
using BaselineSet = std::array<std::optional<OrderSpectrum>, 3>;

// Loads the most recent baseline spectra of a run. Throws Error(Config) when
// the store or run holds none.
BaselineSet load_baseline(const BaselineRef& ref);

class Processor {
 public:
  // `channels` is the resolved channel table in processing order.
  Processor(const RunConfig& config, std::vector<ChannelSpec> channels, BaselineSet baseline);

  ProcessedItem process(const SampleFrame& raw);
  // Runs every order-analysis block completed by the data seen so far.
  ProcessedItem end_round(std::uint64_t round, double round_end);

  MotorState state() const;
  StatusSnapshot snapshot(std::uint64_t round, double t) const;
  const std::vector<AlarmEvent>& events() const { return events_; }
  const std::vector<DiagnosisReport>& diagnoses() const { return diagnoses_; }
  std::uint64_t samples_rejected() const { return rejected_; }
  std::uint64_t blocks_analyzed() const { return blocks_; }

 private:
  struct AxisBuffer {
    ChannelId channel_id = 0;
    int axis = 0;
    double t0 = 0.0;
    double rate = 1.0;
    std::vector<double> values;
    bool started = false;
  };

  void record(const AlarmEvent& e);
  void run_thresholds(const SampleFrame& frame, bool tach, ProcessedItem& item);
  void trim_axes(double keep_from);
  void analyze_block(ProcessedItem& item);
  bool block_ready() const;

  const RunConfig& config_;
  std::vector<ChannelSpec> channels_;
  std::map<ChannelId, std::size_t> index_;
  std::vector<ChannelFilterState> filters_;
  std::vector<std::pair<ThresholdSpec, ThresholdState>> thresholds_;
  std::vector<ChannelReading> readings_;

  // Tachometer speed.
  std::optional<double> last_pulse_;
  unsigned ppr_ = 1;

  // Live order analysis.
  bool analysis_on_ = false;
  bool diagnose_on_ = false;
  BaselineSet baseline_;
  std::vector<AxisBuffer> axes_;
  std::vector<double> pulses_;
  std::size_t pulses_per_block_ = 0;
  std::size_t block_samples_ = 0;
  std::uint64_t blocks_ = 0;

  std::map<std::pair<ChannelId, AlarmKind>, AlarmEvent> active_;
  std::optional<DiagnosisReport> last_diagnosis_;
  std::vector<AlarmEvent> events_;
  std::vector<DiagnosisReport> diagnoses_;
  std::uint64_t rejected_ = 0;
};

}  // namespace motormon
