#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "motormon/order_analysis.hpp"
#include "motormon/signal_source.hpp"
#include "motormon/threshold.hpp"
#include "motormon/types.hpp"

namespace motormon {

struct BaselineRef {
  std::filesystem::path store;
  std::optional<std::string> run_id;  // latest run with baseline spectra when empty
};

struct AnalysisSettings {
  bool enabled = true;
  double theta_step = 2.0 * std::numbers::pi / 64.0;
  std::vector<double> watch_orders;  // defaults to 1..20
  double ratio_threshold = 5.0;
  double floor = 0.05;
  unsigned block_revolutions = 8;
  std::optional<unsigned> pulses_per_rev;  // falls back to the profile, then 1
  std::optional<BaselineRef> baseline;
  bool record_baseline = false;
};

struct ArchiveSettings {
  double period = 0.01;
  std::filesystem::path store;
  std::optional<std::string> remote;  // host:port
  std::optional<std::filesystem::path> recording;
  std::optional<std::filesystem::path> journal;
  double replication_drain_timeout = 30.0;
};

struct PipelineSettings {
  std::size_t tier1_capacity = 256;
  std::size_t storage_capacity = 1024;
  double frame_duration = 0.1;
  bool realtime = true;
  double drain_timeout = 5.0;
  double status_interval = 0.5;  // >= 0.5 s keeps status at or below 2 Hz
};

struct RunConfig {
  double duration = 10.0;
  std::uint64_t seed = 1;
  std::vector<ChannelSpec> channels;
  std::optional<MotorProfile> profile;
  std::optional<std::filesystem::path> replay;
  std::vector<ThresholdSpec> thresholds;
  AnalysisSettings analysis;
  ArchiveSettings archive;
  PipelineSettings pipeline;

  unsigned pulses_per_rev() const;
  const ChannelSpec* channel(ChannelId id) const;
};

// Parses JSON text. Relative paths resolve against `base_dir`. Unknown keys,
// wrong types and violated invariants throw Error(Config) naming the field.
RunConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);
void validate_config(const RunConfig& config);

// JSON text for the run_config columns.
std::string channels_json(const std::vector<ChannelSpec>& channels);
std::string thresholds_json(const std::vector<ThresholdSpec>& thresholds);
std::string analysis_json(const AnalysisSettings& analysis);

// Threshold mode used when the config leaves it unset.
ThresholdMode default_mode(ChannelKind kind);

}  // namespace motormon
