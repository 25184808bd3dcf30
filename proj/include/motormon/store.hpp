#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "motormon/archive.hpp"

struct sqlite3;

namespace motormon {

struct QueryFilter {
  std::optional<std::string> run_id;  // hex; all runs when empty
  double from = -1e300;               // inclusive
  double to = 1e300;                  // exclusive
  std::vector<ChannelId> channels;    // all when empty
  std::optional<ChannelKind> kind;    // resolved per run from its channel table
};

void validate_filter(const QueryFilter& f);  // throws Error(Validation)

struct SampleRecord {
  std::string run_id;
  std::uint64_t batch_id = 0;
  ChannelId channel_id = 0;
  double t = 0.0;
  double value = 0.0;
  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct AnalysisRecord {
  std::string run_id;
  ChannelId channel_id = 0;
  double t = 0.0;
  double order = 0.0;
  double amplitude = 0.0;
  bool baseline = false;
  friend bool operator==(const AnalysisRecord&, const AnalysisRecord&) = default;
};

struct AlarmRecord {
  std::string run_id;
  ChannelId channel_id = 0;
  AlarmKind kind = AlarmKind::HighLimit;
  double value = 0.0;
  double limit = 0.0;
  double t_raise = 0.0;
  std::optional<double> t_clear;
  std::string orders;  // space-separated
  friend bool operator==(const AlarmRecord&, const AlarmRecord&) = default;
};

struct OutboxEntry {
  std::uint64_t batch_id = 0;
  std::vector<std::uint8_t> payload;
};

struct TableCounts {
  std::uint64_t runs = 0;
  std::uint64_t samples = 0;
  std::uint64_t analysis = 0;
  std::uint64_t alarms = 0;
  std::uint64_t batches = 0;
  friend bool operator==(const TableCounts&, const TableCounts&) = default;
};

// Local relational archive. Logical tables: run_config, samples,
// analysis_results, alarms. batch_log and outbox are bookkeeping for
// idempotent writes and replication. One connection per object; not shared
// between threads.
class Store {
 public:
  // Creates the schema if needed. Unopenable path -> Error(Config); a file
  // carrying a different schema version -> Error(Config).
  explicit Store(const std::filesystem::path& path);
  ~Store();
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  void begin_run(const RunInfo& run);
  std::vector<RunInfo> runs() const;
  std::optional<RunInfo> run(const std::string& run_id) const;

  // Atomic and idempotent by (run, batch_id). When `outbox_payload` is
  // non-empty it is queued for replication in the same transaction.
  // Returns true when the batch was newly committed.
  bool write_batch(const ArchiveBatch& batch, std::span<const std::uint8_t> outbox_payload = {});
  bool has_batch(const RunId& run, std::uint64_t batch_id) const;
  // kNoBatches when batch 0 is missing.
  std::uint64_t highest_contiguous(const RunId& run);

  std::vector<SampleRecord> query(const QueryFilter& filter) const;
  std::vector<AnalysisRecord> query_analysis(const QueryFilter& filter) const;
  std::vector<AlarmRecord> query_alarms(const QueryFilter& filter) const;
  TableCounts counts(const std::optional<std::string>& run_id = std::nullopt) const;

  std::vector<OutboxEntry> outbox_after(const RunId& run, std::optional<std::uint64_t> after,
                                        std::size_t limit) const;
  void outbox_remove_through(const RunId& run, std::uint64_t batch_id);
  std::uint64_t outbox_size(const RunId& run) const;

  // Test hook: when set and returning true, the next write_batch fails with
  // Error(Store) before touching the database.
  void set_fault_hook(std::function<bool()> hook) { fault_hook_ = std::move(hook); }

  const std::filesystem::path& path() const { return path_; }

 private:
  std::vector<ChannelId> channels_for(const QueryFilter& f, const std::string& run_id) const;
  std::vector<std::string> run_ids_for(const QueryFilter& f) const;

  std::filesystem::path path_;
  sqlite3* db_ = nullptr;
  std::function<bool()> fault_hook_;
  std::map<RunId, std::uint64_t> contiguous_;
};

}  // namespace motormon
