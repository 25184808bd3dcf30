#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>

#include "motormon/archive.hpp"
#include "motormon/store.hpp"
#include "motormon/wire.hpp"

namespace motormon {

struct ArchiveWriterOptions {
  // Write-ahead journal of wire-encoded HELLO/BATCH messages. Defaults to
  // "<store>.journal".
  std::optional<std::filesystem::path> journal;
  // Queue batches for replication in the store's outbox.
  bool replicate = false;
  std::size_t retry_capacity = 64;
  // Truncate the journal after this many commits once nothing is pending.
  std::size_t truncate_every = 500;
};

struct ArchiveWriterStats {
  std::uint64_t committed = 0;   // newly committed batches
  std::uint64_t duplicates = 0;  // writes that found the batch already present
  std::uint64_t failures = 0;    // store write attempts that threw
  std::uint64_t spilled = 0;     // batches dropped from memory, left to the journal
  std::uint64_t replayed = 0;    // batches recovered from the journal at finish
  std::uint64_t pending = 0;     // still uncommitted after finish
};

// Local archiving leg. Every batch is appended to the journal before the
// store commit; store failures go to a bounded retry queue and spill to the
// journal when it overflows.
class ArchiveWriter {
 public:
  ArchiveWriter(Store& store, const RunInfo& run, ArchiveWriterOptions options = {});
  ~ArchiveWriter();
  ArchiveWriter(const ArchiveWriter&) = delete;
  ArchiveWriter& operator=(const ArchiveWriter&) = delete;

  void write(const ArchiveBatch& batch);
  // Retries the queue, replays the journal if anything spilled, and removes
  // the journal when everything is committed.
  ArchiveWriterStats finish();

  const ArchiveWriterStats& stats() const { return stats_; }
  const std::filesystem::path& journal_path() const { return journal_path_; }

 private:
  bool try_commit(const ArchiveBatch& batch);
  void open_journal(bool truncate);
  void append(MessageType type, std::span<const std::uint8_t> payload);

  Store& store_;
  RunInfo run_;
  ArchiveWriterOptions options_;
  std::filesystem::path journal_path_;
  std::ofstream journal_;
  std::deque<ArchiveBatch> retry_;
  std::size_t since_truncate_ = 0;
  ArchiveWriterStats stats_;
  bool finished_ = false;
};

struct ReplayResult {
  std::uint64_t runs = 0;
  std::uint64_t batches = 0;     // BATCH records read
  std::uint64_t committed = 0;   // newly committed by the replay
  bool torn_tail = false;        // an incomplete final record was ignored
};

// Applies a journal to a store. Idempotent. A torn final record (crash during
// append) is ignored; corruption before the end throws FormatError.
ReplayResult replay_journal(const std::filesystem::path& journal, Store& store, bool replicate = false);

}  // namespace motormon
