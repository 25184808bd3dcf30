#include "motormon/archive_writer.hpp"

#include <iterator>

#include "motormon/error.hpp"
#include "motormon/wire.hpp"

namespace motormon {

ArchiveWriter::ArchiveWriter(Store& store, const RunInfo& run, ArchiveWriterOptions options)
    : store_(store), run_(run), options_(std::move(options)) {
  journal_path_ = options_.journal ? *options_.journal
                                   : std::filesystem::path(store.path().string() + ".journal");
  store_.begin_run(run_);
  open_journal(true);
}

ArchiveWriter::~ArchiveWriter() = default;

void ArchiveWriter::open_journal(bool truncate) {
  journal_.close();
  journal_.open(journal_path_, std::ios::binary | (truncate ? std::ios::trunc : std::ios::app));
  if (!journal_) throw Error(ErrorCategory::Io, "cannot open journal " + journal_path_.string());
  if (truncate) {
    const auto hello = encode_hello(run_);
    append(MessageType::Hello, hello);
  }
}

void ArchiveWriter::append(MessageType type, std::span<const std::uint8_t> payload) {
  const auto bytes = encode_message(type, payload);
  journal_.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  journal_.flush();
  if (!journal_) throw Error(ErrorCategory::Io, "journal write failed: " + journal_path_.string());
}

bool ArchiveWriter::try_commit(const ArchiveBatch& batch) {
  try {
    std::vector<std::uint8_t> payload;
    if (options_.replicate) payload = encode_batch(batch);
    if (store_.write_batch(batch, payload)) {
      ++stats_.committed;
    } else {
      ++stats_.duplicates;
    }
    return true;
  } catch (const Error& e) {
    if (e.category() != ErrorCategory::Store) throw;
    ++stats_.failures;
    return false;
  }
}

void ArchiveWriter::write(const ArchiveBatch& batch) {
  if (finished_) throw Error(ErrorCategory::Runtime, "archive writer already finished");
  append(MessageType::Batch, encode_batch(batch));

  while (!retry_.empty() && try_commit(retry_.front())) retry_.pop_front();
  if (!retry_.empty() || !try_commit(batch)) {
    retry_.push_back(batch);
    if (retry_.size() > options_.retry_capacity) {
      retry_.pop_front();
      ++stats_.spilled;
    }
  }

  if (++since_truncate_ >= options_.truncate_every && retry_.empty() && stats_.spilled == 0) {
    open_journal(true);
    since_truncate_ = 0;
  }
}

ArchiveWriterStats ArchiveWriter::finish() {
  if (finished_) return stats_;
  finished_ = true;
  while (!retry_.empty() && try_commit(retry_.front())) retry_.pop_front();
  journal_.close();
  bool recovered = stats_.spilled == 0;
  if (!recovered && retry_.empty()) {
    try {
      stats_.replayed = replay_journal(journal_path_, store_, options_.replicate).committed;
      recovered = true;
    } catch (const Error& e) {
      if (e.category() != ErrorCategory::Store) throw;
      ++stats_.failures;
    }
  }
  stats_.pending = retry_.size();
  // The journal stays on disk whenever it still holds uncommitted batches.
  if (recovered && retry_.empty()) {
    std::error_code ec;
    std::filesystem::remove(journal_path_, ec);
  }
  return stats_;
}

ReplayResult replay_journal(const std::filesystem::path& journal, Store& store, bool replicate) {
  std::ifstream in(journal, std::ios::binary);
  if (!in) throw Error(ErrorCategory::Io, "cannot open journal " + journal.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  ReplayResult result;
  std::span<const std::uint8_t> rest(bytes);
  std::size_t offset = 0;
  while (!rest.empty()) {
    std::size_t consumed = 0;
    std::optional<Message> msg;
    try {
      msg = decode_message(rest, consumed);
    } catch (const FormatError& e) {
      // A bad CRC on the very last record is a torn append.
      if (consumed == rest.size()) {
        result.torn_tail = true;
        break;
      }
      throw FormatError(ErrorCategory::Format, offset + e.offset(), "corrupt journal record");
    }
    if (!msg) {
      result.torn_tail = true;
      break;
    }
    if (msg->type == MessageType::Hello) {
      store.begin_run(decode_hello(msg->payload));
      ++result.runs;
    } else if (msg->type == MessageType::Batch) {
      const auto batch = decode_batch(msg->payload);
      ++result.batches;
      if (store.write_batch(batch, replicate ? std::span<const std::uint8_t>(msg->payload)
                                             : std::span<const std::uint8_t>())) {
        ++result.committed;
      }
    }
    rest = rest.subspan(consumed);
    offset += consumed;
  }
  return result;
}

}  // namespace motormon
