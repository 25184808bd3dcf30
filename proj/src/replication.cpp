#include "motormon/replication.hpp"

#include <algorithm>
#include <chrono>

#include "motormon/error.hpp"
#include "motormon/wire.hpp"

namespace motormon {

Replicator::Replicator(std::filesystem::path store_path, RunInfo run, ReplicatorOptions options)
    : store_path_(std::move(store_path)), run_(std::move(run)), options_(std::move(options)) {}

Replicator::~Replicator() { stop(); }

void Replicator::start() { thread_ = std::thread([this] { loop(); }); }

void Replicator::notify() {
  {
    std::lock_guard lock(mu_);
    wake_ = true;
  }
  cv_.notify_all();
}

void Replicator::stop() {
  stop_ = true;
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
}

ReplicatorStats Replicator::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

bool Replicator::drain(std::uint64_t final_batch_count, double timeout_seconds) {
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_seconds);
  std::unique_lock lock(mu_);
  auto done = [&] {
    if (final_batch_count == 0) return true;
    return stats_.remote_highest != kNoBatches && stats_.remote_highest + 1 >= final_batch_count;
  };
  while (!done()) {
    if (cv_.wait_until(lock, deadline) == std::cv_status::timeout) return done();
  }
  return true;
}

void Replicator::sleep_for(double seconds) {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, std::chrono::duration<double>(seconds), [&] { return stop_.load(); });
}

void Replicator::loop() {
  std::optional<Store> store;
  double backoff = options_.backoff_base;
  while (!stop_) {
    try {
      if (!store) store.emplace(store_path_);
      Socket sock = connect_tcp(options_.remote, options_.io_timeout_ms);
      {
        std::lock_guard lock(mu_);
        ++stats_.connects;
      }
      backoff = options_.backoff_base;
      if (session(*store, sock)) return;
    } catch (const Error& e) {
      std::lock_guard lock(mu_);
      ++stats_.connect_failures;
      last_error_ = e.what();
    }
    if (stop_) return;
    sleep_for(backoff);
    backoff = std::min(backoff * 2.0, options_.backoff_cap);
  }
}

// Returns true when stopped, false when the link failed.
bool Replicator::session(Store& store, Socket& sock) {
  const int timeout = options_.io_timeout_ms;
  auto read_ack = [&](std::uint64_t& hc) -> int {  // 1 ack, 0 nak, -1 link failure
    auto r = read_message(sock, timeout, &stop_);
    if (r.outcome != ReadOutcome::Message) return -1;
    if (r.message.type == MessageType::Nak) return 0;
    if (r.message.type != MessageType::Ack) return -1;
    hc = decode_ack(r.message.payload);
    return 1;
  };
  auto record_ack = [&](std::uint64_t hc) {
    {
      std::lock_guard lock(mu_);
      stats_.remote_highest = hc;
    }
    cv_.notify_all();
    if (hc != kNoBatches) store.outbox_remove_through(run_.id, hc);
  };

  if (write_message(sock, MessageType::Hello, encode_hello(run_), timeout) != IoStatus::Ok) return false;
  std::uint64_t hc = kNoBatches;
  if (read_ack(hc) != 1) return false;
  record_ack(hc);

  while (!stop_) {
    auto entries = store.outbox_after(run_.id, hc == kNoBatches ? std::nullopt : std::optional(hc),
                                      options_.window);
    if (entries.empty()) {
      std::unique_lock lock(mu_);
      cv_.wait_for(lock, std::chrono::milliseconds(50), [&] { return wake_ || stop_.load(); });
      wake_ = false;
      continue;
    }
    std::size_t expected = 0;
    for (const auto& e : entries) {
      const int copies = options_.duplicate_hook && options_.duplicate_hook(e.batch_id) ? 2 : 1;
      for (int c = 0; c < copies; ++c) {
        if (write_message(sock, MessageType::Batch, e.payload, timeout) != IoStatus::Ok) return false;
        ++expected;
      }
      std::lock_guard lock(mu_);
      stats_.batches_sent += 1;
      stats_.duplicates_sent += static_cast<std::uint64_t>(copies - 1);
    }
    for (std::size_t i = 0; i < expected; ++i) {
      std::uint64_t acked = hc;
      const int rc = read_ack(acked);
      if (rc < 0) return stop_.load();
      if (rc == 0) {
        std::lock_guard lock(mu_);
        ++stats_.naks;
        continue;
      }
      hc = acked;
    }
    record_ack(hc);
  }
  return true;
}

RemoteServer::RemoteServer(const Endpoint& listen, std::filesystem::path store_path)
    : listener_(listen), store_(store_path) {}

RemoteServer::~RemoteServer() { stop(); }

void RemoteServer::start() { acceptor_ = std::thread([this] { accept_loop(); }); }

void RemoteServer::stop() {
  stop_ = true;
  if (acceptor_.joinable()) acceptor_.join();
  std::list<std::thread> conns;
  {
    std::lock_guard lock(conn_mu_);
    conns.swap(connections_);
  }
  for (auto& t : conns) t.join();
  listener_.close();
}

void RemoteServer::accept_loop() {
  while (!stop_) {
    auto sock = listener_.accept(100);
    if (!sock) continue;
    std::lock_guard lock(conn_mu_);
    connections_.emplace_back([this, s = std::move(*sock)]() mutable { serve(std::move(s)); });
  }
}

void RemoteServer::serve(Socket sock) {
  constexpr int kSendTimeout = 2000;
  std::optional<RunId> run;
  auto nak = [&] {
    ++naks_;
    return write_message(sock, MessageType::Nak, {}, kSendTimeout) == IoStatus::Ok;
  };
  auto ack = [&](std::uint64_t hc) {
    return write_message(sock, MessageType::Ack, encode_ack(hc), kSendTimeout) == IoStatus::Ok;
  };

  while (!stop_) {
    auto r = read_message(sock, -1, &stop_);
    if (r.outcome == ReadOutcome::BadCrc) {
      if (!nak()) return;
      continue;
    }
    if (r.outcome == ReadOutcome::Garbage) {
      nak();
      return;
    }
    if (r.outcome != ReadOutcome::Message) return;

    try {
      if (r.message.type == MessageType::Hello) {
        const RunInfo info = decode_hello(r.message.payload);
        std::uint64_t hc;
        {
          std::lock_guard lock(store_mu_);
          store_.begin_run(info);
          hc = store_.highest_contiguous(info.id);
        }
        run = info.id;
        if (!ack(hc)) return;
      } else if (r.message.type == MessageType::Batch && run) {
        const ArchiveBatch batch = decode_batch(r.message.payload);
        if (batch.run_id != *run) {
          if (!nak()) return;
          continue;
        }
        std::uint64_t hc;
        {
          std::lock_guard lock(store_mu_);
          if (store_.write_batch(batch)) ++applied_;
          hc = store_.highest_contiguous(batch.run_id);
        }
        if (!ack(hc)) return;
      } else {
        if (!nak()) return;
      }
    } catch (const Error&) {
      if (!nak()) return;
    }
  }
}

}  // namespace motormon
