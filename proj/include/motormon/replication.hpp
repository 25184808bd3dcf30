#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <list>
#include <mutex>
#include <thread>

#include "motormon/archive.hpp"
#include "motormon/net.hpp"
#include "motormon/store.hpp"

namespace motormon {

struct ReplicatorOptions {
  Endpoint remote;
  double backoff_base = 0.1;  // seconds
  double backoff_cap = 10.0;
  int io_timeout_ms = 2000;
  std::size_t window = 64;  // batches in flight per round trip
  // Test hook: when it returns true for a batch id, that batch is sent twice.
  std::function<bool(std::uint64_t)> duplicate_hook;
};

struct ReplicatorStats {
  std::uint64_t batches_sent = 0;
  std::uint64_t duplicates_sent = 0;
  std::uint64_t naks = 0;
  std::uint64_t connects = 0;
  std::uint64_t connect_failures = 0;
  std::uint64_t remote_highest = kNoBatches;
};

// Ships the run's outbox to a remote store. Runs on its own thread with its
// own store connection, so a slow or absent remote never blocks local
// commits. Reconnects with exponential backoff.
class Replicator {
 public:
  Replicator(std::filesystem::path store_path, RunInfo run, ReplicatorOptions options);
  ~Replicator();
  Replicator(const Replicator&) = delete;
  Replicator& operator=(const Replicator&) = delete;

  void start();
  // Wakes the sender after new outbox entries were committed.
  void notify();
  // Waits until the outbox is empty and `final_batch_count` batches are
  // acknowledged, or the timeout passes. Returns true on convergence.
  bool drain(std::uint64_t final_batch_count, double timeout_seconds);
  void stop();

  ReplicatorStats stats() const;

 private:
  void loop();
  bool session(Store& store, Socket& sock);
  void sleep_for(double seconds);

  std::filesystem::path store_path_;
  RunInfo run_;
  ReplicatorOptions options_;
  std::thread thread_;
  std::atomic<bool> stop_{false};
  mutable std::mutex mu_;
  std::condition_variable cv_;
  bool wake_ = false;
  ReplicatorStats stats_;
  std::string last_error_;
};

// Remote leg: accepts replication connections and applies batches to its own
// store idempotently, replying ACK (highest contiguous batch) or NAK.
class RemoteServer {
 public:
  RemoteServer(const Endpoint& listen, std::filesystem::path store_path);
  ~RemoteServer();
  RemoteServer(const RemoteServer&) = delete;
  RemoteServer& operator=(const RemoteServer&) = delete;

  std::uint16_t port() const { return listener_.port(); }
  void start();
  void stop();

  std::uint64_t batches_applied() const { return applied_.load(); }
  std::uint64_t naks_sent() const { return naks_.load(); }

 private:
  void accept_loop();
  void serve(Socket sock);

  Listener listener_;
  std::mutex store_mu_;
  Store store_;
  std::thread acceptor_;
  std::mutex conn_mu_;
  std::list<std::thread> connections_;
  std::atomic<bool> stop_{false};
  std::atomic<std::uint64_t> applied_{0};
  std::atomic<std::uint64_t> naks_{0};
};

}  // namespace motormon
