#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "motormon/archive_writer.hpp"
#include "motormon/bounded_queue.hpp"
#include "motormon/config.hpp"
#include "motormon/error.hpp"
#include "motormon/processor.hpp"
#include "motormon/recording.hpp"
#include "motormon/replication.hpp"

namespace motormon {

// Test hooks. None of them is active by default.
struct PipelineHooks {
  std::chrono::microseconds consumer_delay{0};  // added per frame in the processing activity
  std::shared_ptr<std::atomic<bool>> wedge;     // processing stalls while set
  std::function<bool()> store_fault;            // local store write fails while true
  std::function<bool(std::uint64_t)> duplicate_send;  // replicate this batch id twice
};

struct PipelineOptions {
  PipelineHooks hooks;
  // Called from the monitor activity at most once per status_interval.
  std::function<void(const StatusSnapshot&)> on_status;
  std::optional<RunId> run_id;  // random when empty
};

struct QueueStats {
  std::string name;
  std::size_t capacity = 0;
  std::size_t max_depth = 0;
};

struct ShutdownResult {
  bool drained = true;
  std::uint64_t stranded_frames = 0;
};

struct PipelineStats {
  std::string run_id;
  std::uint64_t rounds = 0;
  std::uint64_t frames_produced = 0;
  std::uint64_t frames_processed = 0;
  std::uint64_t frames_stored = 0;
  std::uint64_t samples_produced = 0;  // sampled channels and tachometer speed points
  std::uint64_t samples_batched = 0;
  std::uint64_t samples_rejected = 0;
  std::vector<QueueStats> queues;
  std::uint64_t dropped_latest_value = 0;
  double latency_max = 0.0;   // seconds, acquisition to storage
  double latency_mean = 0.0;
  std::uint64_t batches_written = 0;
  ArchiveWriterStats archive;
  std::optional<ReplicatorStats> replication;
  bool remote_converged = false;
  double sim_seconds = 0.0;
  double wall_seconds = 0.0;
  std::uint64_t status_lines = 0;
  std::uint64_t analysis_blocks = 0;
  ShutdownResult shutdown;
  MotorState final_state;
  std::vector<AlarmEvent> events;
  std::vector<DiagnosisReport> last_diagnoses;  // latest per vibration channel
  std::optional<ErrorCategory> error_category;
  std::string error;

  double realtime_factor() const { return wall_seconds > 0.0 ? sim_seconds / wall_seconds : 0.0; }
  std::uint64_t lossless_drops() const { return frames_produced - frames_stored; }
};

// Per-channel frame generator for one run.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  // Raw frame covering [t_begin, t_end).
  virtual SampleFrame next_frame(double t_begin, double t_end) = 0;
};

struct SourceSet {
  std::vector<ChannelSpec> channels;  // processing order
  std::vector<std::unique_ptr<FrameSource>> sources;
  double duration = 0.0;  // capped by the recording length in replay mode
};

// Simulator or replay sources for a validated config.
SourceSet make_sources(const RunConfig& config);

// Writes `duration` seconds of the configured sources to a recording file in
// frame_duration rounds. Returns frames written.
std::uint64_t simulate_to_recording(const RunConfig& config, const std::filesystem::path& out);

// Two-tier pipeline: per-group producers -> lossless tier-1 queues ->
// processing -> lossless storage queue + latest-value monitor queue.
class Pipeline {
 public:
  // Opens the store and loads sources and baseline. Store problems throw
  // Error(Config).
  Pipeline(RunConfig config, PipelineOptions options = {});
  ~Pipeline();
  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  void start();
  // Stops producers, drains in-flight frames within drain_timeout. Repeat
  // calls return the first result.
  ShutdownResult shutdown();
  // True once the run has finished (duration elapsed, shutdown or failure).
  bool wait_for(std::chrono::milliseconds timeout);
  // Waits for completion and returns final stats.
  PipelineStats wait();

  const RunId& run_id() const { return run_.id; }
  const RunConfig& config() const { return config_; }

 private:
  struct Tier1Item {
    SampleFrame frame;
    std::chrono::steady_clock::time_point produced_at;
  };

  bool claim_round(std::uint64_t round);
  void request_stop();
  void abort_all();
  void fail(const Error& e);
  void fail(const std::exception& e);
  void producer(std::vector<std::size_t> group);
  void process_loop();
  void storage_loop();
  void monitor_loop();
  void finalize();
  double round_begin(std::uint64_t r) const;
  double round_end(std::uint64_t r) const;

  RunConfig config_;
  PipelineOptions options_;
  SourceSet sources_;
  std::vector<std::vector<std::size_t>> groups_;
  RunInfo run_;
  std::unique_ptr<Store> store_;
  std::unique_ptr<ArchiveWriter> writer_;
  std::unique_ptr<Replicator> replicator_;
  std::unique_ptr<RecordingWriter> recording_;
  std::unique_ptr<Processor> processor_;

  std::vector<std::unique_ptr<BoundedQueue<Tier1Item>>> tier1_;
  BoundedQueue<ProcessedItem> storage_q_;
  BoundedQueue<StatusSnapshot> monitor_q_;

  std::uint64_t total_rounds_ = 0;
  std::mutex round_mu_;
  std::uint64_t stop_round_ = 0;
  std::int64_t max_started_ = -1;

  std::vector<std::thread> producers_;
  std::thread processor_thread_;
  std::thread storage_thread_;
  std::thread monitor_thread_;

  std::atomic<bool> abort_{false};
  std::atomic<std::uint64_t> frames_produced_{0};
  std::atomic<std::uint64_t> frames_processed_{0};
  std::atomic<std::uint64_t> frames_stored_{0};
  std::atomic<std::uint64_t> samples_produced_{0};
  std::atomic<std::uint64_t> samples_batched_{0};
  std::atomic<std::uint64_t> status_lines_{0};
  std::atomic<std::uint64_t> rounds_done_{0};
  std::uint64_t batches_written_ = 0;
  double latency_sum_ = 0.0;
  double latency_max_ = 0.0;
  std::uint64_t latency_n_ = 0;
  double sim_end_ = 0.0;

  std::chrono::steady_clock::time_point started_at_{};
  std::chrono::steady_clock::time_point finished_at_{};
  std::mutex done_mu_;
  std::condition_variable done_cv_;
  bool storage_done_ = false;
  bool started_ = false;

  std::mutex shutdown_mu_;
  std::optional<ShutdownResult> shutdown_result_;
  bool finalized_ = false;
  PipelineStats final_;

  std::mutex error_mu_;
  std::optional<ErrorCategory> error_category_;
  std::string error_;
};

// Runs a whole pipeline to completion. Config/store problems throw
// Error(Config); runtime failures are reported in the stats.
PipelineStats run_pipeline(const RunConfig& config, PipelineOptions options = {});

}  // namespace motormon
