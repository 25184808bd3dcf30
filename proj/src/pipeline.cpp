#include "motormon/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>

namespace motormon {

namespace {

using Clock = std::chrono::steady_clock;

class SynthSource final : public FrameSource {
 public:
  SynthSource(const ChannelSpec& spec, const MotorProfile& profile, std::uint64_t seed)
      : synth_(spec, profile, seed) {}
  SampleFrame next_frame(double t_begin, double t_end) override { return synth_.next_frame(t_begin, t_end); }

 private:
  ChannelSynth synth_;
};

class ReplaySignalSource final : public FrameSource {
 public:
  ReplaySignalSource(ChannelId id, ContinuousSignal signal) : id_(id), signal_(std::move(signal)) {}

  SampleFrame next_frame(double t_begin, double t_end) override {
    const auto n = static_cast<std::int64_t>(signal_.values.size());
    auto index = [&](double t) {
      return std::clamp<std::int64_t>(sample_index_at(t - signal_.t0, signal_.rate), 0, n);
    };
    const std::int64_t i0 = index(t_begin);
    const std::int64_t i1 = std::max(i0, index(t_end));
    SampleFrame f;
    f.channel_id = id_;
    f.sample_rate = signal_.rate;
    f.t0 = signal_.t0 + static_cast<double>(i0) / signal_.rate;
    f.values.assign(signal_.values.begin() + i0, signal_.values.begin() + i1);
    f.sequence = sequence_++;
    return f;
  }

 private:
  ChannelId id_;
  ContinuousSignal signal_;
  std::uint64_t sequence_ = 0;
};

class ReplayPulseSource final : public FrameSource {
 public:
  ReplayPulseSource(ChannelId id, double rate, std::vector<double> pulses)
      : id_(id), rate_(rate), pulses_(std::move(pulses)) {}

  SampleFrame next_frame(double t_begin, double t_end) override {
    SampleFrame f;
    f.channel_id = id_;
    f.sample_rate = rate_;
    f.t0 = t_begin;
    const auto lo = std::lower_bound(pulses_.begin(), pulses_.end(), t_begin);
    const auto hi = std::lower_bound(pulses_.begin(), pulses_.end(), t_end);
    f.values.assign(lo, hi);
    f.sequence = sequence_++;
    return f;
  }

 private:
  ChannelId id_;
  double rate_;
  std::vector<double> pulses_;
  std::uint64_t sequence_ = 0;
};

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::uint64_t round_count(double duration, double frame_duration) {
  if (duration <= 0.0) return 0;
  return static_cast<std::uint64_t>(std::ceil(duration / frame_duration - 1e-9));
}

}  // namespace

SourceSet make_sources(const RunConfig& cfg) {
  SourceSet set;
  set.duration = cfg.duration;
  if (cfg.profile) {
    set.channels = cfg.channels;
    for (const auto& c : set.channels) set.sources.push_back(std::make_unique<SynthSource>(c, *cfg.profile, cfg.seed));
    return set;
  }

  const Recording rec = read_recording(*cfg.replay);
  double end = cfg.duration;
  for (auto spec : rec.channels) {
    if (const auto* override_spec = cfg.channel(spec.id)) {
      if (override_spec->kind != spec.kind) {
        throw Error(ErrorCategory::Config, "channel " + std::to_string(spec.id) + ": kind differs from the recording");
      }
      spec.filter = override_spec->filter;
    } else {
      spec.filter = default_filter(spec.kind);
    }
    if (spec.kind == ChannelKind::Tachometer) {
      std::vector<double> pulses;
      for (const auto& f : rec.frames) {
        if (f.channel_id == spec.id) pulses.insert(pulses.end(), f.values.begin(), f.values.end());
      }
      set.sources.push_back(std::make_unique<ReplayPulseSource>(spec.id, spec.sample_rate, std::move(pulses)));
    } else {
      ContinuousSignal sig = concat_channel(rec, spec.id);
      end = std::min(end, sig.t0 + static_cast<double>(sig.values.size()) / sig.rate);
      set.sources.push_back(std::make_unique<ReplaySignalSource>(spec.id, std::move(sig)));
    }
    set.channels.push_back(spec);
  }
  set.duration = std::max(0.0, end);
  return set;
}

std::uint64_t simulate_to_recording(const RunConfig& cfg, const std::filesystem::path& out) {
  SourceSet set = make_sources(cfg);
  RecordingWriter writer(out, set.channels);
  const double fd = cfg.pipeline.frame_duration;
  const std::uint64_t rounds = round_count(set.duration, fd);
  for (std::uint64_t r = 0; r < rounds; ++r) {
    const double tb = static_cast<double>(r) * fd;
    const double te = std::min(static_cast<double>(r + 1) * fd, set.duration);
    for (auto& src : set.sources) writer.write(src->next_frame(tb, te));
  }
  writer.flush();
  return writer.frames_written();
}

Pipeline::Pipeline(RunConfig config, PipelineOptions options)
    : config_(std::move(config)),
      options_(std::move(options)),
      storage_q_(config_.pipeline.storage_capacity, QueuePolicy::Lossless),
      monitor_q_(1, QueuePolicy::LatestValue) {
  validate_config(config_);
  sources_ = make_sources(config_);

  std::vector<std::size_t> vib, tach, aux;
  for (std::size_t i = 0; i < sources_.channels.size(); ++i) {
    const auto kind = sources_.channels[i].kind;
    (is_vibration(kind) ? vib : kind == ChannelKind::Tachometer ? tach : aux).push_back(i);
  }
  for (auto* g : {&vib, &tach, &aux}) {
    if (!g->empty()) groups_.push_back(*g);
  }

  run_.id = options_.run_id ? *options_.run_id : random_run_id();
  run_.started_at = utc_now();
  run_.channels = channels_json(sources_.channels);
  run_.thresholds = thresholds_json(config_.thresholds);
  run_.analysis = analysis_json(config_.analysis);

  BaselineSet baseline;
  if (config_.analysis.baseline && !config_.analysis.record_baseline) {
    baseline = load_baseline(*config_.analysis.baseline);
  }
  processor_ = std::make_unique<Processor>(config_, sources_.channels, baseline);

  store_ = std::make_unique<Store>(config_.archive.store);
  if (options_.hooks.store_fault) store_->set_fault_hook(options_.hooks.store_fault);
  ArchiveWriterOptions wopts;
  wopts.journal = config_.archive.journal;
  wopts.replicate = config_.archive.remote.has_value();
  writer_ = std::make_unique<ArchiveWriter>(*store_, run_, wopts);
  if (config_.archive.remote) {
    ReplicatorOptions ropts;
    ropts.remote = parse_endpoint(*config_.archive.remote);
    ropts.duplicate_hook = options_.hooks.duplicate_send;
    replicator_ = std::make_unique<Replicator>(config_.archive.store, run_, ropts);
  }
  if (config_.archive.recording) {
    recording_ = std::make_unique<RecordingWriter>(*config_.archive.recording, sources_.channels);
  }

  for (std::size_t i = 0; i < sources_.channels.size(); ++i) {
    tier1_.push_back(std::make_unique<BoundedQueue<Tier1Item>>(config_.pipeline.tier1_capacity, QueuePolicy::Lossless));
  }
  total_rounds_ = round_count(sources_.duration, config_.pipeline.frame_duration);
  stop_round_ = total_rounds_;
}

Pipeline::~Pipeline() {
  if (!started_) return;
  try {
    shutdown();
    finalize();
  } catch (...) {
  }
}

double Pipeline::round_begin(std::uint64_t r) const {
  return static_cast<double>(r) * config_.pipeline.frame_duration;
}

double Pipeline::round_end(std::uint64_t r) const {
  return std::min(static_cast<double>(r + 1) * config_.pipeline.frame_duration, sources_.duration);
}

bool Pipeline::claim_round(std::uint64_t round) {
  std::lock_guard lock(round_mu_);
  if (abort_ || round >= stop_round_) return false;
  max_started_ = std::max(max_started_, static_cast<std::int64_t>(round));
  return true;
}

void Pipeline::request_stop() {
  std::lock_guard lock(round_mu_);
  stop_round_ = std::min(stop_round_, static_cast<std::uint64_t>(max_started_ + 1));
}

void Pipeline::abort_all() {
  abort_ = true;
  for (auto& q : tier1_) q->abandon();
  storage_q_.abandon();
  monitor_q_.abandon();
}

void Pipeline::fail(const Error& e) {
  {
    std::lock_guard lock(error_mu_);
    if (!error_category_) {
      error_category_ = e.category();
      error_ = e.what();
    }
  }
  abort_all();
}

void Pipeline::fail(const std::exception& e) { fail(Error(ErrorCategory::Runtime, e.what())); }

void Pipeline::start() {
  if (started_) return;
  started_ = true;
  started_at_ = Clock::now();
  if (replicator_) replicator_->start();
  storage_thread_ = std::thread([this] { storage_loop(); });
  monitor_thread_ = std::thread([this] { monitor_loop(); });
  processor_thread_ = std::thread([this] { process_loop(); });
  for (const auto& g : groups_) producers_.emplace_back([this, g] { producer(g); });
}

void Pipeline::producer(std::vector<std::size_t> group) {
  try {
    for (std::uint64_t r = 0;; ++r) {
      if (!claim_round(r)) break;
      const double tb = round_begin(r);
      const double te = round_end(r);
      for (std::size_t ci : group) {
        SampleFrame frame = sources_.sources[ci]->next_frame(tb, te);
        frames_produced_.fetch_add(1);
        if (sources_.channels[ci].kind != ChannelKind::Tachometer) samples_produced_.fetch_add(frame.values.size());
        if (!tier1_[ci]->push({std::move(frame), Clock::now()})) return;
      }
      if (config_.pipeline.realtime) {
        std::this_thread::sleep_until(started_at_ + std::chrono::duration_cast<Clock::duration>(
                                                        std::chrono::duration<double>(te)));
      }
    }
  } catch (const Error& e) {
    fail(e);
  } catch (const std::exception& e) {
    fail(e);
  }
  for (std::size_t ci : group) tier1_[ci]->close();
}

void Pipeline::process_loop() {
  const auto& hooks = options_.hooks;
  try {
    for (std::uint64_t r = 0;; ++r) {
      for (std::size_t ci = 0; ci < tier1_.size(); ++ci) {
        auto in = tier1_[ci]->pop();
        if (!in) {
          if (ci != 0 && !abort_) throw Error(ErrorCategory::Runtime, "channel queues ended out of step");
          goto done;
        }
        if (hooks.consumer_delay.count() > 0) std::this_thread::sleep_for(hooks.consumer_delay);
        while (hooks.wedge && hooks.wedge->load() && !abort_) {
          std::this_thread::sleep_for(std::chrono::milliseconds(5));
        }
        if (abort_) goto done;
        ProcessedItem item = processor_->process(in->frame);
        item.produced_at = in->produced_at;
        samples_produced_.fetch_add(item.point_values.size());
        frames_processed_.fetch_add(1);
        if (!storage_q_.push(std::move(item))) goto done;
      }
      const double te = round_end(r);
      if (!storage_q_.push(processor_->end_round(r, te))) goto done;
      monitor_q_.push(processor_->snapshot(r, te));
      rounds_done_.fetch_add(1);
    }
  } catch (const Error& e) {
    fail(e);
  } catch (const std::exception& e) {
    fail(e);
  }
done:
  storage_q_.close();
  monitor_q_.close();
}

void Pipeline::storage_loop() {
  Batcher batcher(run_.id, config_.archive.period);
  double closed_to = 0.0;
  double last_end = 0.0;
  auto commit = [&](const std::vector<ArchiveBatch>& batches) {
    for (const auto& b : batches) {
      writer_->write(b);
      ++batches_written_;
    }
    if (replicator_ && !batches.empty()) replicator_->notify();
  };
  try {
    while (auto item = storage_q_.pop()) {
      if (item->kind == ProcessedItem::Kind::Frame) {
        if (recording_) recording_->write(item->raw);
        if (!item->physical.values.empty()) batcher.add_frame(item->physical);
        if (!item->point_times.empty()) batcher.add_points(item->raw.channel_id, item->point_times, item->point_values);
        for (const auto& e : item->events) batcher.add_event(e);
        const double latency = std::chrono::duration<double>(Clock::now() - item->produced_at).count();
        latency_sum_ += latency;
        latency_max_ = std::max(latency_max_, latency);
        ++latency_n_;
        frames_stored_.fetch_add(1);
      } else {
        for (auto& s : item->spectra) batcher.add_spectrum(std::move(s));
        for (const auto& e : item->events) batcher.add_event(e);
        commit(batcher.close_through(closed_to));
        closed_to = item->round_end;
        last_end = item->round_end;
      }
    }
    if (!abort_) {
      commit(batcher.close_through(last_end));
      commit(batcher.flush());
    }
    samples_batched_ = batcher.samples_batched();
    writer_->finish();
    if (recording_) recording_->flush();
  } catch (const Error& e) {
    samples_batched_ = batcher.samples_batched();
    fail(e);
  } catch (const std::exception& e) {
    fail(e);
  }
  sim_end_ = last_end;
  finished_at_ = Clock::now();
  {
    std::lock_guard lock(done_mu_);
    storage_done_ = true;
  }
  done_cv_.notify_all();
}

void Pipeline::monitor_loop() {
  std::optional<Clock::time_point> last;
  const auto interval = std::chrono::duration<double>(config_.pipeline.status_interval);
  while (auto snap = monitor_q_.pop()) {
    if (!options_.on_status) continue;
    const auto now = Clock::now();
    if (!last || now - *last >= interval) {
      options_.on_status(*snap);
      status_lines_.fetch_add(1);
      last = now;
    }
  }
}

bool Pipeline::wait_for(std::chrono::milliseconds timeout) {
  if (!started_) return true;
  std::unique_lock lock(done_mu_);
  return done_cv_.wait_for(lock, timeout, [&] { return storage_done_; });
}

ShutdownResult Pipeline::shutdown() {
  std::lock_guard guard(shutdown_mu_);
  if (shutdown_result_) return *shutdown_result_;
  ShutdownResult result;
  if (started_) {
    request_stop();
    bool done;
    {
      std::unique_lock lock(done_mu_);
      done = done_cv_.wait_for(lock, std::chrono::duration<double>(config_.pipeline.drain_timeout),
                               [&] { return storage_done_; });
    }
    if (!done) {
      result.drained = false;
      result.stranded_frames = frames_produced_.load() - frames_stored_.load();
      abort_all();
    } else {
      result.stranded_frames = frames_produced_.load() - frames_stored_.load();
      result.drained = !abort_ && result.stranded_frames == 0;
    }
    for (auto& t : producers_) t.join();
    if (processor_thread_.joinable()) processor_thread_.join();
    if (storage_thread_.joinable()) storage_thread_.join();
    if (monitor_thread_.joinable()) monitor_thread_.join();
  }
  shutdown_result_ = result;
  return result;
}

PipelineStats Pipeline::wait() {
  while (!wait_for(std::chrono::milliseconds(200))) {
  }
  shutdown();
  finalize();
  return final_;
}

void Pipeline::finalize() {
  if (finalized_) return;
  finalized_ = true;
  PipelineStats& s = final_;
  s.run_id = run_id_hex(run_.id);
  s.rounds = rounds_done_.load();
  s.frames_produced = frames_produced_.load();
  s.frames_processed = frames_processed_.load();
  s.frames_stored = frames_stored_.load();
  s.samples_produced = samples_produced_.load();
  s.samples_batched = samples_batched_.load();
  s.samples_rejected = processor_->samples_rejected();
  for (std::size_t i = 0; i < tier1_.size(); ++i) {
    s.queues.push_back({"tier1/" + std::to_string(sources_.channels[i].id), tier1_[i]->capacity(), tier1_[i]->max_depth()});
  }
  s.queues.push_back({"storage", storage_q_.capacity(), storage_q_.max_depth()});
  s.queues.push_back({"monitor", monitor_q_.capacity(), monitor_q_.max_depth()});
  s.dropped_latest_value = monitor_q_.dropped();
  s.latency_max = latency_max_;
  s.latency_mean = latency_n_ ? latency_sum_ / static_cast<double>(latency_n_) : 0.0;
  s.batches_written = batches_written_;
  s.archive = writer_->stats();
  s.sim_seconds = sim_end_;
  s.wall_seconds = started_ ? std::chrono::duration<double>(finished_at_ - started_at_).count() : 0.0;
  s.status_lines = status_lines_.load();
  s.analysis_blocks = processor_->blocks_analyzed();
  s.shutdown = shutdown_result_.value_or(ShutdownResult{});
  s.final_state = processor_->state();
  s.events = processor_->events();
  std::map<ChannelId, DiagnosisReport> last;
  for (const auto& d : processor_->diagnoses()) last[d.channel_id] = d;
  for (auto& [ch, d] : last) s.last_diagnoses.push_back(d);

  if (replicator_) {
    if (!abort_) {
      s.remote_converged = replicator_->drain(batches_written_, config_.archive.replication_drain_timeout);
    }
    replicator_->stop();
    s.replication = replicator_->stats();
  }
  std::lock_guard lock(error_mu_);
  s.error_category = error_category_;
  s.error = error_;
}

PipelineStats run_pipeline(const RunConfig& config, PipelineOptions options) {
  Pipeline p(config, std::move(options));
  p.start();
  return p.wait();
}

}  // namespace motormon
