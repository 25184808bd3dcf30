#include "motormon/processor.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "motormon/error.hpp"
#include "motormon/store.hpp"

namespace motormon {

BaselineSet load_baseline(const BaselineRef& ref) {
  if (!std::filesystem::exists(ref.store)) {
    throw Error(ErrorCategory::Config, "analysis.baseline.store: " + ref.store.string() + " does not exist");
  }
  Store store(ref.store);

  auto baseline_rows = [&](const std::string& run) {
    QueryFilter f;
    f.run_id = run;
    auto rows = store.query_analysis(f);
    std::erase_if(rows, [](const AnalysisRecord& r) { return !r.baseline; });
    return rows;
  };

  std::vector<AnalysisRecord> rows;
  std::string run_id;
  if (ref.run_id) {
    run_id = *ref.run_id;
    if (!store.run(run_id)) throw Error(ErrorCategory::Config, "analysis.baseline.run_id: run " + run_id + " not found");
    rows = baseline_rows(run_id);
  } else {
    auto runs = store.runs();
    for (auto it = runs.rbegin(); it != runs.rend() && rows.empty(); ++it) {
      run_id = run_id_hex(it->id);
      rows = baseline_rows(run_id);
    }
  }
  if (rows.empty()) {
    throw Error(ErrorCategory::Config, "analysis.baseline: no baseline spectra in " + ref.store.string());
  }

  std::map<ChannelId, ChannelKind> kinds;
  const auto doc = nlohmann::json::parse(store.run(run_id)->channels, nullptr, false);
  if (doc.is_array()) {
    for (const auto& c : doc) {
      if (auto k = parse_kind(c.value("kind", ""))) kinds[c.value("id", ChannelId{0})] = *k;
    }
  }

  // Latest spectrum per channel.
  std::map<ChannelId, double> latest;
  for (const auto& r : rows) latest[r.channel_id] = std::max(latest.count(r.channel_id) ? latest[r.channel_id] : r.t, r.t);

  BaselineSet set;
  for (const auto& [ch, t] : latest) {
    auto kind = kinds.find(ch);
    if (kind == kinds.end() || !is_vibration(kind->second)) continue;
    std::vector<std::pair<double, double>> bins;
    for (const auto& r : rows) {
      if (r.channel_id == ch && r.t == t) bins.emplace_back(r.order, r.amplitude);
    }
    std::sort(bins.begin(), bins.end());
    if (bins.size() < 2) continue;
    OrderSpectrum s;
    s.order_resolution = bins[1].first - bins[0].first;
    s.revolutions = 1.0 / s.order_resolution;
    for (const auto& b : bins) s.amplitudes.push_back(b.second);
    set[static_cast<std::size_t>(vibration_axis(kind->second))] = std::move(s);
  }
  return set;
}

Processor::Processor(const RunConfig& config, std::vector<ChannelSpec> channels, BaselineSet baseline)
    : config_(config), channels_(std::move(channels)), baseline_(std::move(baseline)) {
  filters_.resize(channels_.size());
  bool has_tach = false;
  for (std::size_t i = 0; i < channels_.size(); ++i) {
    const auto& c = channels_[i];
    index_[c.id] = i;
    readings_.push_back({c.id, c.kind, 0.0, false});
    if (c.kind == ChannelKind::Tachometer) has_tach = true;
    if (is_vibration(c.kind)) axes_.push_back({c.id, vibration_axis(c.kind), 0.0, c.sample_rate, {}, false});
  }
  for (const auto& t : config_.thresholds) {
    if (!index_.count(t.channel_id)) {
      throw Error(ErrorCategory::Config, "threshold references unknown channel " + std::to_string(t.channel_id));
    }
    thresholds_.emplace_back(t, ThresholdState{});
  }

  ppr_ = config_.pulses_per_rev();
  const auto& a = config_.analysis;
  analysis_on_ = a.enabled && has_tach && !axes_.empty();
  diagnose_on_ = analysis_on_ && !a.record_baseline;
  if (analysis_on_) {
    const auto samples_per_rev = static_cast<std::size_t>(std::lround(2.0 * std::numbers::pi / a.theta_step));
    block_samples_ = samples_per_rev * a.block_revolutions;
    pulses_per_block_ = static_cast<std::size_t>(a.block_revolutions) * ppr_ + 1;
  }
}

void Processor::record(const AlarmEvent& e) {
  events_.push_back(e);
  const auto key = std::make_pair(e.channel_id, e.kind);
  if (e.is_clear()) {
    active_.erase(key);
  } else {
    active_[key] = e;
  }
}

void Processor::run_thresholds(const SampleFrame& frame, bool tach, ProcessedItem& item) {
  for (auto& [spec, state] : thresholds_) {
    if (spec.channel_id != frame.channel_id) continue;
    CheckResult r;
    if (tach) {
      if (item.point_times.empty()) continue;
      r = check_samples(item.point_values, item.point_times, spec, state);
    } else {
      if (frame.values.empty()) continue;
      r = check_frame(frame, spec, state);
    }
    state = r.state;
    for (auto& e : r.events) {
      record(e);
      item.events.push_back(std::move(e));
    }
  }
}

void Processor::trim_axes(double keep_from) {
  for (auto& ax : axes_) {
    if (!ax.started) continue;
    const double first = std::floor((keep_from - ax.t0) * ax.rate) - 1.0;
    if (first <= 0.0) continue;
    const auto drop = std::min(static_cast<std::size_t>(first), ax.values.size());
    ax.values.erase(ax.values.begin(), ax.values.begin() + static_cast<std::ptrdiff_t>(drop));
    ax.t0 += static_cast<double>(drop) / ax.rate;
  }
}

ProcessedItem Processor::process(const SampleFrame& raw) {
  auto it = index_.find(raw.channel_id);
  if (it == index_.end()) {
    throw Error(ErrorCategory::Routing, "frame for unknown channel " + std::to_string(raw.channel_id));
  }
  const std::size_t ci = it->second;
  const ChannelSpec& spec = channels_[ci];

  ProcessedItem item;
  item.raw = raw;
  ChannelReading& reading = readings_[ci];

  if (spec.kind == ChannelKind::Tachometer) {
    for (double t : raw.values) {
      if (last_pulse_ && t > *last_pulse_) {
        item.point_times.push_back(t);
        item.point_values.push_back(60.0 / (static_cast<double>(ppr_) * (t - *last_pulse_)));
      }
      last_pulse_ = t;
      if (analysis_on_) pulses_.push_back(t);
    }
    if (!item.point_values.empty()) {
      reading.value = item.point_values.back();
      reading.valid = true;
    }
    SampleFrame empty = raw;
    empty.values.clear();
    item.physical = std::move(empty);
    run_thresholds(raw, true, item);
    return item;
  }

  try {
    auto res = to_physical(raw, spec, filters_[ci]);
    filters_[ci] = res.state;
    item.physical = std::move(res.frame);
  } catch (const Error& e) {
    if (e.category() != ErrorCategory::DataQuality) throw;
    ++rejected_;
    item.physical = raw;
    item.physical.values.clear();
    return item;
  }

  const auto& values = item.physical.values;
  if (!values.empty()) {
    if (is_vibration(spec.kind)) {
      double ss = 0.0;
      for (double v : values) ss += v * v;
      reading.value = std::sqrt(ss / static_cast<double>(values.size()));
    } else {
      reading.value = values.back();
    }
    reading.valid = true;
  }

  if (analysis_on_ && is_vibration(spec.kind) && !values.empty()) {
    for (auto& ax : axes_) {
      if (ax.channel_id != spec.id) continue;
      if (!ax.started) {
        ax.t0 = item.physical.t0;
        ax.started = true;
      }
      ax.values.insert(ax.values.end(), values.begin(), values.end());
    }
  }

  run_thresholds(item.physical, false, item);
  return item;
}

bool Processor::block_ready() const {
  if (pulses_.size() < pulses_per_block_) return false;
  const double end = pulses_[pulses_per_block_ - 1];
  for (const auto& ax : axes_) {
    if (!ax.started || ax.values.empty()) return false;
    if (ax.t0 > pulses_.front()) return false;
    const double last = ax.t0 + static_cast<double>(ax.values.size() - 1) / ax.rate;
    if (last < end) return false;
  }
  return true;
}

void Processor::analyze_block(ProcessedItem& item) {
  const auto& a = config_.analysis;
  TachPulseTrain train;
  train.times.assign(pulses_.begin(), pulses_.begin() + static_cast<std::ptrdiff_t>(pulses_per_block_));
  train.delta_theta = 2.0 * std::numbers::pi / static_cast<double>(ppr_);
  const double block_end = train.times.back();

  const ResampleGrid grid = resample_grid(train, a.theta_step);
  const std::size_t n = std::min(block_samples_, grid.times.size());
  const std::span<const double> times(grid.times.data(), n);

  for (const auto& ax : axes_) {
    const auto samples = resample_signal(ax.values, ax.t0, ax.rate, times);
    OrderSpectrum spec = order_spectrum(samples, a.theta_step);

    SpectrumRecord rec;
    rec.channel_id = ax.channel_id;
    rec.t = block_end;
    rec.order_resolution = spec.order_resolution;
    rec.baseline = a.record_baseline;
    rec.amplitudes = spec.amplitudes;
    item.spectra.push_back(std::move(rec));

    if (!diagnose_on_) continue;
    const auto& base = baseline_[static_cast<std::size_t>(ax.axis)];
    DiagnosisReport report = diagnose(spec, base ? *base : zero_baseline(spec), a.watch_orders,
                                      a.ratio_threshold, a.floor);
    report.channel_id = ax.channel_id;
    report.t = block_end;

    const auto key = std::make_pair(ax.channel_id, AlarmKind::OrderFault);
    auto active = active_.find(key);
    if (report.verdict == Verdict::Faulty && active == active_.end()) {
      AlarmEvent e = order_fault_event(report);
      e.emitted_t = block_end;
      record(e);
      item.events.push_back(e);
    } else if (report.verdict == Verdict::Healthy && active != active_.end()) {
      AlarmEvent e = active->second;
      e.cleared_t = block_end;
      e.emitted_t = block_end;
      record(e);
      item.events.push_back(e);
    }
    last_diagnosis_ = report;
    diagnoses_.push_back(std::move(report));
  }
  ++blocks_;

  // The block's last pulse starts the next block.
  pulses_.erase(pulses_.begin(), pulses_.begin() + static_cast<std::ptrdiff_t>(pulses_per_block_ - 1));
  trim_axes(pulses_.front());
}

ProcessedItem Processor::end_round(std::uint64_t round, double round_end) {
  ProcessedItem item;
  item.kind = ProcessedItem::Kind::RoundEnd;
  item.round = round;
  item.round_end = round_end;
  if (analysis_on_) {
    // Pulses before the vibration starts cannot anchor a block; vibration
    // before the first pulse is never analyzed.
    double vib_start = 0.0;
    for (const auto& ax : axes_) vib_start = std::max(vib_start, ax.started ? ax.t0 : 0.0);
    const auto usable = std::lower_bound(pulses_.begin(), pulses_.end(), vib_start);
    pulses_.erase(pulses_.begin(), usable);
    if (!pulses_.empty()) trim_axes(pulses_.front());
    while (block_ready()) analyze_block(item);
  }
  return item;
}

MotorState Processor::state() const {
  MotorState s;
  bool order_fault = false;
  for (const auto& [key, e] : active_) {
    s.active_alarms.push_back(e);
    if (e.kind == AlarmKind::OrderFault) order_fault = true;
  }
  s.overall = order_fault ? OverallState::Faulty
              : s.active_alarms.empty() ? OverallState::Healthy
                                        : OverallState::Warning;
  s.last_diagnosis = last_diagnosis_;
  return s;
}

StatusSnapshot Processor::snapshot(std::uint64_t round, double t) const {
  return {round, t, readings_, state()};
}

}  // namespace motormon
