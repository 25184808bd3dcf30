#include "motormon/config.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <set>

#include "json.hpp"
#include "motormon/error.hpp"
#include "motormon/net.hpp"
#include "motormon/text.hpp"

namespace motormon {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw Error(ErrorCategory::Config, path + ": " + what);
}

// Typed access to one JSON object that rejects keys it was never asked for.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) fail(path_, "must be an object");
  }

  const std::string& path() const { return path_; }
  std::string at(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* get(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() || it->is_null() ? nullptr : &*it;
  }
  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  double number(const char* key, double dflt) {
    const json* v = get(key);
    if (!v) return dflt;
    if (!v->is_number()) fail(at(key), "must be a number");
    const double d = v->get<double>();
    if (!std::isfinite(d)) fail(at(key), "must be finite");
    return d;
  }
  double required_number(const char* key) {
    if (!has(key)) fail(at(key), "is required");
    return number(key, 0.0);
  }
  std::uint64_t integer(const char* key, std::uint64_t dflt) {
    const json* v = get(key);
    if (!v) return dflt;
    if (v->is_number_unsigned()) return v->get<std::uint64_t>();
    if (v->is_number_integer()) fail(at(key), "must be >= 0");
    fail(at(key), "must be a non-negative integer");
  }
  bool boolean(const char* key, bool dflt) {
    const json* v = get(key);
    if (!v) return dflt;
    if (!v->is_boolean()) fail(at(key), "must be true or false");
    return v->get<bool>();
  }
  std::optional<std::string> string(const char* key) {
    const json* v = get(key);
    if (!v) return std::nullopt;
    if (!v->is_string()) fail(at(key), "must be a string");
    return v->get<std::string>();
  }
  const json& array(const char* key) {
    static const json kEmpty = json::array();
    const json* v = get(key);
    if (!v) return kEmpty;
    if (!v->is_array()) fail(at(key), "must be an array");
    return *v;
  }

  void done() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(at(it.key().c_str()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string idx(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

ChannelKind kind_field(Fields& f, const char* key) {
  const auto name = f.string(key);
  if (!name) fail(f.at(key), "is required");
  const auto kind = parse_kind(*name);
  if (!kind) fail(f.at(key), "unknown channel kind '" + *name + "'");
  return *kind;
}

ChannelSpec parse_channel(const json& j, const std::string& path) {
  Fields f(j, path);
  ChannelSpec c;
  const auto id = f.integer("id", 0);
  if (!f.has("id")) fail(f.at("id"), "is required");
  if (id > 0xFFFF) fail(f.at("id"), "must fit in 16 bits");
  c.id = static_cast<ChannelId>(id);
  c.kind = kind_field(f, "kind");
  c.sample_rate = f.required_number("rate");
  c.gain = f.number("gain", 1.0);
  c.offset = f.number("offset", 0.0);
  c.filter = default_filter(c.kind);
  if (const json* fj = f.get("filter")) {
    Fields ff(*fj, f.at("filter"));
    c.filter.r = ff.number("r", c.filter.r);
    c.filter.q = ff.number("q", 1e-4 * c.filter.r);
    c.filter.enabled = ff.boolean("enabled", c.filter.enabled);
    ff.done();
  }
  f.done();
  return c;
}

void parse_orders(const json& j, const std::string& path, std::map<double, Harmonic>& out) {
  if (!j.is_object()) fail(path, "must be an object of order -> amplitude");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key_path = path + "." + it.key();
    const auto order = parse_number(it.key());
    if (!order) fail(key_path, "order key must be a number");
    Harmonic h;
    if (it->is_number()) {
      h.amplitude = it->get<double>();
    } else {
      Fields hf(*it, key_path);
      h.amplitude = hf.required_number("amplitude");
      h.phase = hf.number("phase", 0.0);
      hf.done();
    }
    out[*order] = h;
  }
}

MotorProfile parse_profile(const json& j) {
  Fields f(j, "profile");
  MotorProfile p;
  const json& segs = f.array("segments");
  for (std::size_t i = 0; i < segs.size(); ++i) {
    Fields sf(segs[i], idx("profile.segments", i));
    SpeedSegment s;
    s.duration = sf.required_number("duration");
    if (sf.has("rpm")) {
      s.rpm_start = s.rpm_end = sf.number("rpm", 0.0);
    } else {
      sf.get("rpm");
      s.rpm_start = sf.required_number("rpm_start");
      s.rpm_end = sf.number("rpm_end", s.rpm_start);
    }
    sf.done();
    p.speed_segments.push_back(s);
  }
  if (const json* oj = f.get("orders")) {
    Fields of(*oj, "profile.orders");
    if (const json* all = of.get("all")) {
      for (auto& axis : p.order_components) parse_orders(*all, "profile.orders.all", axis);
    }
    const char* axes[] = {"x", "y", "z"};
    for (std::size_t a = 0; a < 3; ++a) {
      if (const json* aj = of.get(axes[a])) {
        parse_orders(*aj, std::string("profile.orders.") + axes[a], p.order_components[a]);
      }
    }
    of.done();
  }
  p.noise_sigma = f.number("noise_sigma", 0.0);
  p.temperature_base = f.number("temperature_base", p.temperature_base);
  p.current_base = f.number("current_base", p.current_base);
  p.voltage_base = f.number("voltage_base", p.voltage_base);
  p.aux_noise_sigma = f.number("aux_noise_sigma", 0.0);
  const auto ppr = f.integer("pulses_per_rev", 1);
  if (ppr < 1 || ppr > 1024) fail("profile.pulses_per_rev", "must be in [1, 1024]");
  p.pulses_per_rev = static_cast<unsigned>(ppr);
  const json& steps = f.array("steps");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    Fields sf(steps[i], idx("profile.steps", i));
    StepInjection s;
    s.kind = kind_field(sf, "kind");
    s.start = sf.required_number("start");
    s.end = sf.required_number("end");
    s.delta = sf.required_number("delta");
    if (!(s.end > s.start)) fail(sf.path(), "end must be > start");
    sf.done();
    p.steps.push_back(s);
  }
  f.done();
  try {
    validate_profile(p);
  } catch (const Error& e) {
    fail("profile", e.what());
  }
  return p;
}

ThresholdSpec parse_threshold(const json& j, const std::string& path) {
  Fields f(j, path);
  ThresholdSpec t;
  if (!f.has("channel")) fail(f.at("channel"), "is required");
  const auto ch = f.integer("channel", 0);
  if (ch > 0xFFFF) fail(f.at("channel"), "must fit in 16 bits");
  t.channel_id = static_cast<ChannelId>(ch);
  t.lower = f.required_number("lower");
  t.upper = f.required_number("upper");
  t.hysteresis = f.number("hysteresis", 0.0);
  const auto mv = f.integer("min_violations", 1);
  if (mv > 1000000) fail(f.at("min_violations"), "is too large");
  t.min_violations = static_cast<std::uint32_t>(mv);
  if (auto mode = f.string("mode")) {
    if (*mode == "samples") {
      t.mode = ThresholdMode::Samples;
    } else if (*mode == "rms") {
      t.mode = ThresholdMode::FrameRms;
    } else {
      fail(f.at("mode"), "must be \"samples\" or \"rms\"");
    }
  }
  f.done();
  return t;
}

AnalysisSettings parse_analysis(const json& j, const std::filesystem::path& base) {
  Fields f(j, "analysis");
  AnalysisSettings a;
  a.enabled = f.boolean("enabled", true);
  if (f.has("samples_per_rev")) {
    if (f.has("theta_step")) fail("analysis", "give theta_step or samples_per_rev, not both");
    const auto spr = f.integer("samples_per_rev", 64);
    if (spr < 8) fail("analysis.samples_per_rev", "must be >= 8");
    a.theta_step = 2.0 * std::numbers::pi / static_cast<double>(spr);
  } else {
    f.get("samples_per_rev");
    a.theta_step = f.number("theta_step", a.theta_step);
  }
  const json& watch = f.array("watch_orders");
  for (std::size_t i = 0; i < watch.size(); ++i) {
    if (!watch[i].is_number()) fail(idx("analysis.watch_orders", i), "must be a number");
    a.watch_orders.push_back(watch[i].get<double>());
  }
  a.ratio_threshold = f.number("ratio_threshold", a.ratio_threshold);
  a.floor = f.number("floor", a.floor);
  const auto revs = f.integer("block_revolutions", a.block_revolutions);
  if (revs < 1 || revs > 4096) fail("analysis.block_revolutions", "must be in [1, 4096]");
  a.block_revolutions = static_cast<unsigned>(revs);
  if (f.has("pulses_per_rev")) {
    const auto ppr = f.integer("pulses_per_rev", 1);
    if (ppr < 1 || ppr > 1024) fail("analysis.pulses_per_rev", "must be in [1, 1024]");
    a.pulses_per_rev = static_cast<unsigned>(ppr);
  } else {
    f.get("pulses_per_rev");
  }
  if (const json* bj = f.get("baseline")) {
    Fields bf(*bj, "analysis.baseline");
    BaselineRef ref;
    const auto store = bf.string("store");
    if (!store) fail("analysis.baseline.store", "is required");
    ref.store = resolve(base, *store);
    ref.run_id = bf.string("run_id");
    bf.done();
    a.baseline = ref;
  }
  a.record_baseline = f.boolean("record_baseline", false);
  f.done();
  return a;
}

ArchiveSettings parse_archive(const json& j, const std::filesystem::path& base) {
  Fields f(j, "archive");
  ArchiveSettings a;
  a.period = f.number("period", a.period);
  const auto store = f.string("store");
  if (!store || store->empty()) fail("archive.store", "is required");
  a.store = resolve(base, *store);
  a.remote = f.string("remote");
  if (auto rec = f.string("recording")) a.recording = resolve(base, *rec);
  if (auto jr = f.string("journal")) a.journal = resolve(base, *jr);
  a.replication_drain_timeout = f.number("replication_drain_timeout", a.replication_drain_timeout);
  f.done();
  return a;
}

PipelineSettings parse_pipeline(const json& j) {
  Fields f(j, "pipeline");
  PipelineSettings p;
  p.tier1_capacity = f.integer("tier1_capacity", p.tier1_capacity);
  p.storage_capacity = f.integer("storage_capacity", p.storage_capacity);
  p.frame_duration = f.number("frame_duration", p.frame_duration);
  p.realtime = f.boolean("realtime", p.realtime);
  p.drain_timeout = f.number("drain_timeout", p.drain_timeout);
  p.status_interval = f.number("status_interval", p.status_interval);
  f.done();
  return p;
}

}  // namespace

unsigned RunConfig::pulses_per_rev() const {
  if (analysis.pulses_per_rev) return *analysis.pulses_per_rev;
  if (profile) return profile->pulses_per_rev;
  return 1;
}

const ChannelSpec* RunConfig::channel(ChannelId id) const {
  for (const auto& c : channels) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

ThresholdMode default_mode(ChannelKind kind) {
  return is_vibration(kind) ? ThresholdMode::FrameRms : ThresholdMode::Samples;
}

RunConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCategory::Config, std::string("config is not valid JSON: ") + e.what());
  }
  Fields f(doc, "");
  RunConfig cfg;
  cfg.duration = f.number("duration", cfg.duration);
  cfg.seed = f.integer("seed", cfg.seed);

  const json& chans = f.array("channels");
  for (std::size_t i = 0; i < chans.size(); ++i) cfg.channels.push_back(parse_channel(chans[i], idx("channels", i)));

  if (const json* pj = f.get("profile")) cfg.profile = parse_profile(*pj);
  if (auto replay = f.string("replay")) cfg.replay = resolve(base_dir, *replay);

  const json& th = f.array("thresholds");
  std::vector<bool> explicit_mode;
  for (std::size_t i = 0; i < th.size(); ++i) {
    cfg.thresholds.push_back(parse_threshold(th[i], idx("thresholds", i)));
    explicit_mode.push_back(th[i].contains("mode"));
  }
  for (std::size_t i = 0; i < cfg.thresholds.size(); ++i) {
    if (explicit_mode[i]) continue;
    if (const auto* c = cfg.channel(cfg.thresholds[i].channel_id)) cfg.thresholds[i].mode = default_mode(c->kind);
  }

  if (const json* aj = f.get("analysis")) cfg.analysis = parse_analysis(*aj, base_dir);
  const json* archive = f.get("archive");
  if (!archive) fail("archive", "is required");
  cfg.archive = parse_archive(*archive, base_dir);
  if (const json* pj = f.get("pipeline")) cfg.pipeline = parse_pipeline(*pj);
  f.done();

  if (cfg.analysis.watch_orders.empty()) {
    for (int k = 1; k <= 20; ++k) cfg.analysis.watch_orders.push_back(k);
  }
  validate_config(cfg);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::Config, "cannot read config " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text, path.parent_path());
}

void validate_config(const RunConfig& cfg) {
  if (!std::isfinite(cfg.duration) || cfg.duration < 0.0) fail("duration", "must be >= 0");
  if (cfg.profile.has_value() == cfg.replay.has_value()) {
    fail("profile", "exactly one of profile or replay must be given");
  }
  if (cfg.profile && cfg.channels.empty()) fail("channels", "at least one channel is required");

  std::set<ChannelId> ids;
  for (std::size_t i = 0; i < cfg.channels.size(); ++i) {
    const auto& c = cfg.channels[i];
    if (!ids.insert(c.id).second) fail(idx("channels", i), "duplicate channel id " + std::to_string(c.id));
    try {
      validate_channel(c);
    } catch (const Error& e) {
      fail(idx("channels", i), e.what());
    }
  }
  std::size_t tach = 0;
  for (const auto& c : cfg.channels) tach += c.kind == ChannelKind::Tachometer;
  if (tach > 1) fail("channels", "at most one Tachometer channel is supported");

  for (std::size_t i = 0; i < cfg.thresholds.size(); ++i) {
    const auto& t = cfg.thresholds[i];
    if (!cfg.channels.empty() && !cfg.channel(t.channel_id)) {
      fail(idx("thresholds", i), "channel " + std::to_string(t.channel_id) + " is not defined");
    }
    try {
      validate_threshold(t);
    } catch (const Error& e) {
      fail(idx("thresholds", i), e.what());
    }
  }

  const auto& a = cfg.analysis;
  if (!(a.theta_step > 0.0)) fail("analysis.theta_step", "must be > 0");
  if (a.enabled && !is_power_of_two_step(a.theta_step)) {
    fail("analysis.theta_step", "2*pi/theta_step must be a power-of-two integer");
  }
  if ((a.block_revolutions & (a.block_revolutions - 1)) != 0) {
    fail("analysis.block_revolutions", "must be a power of two");
  }
  const double samples_per_rev = 2.0 * std::numbers::pi / a.theta_step;
  for (std::size_t i = 0; i < a.watch_orders.size(); ++i) {
    const double o = a.watch_orders[i];
    if (!(o > 0.0)) fail(idx("analysis.watch_orders", i), "must be > 0");
    if (o + 0.5 > samples_per_rev / 2.0) {
      fail(idx("analysis.watch_orders", i), "order " + format_number(o) + " exceeds the spectral reach");
    }
  }
  if (!(a.ratio_threshold > 0.0)) fail("analysis.ratio_threshold", "must be > 0");
  if (!(a.floor >= 0.0)) fail("analysis.floor", "must be >= 0");

  const auto& ar = cfg.archive;
  if (!(ar.period > 0.0)) fail("archive.period", "must be > 0");
  if (ar.store.empty()) fail("archive.store", "is required");
  if (ar.remote) {
    try {
      parse_endpoint(*ar.remote);
    } catch (const Error& e) {
      fail("archive.remote", e.what());
    }
  }
  if (!(ar.replication_drain_timeout > 0.0)) fail("archive.replication_drain_timeout", "must be > 0");

  const auto& p = cfg.pipeline;
  if (p.tier1_capacity < 1) fail("pipeline.tier1_capacity", "must be >= 1");
  if (p.storage_capacity < 1) fail("pipeline.storage_capacity", "must be >= 1");
  if (!(p.frame_duration > 0.0) || p.frame_duration > 10.0) fail("pipeline.frame_duration", "must be in (0, 10]");
  if (!(p.drain_timeout > 0.0)) fail("pipeline.drain_timeout", "must be > 0");
  if (!(p.status_interval >= 0.5)) fail("pipeline.status_interval", "must be >= 0.5 (status at most 2 Hz)");
}

std::string channels_json(const std::vector<ChannelSpec>& channels) {
  json arr = json::array();
  for (const auto& c : channels) {
    arr.push_back({{"id", c.id},
                   {"kind", kind_name(c.kind)},
                   {"rate", c.sample_rate},
                   {"gain", c.gain},
                   {"offset", c.offset},
                   {"filter", {{"enabled", c.filter.enabled}, {"q", c.filter.q}, {"r", c.filter.r}}}});
  }
  return arr.dump();
}

std::string thresholds_json(const std::vector<ThresholdSpec>& thresholds) {
  json arr = json::array();
  for (const auto& t : thresholds) {
    arr.push_back({{"channel", t.channel_id},
                   {"lower", t.lower},
                   {"upper", t.upper},
                   {"hysteresis", t.hysteresis},
                   {"min_violations", t.min_violations},
                   {"mode", t.mode == ThresholdMode::FrameRms ? "rms" : "samples"}});
  }
  return arr.dump();
}

std::string analysis_json(const AnalysisSettings& a) {
  json j = {{"enabled", a.enabled},
            {"theta_step", a.theta_step},
            {"watch_orders", a.watch_orders},
            {"ratio_threshold", a.ratio_threshold},
            {"floor", a.floor},
            {"block_revolutions", a.block_revolutions},
            {"record_baseline", a.record_baseline}};
  if (a.pulses_per_rev) j["pulses_per_rev"] = *a.pulses_per_rev;
  if (a.baseline) {
    j["baseline"] = {{"store", a.baseline->store.string()}};
    if (a.baseline->run_id) j["baseline"]["run_id"] = *a.baseline->run_id;
  }
  return j.dump();
}

}  // namespace motormon
