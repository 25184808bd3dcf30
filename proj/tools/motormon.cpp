#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "motormon/csv_export.hpp"
#include "motormon/error.hpp"
#include "motormon/net.hpp"
#include "motormon/offline.hpp"
#include "motormon/pipeline.hpp"
#include "motormon/replication.hpp"
#include "motormon/store.hpp"
#include "motormon/text.hpp"

namespace fs = std::filesystem;
using namespace motormon;

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

void install_signals() {
  struct sigaction sa {};
  sa.sa_handler = on_signal;
  sigemptyset(&sa.sa_mask);
  sigaction(SIGINT, &sa, nullptr);
  sigaction(SIGTERM, &sa, nullptr);
}

int exit_code(ErrorCategory c) {
  return c == ErrorCategory::Config || c == ErrorCategory::Validation ? 2 : 1;
}

int report_error(ErrorCategory c, const std::string& msg) {
  std::string line = msg;
  std::replace(line.begin(), line.end(), '\n', ' ');
  std::cerr << "error:" << category_name(c) << ":" << line << "\n";
  return exit_code(c);
}

std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string orders_text(const std::vector<double>& orders) {
  std::string s;
  for (double o : orders) {
    if (!s.empty()) s += ' ';
    s += format_number(o);
  }
  return s;
}

std::string event_text(const AlarmEvent& e) {
  std::ostringstream os;
  os << (e.is_clear() ? "clear " : "raise ") << alarm_kind_name(e.kind) << " channel " << e.channel_id
     << " t=" << fixed(e.t) << " value=" << fixed(e.value, 4) << " limit=" << fixed(e.limit, 4);
  if (e.is_clear()) os << " cleared=" << fixed(*e.cleared_t);
  if (!e.orders.empty()) os << " orders {" << orders_text(e.orders) << "}";
  return os.str();
}

void print_status(const StatusSnapshot& s) {
  std::ostringstream os;
  os << "[t=" << fixed(s.t, 2) << "s] state=" << overall_name(s.state.overall);
  for (const auto& r : s.readings) {
    os << " " << kind_name(r.kind) << "#" << r.channel_id << "=";
    os << (r.valid ? fixed(r.value, 4) : std::string("-"));
  }
  os << " alarms=";
  if (s.state.active_alarms.empty()) {
    os << "none";
  } else {
    bool first = true;
    for (const auto& a : s.state.active_alarms) {
      os << (first ? "" : ",") << alarm_kind_name(a.kind) << "@" << a.channel_id;
      if (!a.orders.empty()) os << "{" << orders_text(a.orders) << "}";
      first = false;
    }
  }
  std::cout << os.str() << std::endl;
}

void print_stats(const PipelineStats& s) {
  std::cout << "run " << s.run_id << "\n";
  std::cout << "rounds " << s.rounds << "  sim " << fixed(s.sim_seconds, 2) << " s  wall " << fixed(s.wall_seconds, 2)
            << " s  realtime factor " << fixed(s.realtime_factor(), 2) << "\n";
  std::cout << "frames produced " << s.frames_produced << " processed " << s.frames_processed << " stored "
            << s.frames_stored << "\n";
  std::cout << "samples produced " << s.samples_produced << " batched " << s.samples_batched << " rejected "
            << s.samples_rejected << "\n";
  std::cout << "lossless drops " << s.lossless_drops() << "  latest-value drops " << s.dropped_latest_value << "\n";
  std::cout << "latency mean " << fixed(s.latency_mean * 1e3, 2) << " ms max " << fixed(s.latency_max * 1e3, 2)
            << " ms\n";
  std::cout << "queues";
  for (const auto& q : s.queues) std::cout << " " << q.name << "=" << q.max_depth << "/" << q.capacity;
  std::cout << "\n";
  std::cout << "batches written " << s.batches_written << " committed " << s.archive.committed << " spilled "
            << s.archive.spilled << " replayed " << s.archive.replayed << " pending " << s.archive.pending << "\n";
  if (s.replication) {
    const auto& r = *s.replication;
    std::cout << "replication sent " << r.batches_sent << " naks " << r.naks << " connects " << r.connects
              << " converged " << (s.remote_converged ? "yes" : "no") << "\n";
  }
  std::cout << "analysis blocks " << s.analysis_blocks << "\n";
  std::cout << "events " << s.events.size() << "\n";
  for (const auto& e : s.events) std::cout << "  " << event_text(e) << "\n";
  for (const auto& d : s.last_diagnoses) {
    std::cout << "diagnosis channel " << d.channel_id << " t=" << fixed(d.t) << " "
              << (d.verdict == Verdict::Faulty ? "Faulty" : "Healthy");
    if (!d.flagged_orders.empty()) std::cout << " flagged {" << orders_text(d.flagged_orders) << "}";
    std::cout << "\n";
  }
  std::cout << "final state " << overall_name(s.final_state.overall) << "\n";
  for (const auto& a : s.final_state.active_alarms) {
    std::cout << "  active " << alarm_kind_name(a.kind) << " channel " << a.channel_id;
    if (!a.orders.empty()) std::cout << " orders {" << orders_text(a.orders) << "}";
    std::cout << "\n";
  }
}

int cmd_run(const std::string& config_path, std::optional<double> duration, std::optional<std::uint64_t> seed) {
  RunConfig cfg = load_config(config_path);
  if (duration) cfg.duration = *duration;
  if (seed) cfg.seed = *seed;
  validate_config(cfg);

  PipelineOptions opts;
  opts.on_status = print_status;
  Pipeline pipeline(cfg, opts);
  install_signals();
  pipeline.start();
  while (!pipeline.wait_for(std::chrono::milliseconds(100))) {
    if (g_stop) {
      std::cout << "stopping" << std::endl;
      pipeline.shutdown();
      break;
    }
  }
  const PipelineStats stats = pipeline.wait();
  print_stats(stats);
  if (stats.error_category) return report_error(*stats.error_category, stats.error);
  if (!stats.shutdown.drained) {
    return report_error(ErrorCategory::Runtime,
                        "drain timed out with " + std::to_string(stats.shutdown.stranded_frames) + " frames stranded");
  }
  if (stats.replication && !stats.remote_converged) {
    std::cerr << "warning: remote store had not caught up when the drain timeout expired\n";
  }
  return 0;
}

int cmd_simulate(const std::string& config_path, const std::string& out, std::optional<double> duration,
                 std::optional<std::uint64_t> seed) {
  RunConfig cfg = load_config(config_path);
  if (duration) cfg.duration = *duration;
  if (seed) cfg.seed = *seed;
  validate_config(cfg);
  const auto frames = simulate_to_recording(cfg, out);
  std::cout << "wrote " << frames << " frames to " << out << "\n";
  return 0;
}

std::vector<double> parse_orders(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    const auto dash = tok.find('-', 1);
    if (dash != std::string::npos) {
      const auto lo = parse_number(tok.substr(0, dash));
      const auto hi = parse_number(tok.substr(dash + 1));
      if (!lo || !hi || *hi < *lo) throw Error(ErrorCategory::Config, "--watch: bad range '" + tok + "'");
      for (double o = *lo; o <= *hi + 1e-9; o += 1.0) out.push_back(o);
    } else {
      const auto v = parse_number(tok);
      if (!v || *v <= 0.0) throw Error(ErrorCategory::Config, "--watch: bad order '" + tok + "'");
      out.push_back(*v);
    }
  }
  if (out.empty()) throw Error(ErrorCategory::Config, "--watch: no orders given");
  return out;
}

struct AnalyzeArgs {
  std::string recording;
  std::string baseline;
  double theta_step = 2.0 * std::numbers::pi / 64.0;
  std::string watch = "1-20";
  double ratio = 5.0;
  double floor = 0.05;
  unsigned ppr = 1;
  std::string out_dir = ".";
};

int cmd_analyze(const AnalyzeArgs& a) {
  if (!is_power_of_two_step(a.theta_step)) {
    throw Error(ErrorCategory::Config, "--theta-step: 2pi/theta_step must be a power-of-two integer");
  }
  const auto watch = parse_orders(a.watch);
  auto measured = recording_spectra(read_recording(a.recording), a.ppr, a.theta_step);
  std::vector<AxisSpectrum> baseline;
  if (!a.baseline.empty()) {
    const Recording base_rec = read_recording(a.baseline);
    baseline = recording_spectra(base_rec, a.ppr, a.theta_step);
    // Compare equal block lengths so both spectra share one order axis.
    std::size_t n = std::numeric_limits<std::size_t>::max();
    for (const auto& s : measured) n = std::min(n, spectrum_length(s.spectrum));
    for (const auto& s : baseline) n = std::min(n, spectrum_length(s.spectrum));
    measured = recording_spectra(read_recording(a.recording), a.ppr, a.theta_step, n);
    baseline = recording_spectra(base_rec, a.ppr, a.theta_step, n);
  }

  fs::create_directories(a.out_dir);
  bool faulty = false;
  for (const auto& m : measured) {
    const OrderSpectrum* base = nullptr;
    for (const auto& b : baseline) {
      if (b.kind == m.kind) base = &b.spectrum;
    }
    const std::string name = std::string(kind_name(m.kind));
    std::string lower = name;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    const fs::path csv = fs::path(a.out_dir) / ("spectrum_" + lower + ".csv");
    write_spectrum_csv(csv, m.spectrum, base);

    const OrderSpectrum zero = zero_baseline(m.spectrum);
    const DiagnosisReport r = diagnose(m.spectrum, base ? *base : zero, watch, a.ratio, a.floor);
    faulty = faulty || r.verdict == Verdict::Faulty;
    std::cout << name << " (channel " << m.channel_id << "): " << (r.verdict == Verdict::Faulty ? "Faulty" : "Healthy");
    if (!r.flagged_orders.empty()) std::cout << " flagged {" << orders_text(r.flagged_orders) << "}";
    std::cout << "  resolution " << format_number(m.spectrum.order_resolution) << " order, "
              << format_number(m.spectrum.revolutions) << " rev, spectrum " << csv.string() << "\n";
    std::printf("  %8s %12s %12s %10s %12s %s\n", "order", "baseline", "measured", "ratio", "limit", "flag");
    for (const auto& f : r.findings) {
      std::printf("  %8.3f %12.6f %12.6f %10.3f %12.6f %s\n", f.order, f.healthy_amplitude, f.measured_amplitude,
                  f.ratio, f.limit, f.flagged ? "*" : "");
    }
  }
  std::cout << "verdict " << (faulty ? "Faulty" : "Healthy") << std::endl;
  return 0;
}

struct FilterArgs {
  std::string store;
  std::string run;
  std::optional<double> from;
  std::optional<double> to;
  std::vector<unsigned> channels;
  std::string kind;
  bool analysis = false;
  bool alarms = false;
};

QueryFilter make_filter(const FilterArgs& a) {
  QueryFilter f;
  if (!a.run.empty()) f.run_id = a.run;
  if (a.from) f.from = *a.from;
  if (a.to) f.to = *a.to;
  for (unsigned c : a.channels) f.channels.push_back(static_cast<ChannelId>(c));
  if (!a.kind.empty()) {
    for (int k = 0; k < 7; ++k) {
      const auto kind = static_cast<ChannelKind>(k);
      std::string n(kind_name(kind));
      if (n.size() == a.kind.size() &&
          std::equal(n.begin(), n.end(), a.kind.begin(),
                     [](char x, char y) { return std::tolower(x) == std::tolower(y); })) {
        f.kind = kind;
      }
    }
    if (!f.kind) throw Error(ErrorCategory::Config, "--kind: unknown channel kind '" + a.kind + "'");
  }
  validate_filter(f);
  return f;
}

void open_existing(const std::string& path) {
  if (!fs::exists(path)) throw Error(ErrorCategory::Io, "store " + path + " does not exist");
}

void print_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) s += "  ";
      s += std::string(width[i] - cells[i].size(), ' ') + cells[i];
    }
    std::cout << s << "\n";
  };
  if (!rows.empty()) {
    line(header);
    for (const auto& r : rows) line(r);
  }
  std::cout << rows.size() << " rows" << std::endl;
}

int cmd_query(const FilterArgs& a) {
  open_existing(a.store);
  const QueryFilter f = make_filter(a);
  Store store(a.store);
  std::vector<std::vector<std::string>> rows;
  if (a.alarms) {
    for (const auto& r : store.query_alarms(f)) {
      rows.push_back({format_number(r.t_raise), std::to_string(r.channel_id), std::string(alarm_kind_name(r.kind)),
                      format_number(r.value), format_number(r.limit),
                      r.t_clear ? format_number(*r.t_clear) : "-", r.orders.empty() ? "-" : r.orders});
    }
    print_table({"t_raise", "channel", "kind", "value", "limit", "t_clear", "orders"}, rows);
  } else if (a.analysis) {
    for (const auto& r : store.query_analysis(f)) {
      rows.push_back({format_number(r.t), std::to_string(r.channel_id), format_number(r.order),
                      format_number(r.amplitude), r.baseline ? "1" : "0"});
    }
    print_table({"t", "channel", "order", "amplitude", "baseline"}, rows);
  } else {
    for (const auto& r : store.query(f)) {
      rows.push_back({format_number(r.t), std::to_string(r.channel_id), format_number(r.value)});
    }
    print_table({"t", "channel", "value"}, rows);
  }
  return 0;
}

int cmd_export(const FilterArgs& a, const std::string& out) {
  open_existing(a.store);
  const QueryFilter f = make_filter(a);
  Store store(a.store);
  const ExportTable table = a.alarms ? ExportTable::Alarms : a.analysis ? ExportTable::Analysis : ExportTable::Samples;
  const auto n = export_csv(store, f, out, table);
  std::cout << n << " rows written to " << out << std::endl;
  return 0;
}

int cmd_serve(const std::string& listen, const std::string& store) {
  RemoteServer server(parse_endpoint(listen), store);
  server.start();
  install_signals();
  const Endpoint ep = parse_endpoint(listen);
  std::cout << "listening on " << ep.host << ":" << server.port() << std::endl;
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  std::cout << "applied " << server.batches_applied() << " batches, sent " << server.naks_sent() << " naks"
            << std::endl;
  return 0;
}

void add_filter_flags(CLI::App* cmd, FilterArgs& f) {
  cmd->add_option("--store", f.store, "Archive store")->required();
  cmd->add_option("--run", f.run, "Run id (hex)");
  cmd->add_option("--from", f.from, "Start time in seconds (inclusive)");
  cmd->add_option("--to", f.to, "End time in seconds (exclusive)");
  auto* ch = cmd->add_option("--channel", f.channels, "Channel id (repeatable)");
  auto* kind = cmd->add_option("--kind", f.kind, "Channel kind, e.g. Temperature");
  ch->excludes(kind);
  auto* an = cmd->add_flag("--analysis", f.analysis, "Query order-analysis rows");
  auto* al = cmd->add_flag("--alarms", f.alarms, "Query alarm rows");
  an->excludes(al);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Motor condition monitoring"};
  app.require_subcommand(1);

  std::string config_path, out_path, listen, store_path;
  std::optional<double> duration;
  std::optional<std::uint64_t> seed;

  auto* run = app.add_subcommand("run", "Run the acquisition pipeline");
  run->add_option("--config", config_path, "Run configuration (JSON)")->required();
  run->add_option("--duration", duration, "Override duration in seconds");
  run->add_option("--seed", seed, "Override simulator seed");

  auto* sim = app.add_subcommand("simulate", "Write simulated frames to a recording");
  sim->add_option("--config", config_path, "Run configuration (JSON)")->required();
  sim->add_option("--out", out_path, "Recording path")->required();
  sim->add_option("--duration", duration, "Override duration in seconds");
  sim->add_option("--seed", seed, "Override simulator seed");

  AnalyzeArgs aa;
  auto* analyze = app.add_subcommand("analyze", "Order analysis of a recording");
  analyze->add_option("--recording", aa.recording, "Recording to analyze")->required();
  analyze->add_option("--baseline", aa.baseline, "Healthy recording used as baseline");
  analyze->add_option("--theta-step", aa.theta_step, "Resampling angle step in radians");
  analyze->add_option("--watch", aa.watch, "Watched orders, e.g. 1-20 or 10,14");
  analyze->add_option("--ratio", aa.ratio, "Ratio threshold");
  analyze->add_option("--floor", aa.floor, "Absolute amplitude floor");
  analyze->add_option("--ppr", aa.ppr, "Tachometer pulses per revolution");
  analyze->add_option("--out-dir", aa.out_dir, "Directory for spectrum CSV files");

  FilterArgs qa;
  auto* query = app.add_subcommand("query", "Print archived rows");
  add_filter_flags(query, qa);

  FilterArgs ea;
  auto* exp = app.add_subcommand("export", "Export archived rows to CSV");
  add_filter_flags(exp, ea);
  exp->add_option("--out", out_path, "CSV path")->required();

  auto* serve = app.add_subcommand("serve-remote", "Accept replication connections");
  serve->add_option("--listen", listen, "host:port")->required();
  serve->add_option("--store", store_path, "Remote store path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error:usage:" << msg << "\n";
    return 2;
  }

  try {
    if (*run) return cmd_run(config_path, duration, seed);
    if (*sim) return cmd_simulate(config_path, out_path, duration, seed);
    if (*analyze) return cmd_analyze(aa);
    if (*query) return cmd_query(qa);
    if (*exp) return cmd_export(ea, out_path);
    if (*serve) return cmd_serve(listen, store_path);
  } catch (const Error& e) {
    return report_error(e.category(), e.what());
  } catch (const std::exception& e) {
    return report_error(ErrorCategory::Runtime, e.what());
  }
  return 0;
}
