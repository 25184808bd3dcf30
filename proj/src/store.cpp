#include "motormon/store.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <sstream>

#include "json.hpp"
#include "motormon/error.hpp"
#include "motormon/text.hpp"
#include "motormon/wire.hpp"

namespace motormon {

namespace {

constexpr int kSchemaVersion = 1;

constexpr const char* kSchema = R"sql(
CREATE TABLE IF NOT EXISTS run_config(
  run_id TEXT PRIMARY KEY,
  started_at TEXT NOT NULL,
  channels TEXT NOT NULL,
  thresholds TEXT NOT NULL,
  analysis TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS samples(
  run_id TEXT NOT NULL REFERENCES run_config(run_id),
  batch_id INTEGER NOT NULL,
  channel_id INTEGER NOT NULL,
  t REAL NOT NULL,
  value REAL NOT NULL,
  PRIMARY KEY(run_id, batch_id, channel_id, t)) WITHOUT ROWID;
CREATE INDEX IF NOT EXISTS samples_by_time ON samples(run_id, t);
CREATE TABLE IF NOT EXISTS analysis_results(
  run_id TEXT NOT NULL REFERENCES run_config(run_id),
  channel_id INTEGER NOT NULL,
  t REAL NOT NULL,
  order_num REAL NOT NULL,
  amplitude REAL NOT NULL,
  baseline INTEGER NOT NULL,
  PRIMARY KEY(run_id, channel_id, t, order_num)) WITHOUT ROWID;
CREATE TABLE IF NOT EXISTS alarms(
  run_id TEXT NOT NULL REFERENCES run_config(run_id),
  channel_id INTEGER NOT NULL,
  kind TEXT NOT NULL,
  value REAL NOT NULL,
  limit_value REAL NOT NULL,
  t_raise REAL NOT NULL,
  t_clear REAL,
  orders TEXT NOT NULL DEFAULT '',
  PRIMARY KEY(run_id, channel_id, kind, t_raise));
CREATE TABLE IF NOT EXISTS batch_log(
  run_id TEXT NOT NULL REFERENCES run_config(run_id),
  batch_id INTEGER NOT NULL,
  t_start REAL NOT NULL,
  t_end REAL NOT NULL,
  PRIMARY KEY(run_id, batch_id)) WITHOUT ROWID;
CREATE TABLE IF NOT EXISTS outbox(
  run_id TEXT NOT NULL,
  batch_id INTEGER NOT NULL,
  payload BLOB NOT NULL,
  PRIMARY KEY(run_id, batch_id)) WITHOUT ROWID;
)sql";

class Stmt {
 public:
  Stmt(sqlite3* db, const std::string& sql) : db_(db) {
    if (sqlite3_prepare_v2(db, sql.c_str(), -1, &stmt_, nullptr) != SQLITE_OK) {
      throw Error(ErrorCategory::Store, std::string("prepare failed: ") + sqlite3_errmsg(db));
    }
  }
  ~Stmt() { sqlite3_finalize(stmt_); }
  Stmt(const Stmt&) = delete;
  Stmt& operator=(const Stmt&) = delete;

  Stmt& bind(int i, double v) { return check(sqlite3_bind_double(stmt_, i, v)); }
  Stmt& bind(int i, std::int64_t v) { return check(sqlite3_bind_int64(stmt_, i, v)); }
  Stmt& bind(int i, const std::string& v) {
    return check(sqlite3_bind_text(stmt_, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT));
  }
  Stmt& bind(int i, std::span<const std::uint8_t> v) {
    return check(sqlite3_bind_blob(stmt_, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT));
  }
  Stmt& bind_null(int i) { return check(sqlite3_bind_null(stmt_, i)); }

  bool step() {
    const int rc = sqlite3_step(stmt_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    throw Error(ErrorCategory::Store, std::string("step failed: ") + sqlite3_errmsg(db_));
  }
  void run() {
    step();
    sqlite3_reset(stmt_);
  }

  double col_double(int i) const { return sqlite3_column_double(stmt_, i); }
  std::int64_t col_int(int i) const { return sqlite3_column_int64(stmt_, i); }
  bool col_null(int i) const { return sqlite3_column_type(stmt_, i) == SQLITE_NULL; }
  std::string col_text(int i) const {
    auto p = reinterpret_cast<const char*>(sqlite3_column_text(stmt_, i));
    return p ? std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(stmt_, i))) : std::string();
  }
  std::vector<std::uint8_t> col_blob(int i) const {
    auto p = static_cast<const std::uint8_t*>(sqlite3_column_blob(stmt_, i));
    return std::vector<std::uint8_t>(p, p + sqlite3_column_bytes(stmt_, i));
  }

 private:
  Stmt& check(int rc) {
    if (rc != SQLITE_OK) throw Error(ErrorCategory::Store, std::string("bind failed: ") + sqlite3_errmsg(db_));
    return *this;
  }

  sqlite3* db_;
  sqlite3_stmt* stmt_ = nullptr;
};

void exec(sqlite3* db, const char* sql) {
  char* err = nullptr;
  if (sqlite3_exec(db, sql, nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "unknown";
    sqlite3_free(err);
    throw Error(ErrorCategory::Store, msg);
  }
}

std::string join_orders(const std::vector<double>& orders) {
  std::string s;
  for (double o : orders) {
    if (!s.empty()) s.push_back(' ');
    s += format_number(o);
  }
  return s;
}

std::string in_list(std::size_t n) {
  std::string s = "(";
  for (std::size_t i = 0; i < n; ++i) s += i ? ",?" : "?";
  return s + ")";
}

}  // namespace

void validate_filter(const QueryFilter& f) {
  if (f.from > f.to) {
    throw Error(ErrorCategory::Validation, "malformed range: from (" + format_number(f.from) +
                                               ") > to (" + format_number(f.to) + ")");
  }
}

Store::Store(const std::filesystem::path& path) : path_(path) {
  const int rc = sqlite3_open_v2(path.c_str(), &db_, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE, nullptr);
  if (rc != SQLITE_OK) {
    std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
    sqlite3_close(db_);
    db_ = nullptr;
    throw Error(ErrorCategory::Config, "store unavailable at " + path.string() + ": " + msg);
  }
  sqlite3_busy_timeout(db_, 10000);
  try {
    int version = 0;
    {
      Stmt s(db_, "PRAGMA user_version");
      if (s.step()) version = static_cast<int>(s.col_int(0));
    }
    if (version != 0 && version != kSchemaVersion) {
      throw Error(ErrorCategory::Config, "store schema version " + std::to_string(version) +
                                             " does not match expected " +
                                             std::to_string(kSchemaVersion));
    }
    exec(db_, "PRAGMA journal_mode=WAL");
    exec(db_, "PRAGMA synchronous=NORMAL");
    exec(db_, "PRAGMA foreign_keys=ON");
    exec(db_, kSchema);
    exec(db_, ("PRAGMA user_version=" + std::to_string(kSchemaVersion)).c_str());
  } catch (const Error& e) {
    sqlite3_close(db_);
    db_ = nullptr;
    if (e.category() == ErrorCategory::Config) throw;
    throw Error(ErrorCategory::Config, "store unavailable at " + path.string() + ": " + e.what());
  }
}

Store::~Store() { sqlite3_close(db_); }

void Store::begin_run(const RunInfo& run) {
  Stmt s(db_,
         "INSERT OR IGNORE INTO run_config(run_id, started_at, channels, thresholds, analysis) "
         "VALUES(?,?,?,?,?)");
  s.bind(1, run_id_hex(run.id)).bind(2, run.started_at).bind(3, run.channels);
  s.bind(4, run.thresholds).bind(5, run.analysis).run();
}

std::vector<RunInfo> Store::runs() const {
  Stmt s(db_, "SELECT run_id, started_at, channels, thresholds, analysis FROM run_config ORDER BY rowid");
  std::vector<RunInfo> out;
  while (s.step()) {
    RunInfo r;
    r.id = parse_run_id(s.col_text(0));
    r.started_at = s.col_text(1);
    r.channels = s.col_text(2);
    r.thresholds = s.col_text(3);
    r.analysis = s.col_text(4);
    out.push_back(std::move(r));
  }
  return out;
}

std::optional<RunInfo> Store::run(const std::string& run_id) const {
  for (auto& r : runs()) {
    if (run_id_hex(r.id) == run_id) return r;
  }
  return std::nullopt;
}

bool Store::has_batch(const RunId& run, std::uint64_t batch_id) const {
  Stmt s(db_, "SELECT 1 FROM batch_log WHERE run_id=? AND batch_id=?");
  s.bind(1, run_id_hex(run)).bind(2, static_cast<std::int64_t>(batch_id));
  return s.step();
}

bool Store::write_batch(const ArchiveBatch& b, std::span<const std::uint8_t> outbox_payload) {
  if (fault_hook_ && fault_hook_()) {
    throw Error(ErrorCategory::Store, "injected write failure for batch " + std::to_string(b.batch_id));
  }
  const std::string run = run_id_hex(b.run_id);
  const auto batch_id = static_cast<std::int64_t>(b.batch_id);

  exec(db_, "BEGIN IMMEDIATE");
  try {
    if (has_batch(b.run_id, b.batch_id)) {
      exec(db_, "COMMIT");
      return false;
    }
    Stmt log(db_, "INSERT INTO batch_log(run_id, batch_id, t_start, t_end) VALUES(?,?,?,?)");
    log.bind(1, run).bind(2, batch_id).bind(3, b.t_start).bind(4, b.t_end).run();

    Stmt row(db_, "INSERT OR IGNORE INTO samples(run_id, batch_id, channel_id, t, value) VALUES(?,?,?,?,?)");
    for (const auto& r : b.rows) {
      row.bind(1, run).bind(2, batch_id).bind(3, std::int64_t{r.channel_id}).bind(4, r.t).bind(5, r.value);
      row.run();
    }

    Stmt alarm(db_,
               "INSERT INTO alarms(run_id, channel_id, kind, value, limit_value, t_raise, t_clear, orders) "
               "VALUES(?,?,?,?,?,?,?,?) ON CONFLICT(run_id, channel_id, kind, t_raise) "
               "DO UPDATE SET t_clear = COALESCE(excluded.t_clear, alarms.t_clear)");
    for (const auto& e : b.events) {
      alarm.bind(1, run).bind(2, std::int64_t{e.channel_id}).bind(3, std::string(alarm_kind_name(e.kind)));
      alarm.bind(4, e.value).bind(5, e.limit).bind(6, e.t);
      if (e.cleared_t) {
        alarm.bind(7, *e.cleared_t);
      } else {
        alarm.bind_null(7);
      }
      alarm.bind(8, join_orders(e.orders)).run();
    }

    Stmt spec(db_,
              "INSERT OR IGNORE INTO analysis_results(run_id, channel_id, t, order_num, amplitude, baseline) "
              "VALUES(?,?,?,?,?,?)");
    for (const auto& s : b.spectra) {
      for (std::size_t k = 0; k < s.amplitudes.size(); ++k) {
        spec.bind(1, run).bind(2, std::int64_t{s.channel_id}).bind(3, s.t);
        spec.bind(4, static_cast<double>(k) * s.order_resolution).bind(5, s.amplitudes[k]);
        spec.bind(6, std::int64_t{s.baseline ? 1 : 0}).run();
      }
    }

    if (!outbox_payload.empty()) {
      Stmt out(db_, "INSERT OR IGNORE INTO outbox(run_id, batch_id, payload) VALUES(?,?,?)");
      out.bind(1, run).bind(2, batch_id).bind(3, outbox_payload).run();
    }
    exec(db_, "COMMIT");
  } catch (...) {
    sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
    throw;
  }

  auto it = contiguous_.find(b.run_id);
  if (it != contiguous_.end()) {
    std::uint64_t& hc = it->second;
    if (hc == kNoBatches ? b.batch_id == 0 : b.batch_id == hc + 1) {
      hc = b.batch_id;
      while (has_batch(b.run_id, hc + 1)) ++hc;
    }
  }
  return true;
}

std::uint64_t Store::highest_contiguous(const RunId& run) {
  auto it = contiguous_.find(run);
  if (it != contiguous_.end()) return it->second;
  std::uint64_t hc = kNoBatches;
  if (has_batch(run, 0)) {
    Stmt s(db_,
           "SELECT MIN(b.batch_id) FROM batch_log b WHERE b.run_id=?1 AND NOT EXISTS "
           "(SELECT 1 FROM batch_log c WHERE c.run_id=?1 AND c.batch_id=b.batch_id+1)");
    s.bind(1, run_id_hex(run));
    if (s.step()) hc = static_cast<std::uint64_t>(s.col_int(0));
  }
  contiguous_[run] = hc;
  return hc;
}

std::vector<std::string> Store::run_ids_for(const QueryFilter& f) const {
  if (f.run_id) return {*f.run_id};
  std::vector<std::string> ids;
  for (const auto& r : runs()) ids.push_back(run_id_hex(r.id));
  return ids;
}

std::vector<ChannelId> Store::channels_for(const QueryFilter& f, const std::string& run_id) const {
  std::vector<ChannelId> ids = f.channels;
  if (!f.kind) return ids;
  std::vector<ChannelId> of_kind;
  if (auto r = run(run_id)) {
    auto doc = nlohmann::json::parse(r->channels, nullptr, false);
    if (doc.is_array()) {
      for (const auto& c : doc) {
        if (c.value("kind", "") == kind_name(*f.kind)) of_kind.push_back(c.value("id", ChannelId{0}));
      }
    }
  }
  if (ids.empty()) return of_kind.empty() ? std::vector<ChannelId>{} : of_kind;
  std::erase_if(ids, [&](ChannelId c) { return std::find(of_kind.begin(), of_kind.end(), c) == of_kind.end(); });
  return ids;
}

std::vector<SampleRecord> Store::query(const QueryFilter& f) const {
  validate_filter(f);
  std::vector<SampleRecord> out;
  for (const auto& run : run_ids_for(f)) {
    auto chans = channels_for(f, run);
    if (f.kind && chans.empty()) continue;
    std::string sql = "SELECT batch_id, channel_id, t, value FROM samples WHERE run_id=? AND t>=? AND t<?";
    if (!chans.empty()) sql += " AND channel_id IN " + in_list(chans.size());
    sql += " ORDER BY t, channel_id";
    Stmt s(db_, sql);
    s.bind(1, run).bind(2, f.from).bind(3, f.to);
    for (std::size_t i = 0; i < chans.size(); ++i) s.bind(static_cast<int>(4 + i), std::int64_t{chans[i]});
    while (s.step()) {
      out.push_back({run, static_cast<std::uint64_t>(s.col_int(0)), static_cast<ChannelId>(s.col_int(1)),
                     s.col_double(2), s.col_double(3)});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const SampleRecord& a, const SampleRecord& b) {
    return a.t < b.t || (a.t == b.t && a.channel_id < b.channel_id);
  });
  return out;
}

std::vector<AnalysisRecord> Store::query_analysis(const QueryFilter& f) const {
  validate_filter(f);
  std::vector<AnalysisRecord> out;
  for (const auto& run : run_ids_for(f)) {
    auto chans = channels_for(f, run);
    if (f.kind && chans.empty()) continue;
    std::string sql =
        "SELECT channel_id, t, order_num, amplitude, baseline FROM analysis_results "
        "WHERE run_id=? AND t>=? AND t<?";
    if (!chans.empty()) sql += " AND channel_id IN " + in_list(chans.size());
    sql += " ORDER BY t, channel_id, order_num";
    Stmt s(db_, sql);
    s.bind(1, run).bind(2, f.from).bind(3, f.to);
    for (std::size_t i = 0; i < chans.size(); ++i) s.bind(static_cast<int>(4 + i), std::int64_t{chans[i]});
    while (s.step()) {
      out.push_back({run, static_cast<ChannelId>(s.col_int(0)), s.col_double(1), s.col_double(2),
                     s.col_double(3), s.col_int(4) != 0});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const AnalysisRecord& a, const AnalysisRecord& b) {
    return a.t < b.t;
  });
  return out;
}

std::vector<AlarmRecord> Store::query_alarms(const QueryFilter& f) const {
  validate_filter(f);
  std::vector<AlarmRecord> out;
  for (const auto& run : run_ids_for(f)) {
    auto chans = channels_for(f, run);
    if (f.kind && chans.empty()) continue;
    std::string sql =
        "SELECT channel_id, kind, value, limit_value, t_raise, t_clear, orders FROM alarms "
        "WHERE run_id=? AND t_raise>=? AND t_raise<?";
    if (!chans.empty()) sql += " AND channel_id IN " + in_list(chans.size());
    sql += " ORDER BY t_raise, channel_id, kind";
    Stmt s(db_, sql);
    s.bind(1, run).bind(2, f.from).bind(3, f.to);
    for (std::size_t i = 0; i < chans.size(); ++i) s.bind(static_cast<int>(4 + i), std::int64_t{chans[i]});
    while (s.step()) {
      AlarmRecord a;
      a.run_id = run;
      a.channel_id = static_cast<ChannelId>(s.col_int(0));
      const auto kind = s.col_text(1);
      a.kind = kind == "HighLimit" ? AlarmKind::HighLimit
               : kind == "LowLimit" ? AlarmKind::LowLimit
                                    : AlarmKind::OrderFault;
      a.value = s.col_double(2);
      a.limit = s.col_double(3);
      a.t_raise = s.col_double(4);
      if (!s.col_null(5)) a.t_clear = s.col_double(5);
      a.orders = s.col_text(6);
      out.push_back(std::move(a));
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const AlarmRecord& a, const AlarmRecord& b) { return a.t_raise < b.t_raise; });
  return out;
}

TableCounts Store::counts(const std::optional<std::string>& run_id) const {
  auto count = [&](const char* table) {
    std::string sql = std::string("SELECT COUNT(*) FROM ") + table;
    if (run_id) sql += " WHERE run_id=?";
    Stmt s(db_, sql);
    if (run_id) s.bind(1, *run_id);
    s.step();
    return static_cast<std::uint64_t>(s.col_int(0));
  };
  return {count("run_config"), count("samples"), count("analysis_results"), count("alarms"),
          count("batch_log")};
}

std::vector<OutboxEntry> Store::outbox_after(const RunId& run, std::optional<std::uint64_t> after,
                                             std::size_t limit) const {
  Stmt s(db_, "SELECT batch_id, payload FROM outbox WHERE run_id=? AND batch_id>? ORDER BY batch_id LIMIT ?");
  s.bind(1, run_id_hex(run)).bind(2, after ? static_cast<std::int64_t>(*after) : std::int64_t{-1});
  s.bind(3, static_cast<std::int64_t>(limit));
  std::vector<OutboxEntry> out;
  while (s.step()) out.push_back({static_cast<std::uint64_t>(s.col_int(0)), s.col_blob(1)});
  return out;
}

void Store::outbox_remove_through(const RunId& run, std::uint64_t batch_id) {
  Stmt s(db_, "DELETE FROM outbox WHERE run_id=? AND batch_id<=?");
  s.bind(1, run_id_hex(run)).bind(2, static_cast<std::int64_t>(batch_id)).run();
}

std::uint64_t Store::outbox_size(const RunId& run) const {
  Stmt s(db_, "SELECT COUNT(*) FROM outbox WHERE run_id=?");
  s.bind(1, run_id_hex(run));
  s.step();
  return static_cast<std::uint64_t>(s.col_int(0));
}

}  // namespace motormon
