#include "motormon/csv_export.hpp"

#include <fstream>
#include <iterator>

#include "motormon/error.hpp"
#include "motormon/text.hpp"

namespace motormon {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCategory::Io, "cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error(ErrorCategory::Io, "write failed: " + path.string());
}

}  // namespace

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q.push_back('"');
    q.push_back(c);
  }
  q.push_back('"');
  return q;
}

std::size_t export_csv(const Store& store, const QueryFilter& filter, const std::filesystem::path& path,
                       ExportTable table) {
  validate_filter(filter);
  std::ofstream out = open_out(path);
  std::size_t n = 0;
  switch (table) {
    case ExportTable::Samples: {
      out << "t,channel,value\r\n";
      for (const auto& r : store.query(filter)) {
        out << format_number(r.t) << ',' << r.channel_id << ',' << format_number(r.value) << "\r\n";
        ++n;
      }
      break;
    }
    case ExportTable::Analysis: {
      out << "t,channel,order,amplitude,baseline\r\n";
      for (const auto& r : store.query_analysis(filter)) {
        out << format_number(r.t) << ',' << r.channel_id << ',' << format_number(r.order) << ','
            << format_number(r.amplitude) << ',' << (r.baseline ? 1 : 0) << "\r\n";
        ++n;
      }
      break;
    }
    case ExportTable::Alarms: {
      out << "t_raise,channel,kind,value,limit,t_clear,orders\r\n";
      for (const auto& a : store.query_alarms(filter)) {
        out << format_number(a.t_raise) << ',' << a.channel_id << ',' << alarm_kind_name(a.kind) << ','
            << format_number(a.value) << ',' << format_number(a.limit) << ','
            << (a.t_clear ? format_number(*a.t_clear) : std::string()) << ',' << csv_field(a.orders)
            << "\r\n";
        ++n;
      }
      break;
    }
  }
  finish(out, path);
  return n;
}

std::size_t write_spectrum_csv(const std::filesystem::path& path, const OrderSpectrum& spectrum,
                               const OrderSpectrum* baseline) {
  std::ofstream out = open_out(path);
  out << (baseline ? "order,amplitude,baseline\r\n" : "order,amplitude\r\n");
  for (std::size_t k = 0; k < spectrum.amplitudes.size(); ++k) {
    out << format_number(spectrum.order_at(k)) << ',' << format_number(spectrum.amplitudes[k]);
    if (baseline) {
      out << ',' << (k < baseline->amplitudes.size() ? format_number(baseline->amplitudes[k]) : std::string());
    }
    out << "\r\n";
  }
  finish(out, path);
  return spectrum.amplitudes.size();
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::Io, "cannot read " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && field.empty()) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      field_started = true;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      field_started = false;
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (quoted) throw Error(ErrorCategory::Format, "unterminated quoted field in " + path.string());
  if (field_started || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace motormon
