#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "motormon/order_analysis.hpp"
#include "motormon/store.hpp"

namespace motormon {

enum class ExportTable { Samples, Analysis, Alarms };

// RFC-4180 field: quoted when it holds a comma, quote, CR or LF.
std::string csv_field(std::string_view s);

// Writes the filtered rows with a header line. Numbers use 17 significant
// digits so they parse back bit-exactly. Returns the data row count.
// Unwritable path -> Error(Io).
std::size_t export_csv(const Store& store, const QueryFilter& filter, const std::filesystem::path& path,
                       ExportTable table = ExportTable::Samples);

// order,amplitude[,baseline] rows for one spectrum.
std::size_t write_spectrum_csv(const std::filesystem::path& path, const OrderSpectrum& spectrum,
                               const OrderSpectrum* baseline = nullptr);

// Parses an RFC-4180 file into rows of fields. Throws Error(Io/Format).
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

}  // namespace motormon
