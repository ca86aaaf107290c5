#pragma once

#include <string>
#include <vector>

#include "coretherm/telemetry.hpp"

namespace coretherm {

// Telemetry CSV schema, header-keyed (column order free):
//   ts_epoch_s, node, socket, core, freq_c0_mhz, pkg_freq_c0_mhz,
//   one_minus_c0_pkg, pkg_power_w, core_temp_c
// One row per (timestamp, core); package columns repeat per core row.

// All (node, socket) groups in the file, ordered by (node, socket).
std::vector<TelemetryFrame> ingest_csv_frames(const std::string& path);

// Convenience for files holding exactly one (node, socket).
TelemetryFrame ingest_csv(const std::string& path);

// Doubles are written with enough digits to round-trip exactly.
void export_telemetry_csv(const std::vector<TelemetryFrame>& frames,
                          const std::string& path);

// Generic report CSV helpers (deterministic %.9g formatting).
std::string fmt_full(double v);   // %.17g, lossless
std::string fmt_short(double v);  // %.9g

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
  int require_column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

}  // namespace coretherm
