#include "coretherm/csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>

namespace coretherm {

std::string fmt_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  for (std::size_t i = 0; i < header.size(); ++i)
    out << (i ? "," : "") << header[i];
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      out << (i ? "," : "") << row[i];
    out << "\n";
  }
  if (!out) throw DataError("write failed: " + path);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, long line_no, const char* col) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw DataError("line " + std::to_string(line_no) + ": non-numeric '" + s +
                    "' in column " + col);
  return v;
}

long parse_long(const std::string& s, long line_no, const char* col) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0')
    throw DataError("line " + std::to_string(line_no) + ": non-integer '" + s +
                    "' in column " + col);
  return v;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty csv: " + path);
  t.header = split_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    t.rows.push_back(split_line(line));
  }
  return t;
}

int CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1
                            : static_cast<int>(it - header.begin());
}

int CsvTable::require_column(const std::string& name) const {
  const int c = column(name);
  if (c < 0) throw DataError("csv schema: missing column '" + name + "'");
  return c;
}

namespace {

struct CoreSeries {
  std::vector<double> ts, freq, pkg_freq, idle, pkg_power, temp;
  double last_ts = -std::numeric_limits<double>::infinity();
};

struct GroupKey {
  std::string node;
  int socket;
  bool operator<(const GroupKey& o) const {
    return node != o.node ? node < o.node : socket < o.socket;
  }
};

}  // namespace

std::vector<TelemetryFrame> ingest_csv_frames(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError("empty csv: " + path);
  const auto header = split_line(line);
  const auto col = [&](const char* name) -> int {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw DataError("csv schema: missing column '" + std::string(name) +
                      "'");
    return static_cast<int>(it - header.begin());
  };
  const int c_ts = col("ts_epoch_s");
  const int c_node = col("node");
  const int c_socket = col("socket");
  const int c_core = col("core");
  const int c_freq = col("freq_c0_mhz");
  const int c_pkg_freq = col("pkg_freq_c0_mhz");
  const int c_idle = col("one_minus_c0_pkg");
  const int c_power = col("pkg_power_w");
  const int c_temp = col("core_temp_c");

  std::map<GroupKey, std::map<long, CoreSeries>> groups;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_line(line);
    if (f.size() != header.size())
      throw DataError("line " + std::to_string(line_no) +
                      ": wrong field count");
    GroupKey key{f[static_cast<std::size_t>(c_node)],
                 static_cast<int>(parse_long(
                     f[static_cast<std::size_t>(c_socket)], line_no, "socket"))};
    const long core =
        parse_long(f[static_cast<std::size_t>(c_core)], line_no, "core");
    const double ts = parse_double(f[static_cast<std::size_t>(c_ts)], line_no,
                                   "ts_epoch_s");
    CoreSeries& s = groups[key][core];
    if (ts == s.last_ts)
      throw DataError("line " + std::to_string(line_no) +
                      ": duplicate timestamp for core " + std::to_string(core));
    if (ts < s.last_ts)
      throw DataError("line " + std::to_string(line_no) +
                      ": non-monotone timestamp for core " +
                      std::to_string(core));
    s.last_ts = ts;
    s.ts.push_back(ts);
    s.freq.push_back(parse_double(f[static_cast<std::size_t>(c_freq)], line_no,
                                  "freq_c0_mhz"));
    s.pkg_freq.push_back(parse_double(f[static_cast<std::size_t>(c_pkg_freq)],
                                      line_no, "pkg_freq_c0_mhz"));
    s.idle.push_back(parse_double(f[static_cast<std::size_t>(c_idle)], line_no,
                                  "one_minus_c0_pkg"));
    s.pkg_power.push_back(parse_double(f[static_cast<std::size_t>(c_power)],
                                       line_no, "pkg_power_w"));
    s.temp.push_back(parse_double(f[static_cast<std::size_t>(c_temp)], line_no,
                                  "core_temp_c"));
  }
  if (groups.empty()) throw DataError("csv has no data rows: " + path);

  std::vector<TelemetryFrame> frames;
  for (const auto& [key, cores] : groups) {
    const auto& first = cores.begin()->second;
    const std::size_t n = first.ts.size();
    if (n < 2)
      throw DataError("group " + key.node + "/" + std::to_string(key.socket) +
                      ": fewer than 2 samples");
    for (const auto& [core_id, s] : cores) {
      if (s.ts.size() != n || !std::equal(s.ts.begin(), s.ts.end(),
                                          first.ts.begin()))
        throw DataError("group " + key.node + "/" +
                        std::to_string(key.socket) + ": core " +
                        std::to_string(core_id) +
                        " timestamps disagree with the other cores");
    }

    TelemetryFrame f;
    f.node_id = key.node;
    f.socket_id = key.socket;
    const int nc = static_cast<int>(cores.size());
    const auto len = static_cast<Eigen::Index>(n);
    f.timestamps.resize(len);
    for (std::size_t t = 0; t < n; ++t) f.timestamps(static_cast<Eigen::Index>(t)) = first.ts[t];
    const double period = first.ts[1] - first.ts[0];
    for (std::size_t t = 2; t < n; ++t)
      if (std::abs((first.ts[t] - first.ts[t - 1]) - period) >
          1e-6 * std::max(period, 1.0))
        throw DataError("group " + key.node + "/" +
                        std::to_string(key.socket) +
                        ": sample period not constant near sample " +
                        std::to_string(t));
    f.sample_period = period;

    f.core_freq_c0.resize(nc, len);
    f.core_temps.resize(nc, len);
    f.pkg_freq_c0.resize(len);
    f.idle_frac_pkg.resize(len);
    f.pkg_power.resize(len);
    int row = 0;
    for (const auto& [core_id, s] : cores) {
      for (std::size_t t = 0; t < n; ++t) {
        f.core_freq_c0(row, static_cast<Eigen::Index>(t)) = s.freq[t];
        f.core_temps(row, static_cast<Eigen::Index>(t)) = s.temp[t];
      }
      if (row == 0) {
        for (std::size_t t = 0; t < n; ++t) {
          f.pkg_freq_c0(static_cast<Eigen::Index>(t)) = s.pkg_freq[t];
          f.idle_frac_pkg(static_cast<Eigen::Index>(t)) = s.idle[t];
          f.pkg_power(static_cast<Eigen::Index>(t)) = s.pkg_power[t];
        }
      } else {
        for (std::size_t t = 0; t < n; ++t)
          if (s.pkg_freq[t] != f.pkg_freq_c0(static_cast<Eigen::Index>(t)) ||
              s.idle[t] != f.idle_frac_pkg(static_cast<Eigen::Index>(t)) ||
              s.pkg_power[t] != f.pkg_power(static_cast<Eigen::Index>(t)))
            throw DataError("group " + key.node + "/" +
                            std::to_string(key.socket) +
                            ": package columns disagree between core rows");
      }
      ++row;
    }

    // Flag quantized temperatures when every reading sits on the 1 degC grid.
    bool on_grid = true;
    for (Eigen::Index c = 0; c < f.core_temps.rows() && on_grid; ++c)
      for (Eigen::Index t = 0; t < len && on_grid; ++t)
        if (std::abs(f.core_temps(c, t) - std::round(f.core_temps(c, t))) >
            1e-9)
          on_grid = false;
    f.temps_quantized = on_grid;
    f.quant_step = 1.0;

    f.validate();
    frames.push_back(std::move(f));
  }
  return frames;
}

TelemetryFrame ingest_csv(const std::string& path) {
  auto frames = ingest_csv_frames(path);
  if (frames.size() != 1)
    throw DataError("expected exactly one (node, socket) group in " + path +
                    ", found " + std::to_string(frames.size()));
  return std::move(frames.front());
}

void export_telemetry_csv(const std::vector<TelemetryFrame>& frames,
                          const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "ts_epoch_s,node,socket,core,freq_c0_mhz,pkg_freq_c0_mhz,"
         "one_minus_c0_pkg,pkg_power_w,core_temp_c\n";
  for (const auto& f : frames) {
    f.validate();
    for (Eigen::Index t = 0; t < f.n_samples(); ++t)
      for (int c = 0; c < f.n_cores(); ++c) {
        out << fmt_full(f.timestamps(t)) << ',' << f.node_id << ','
            << f.socket_id << ',' << c << ',' << fmt_full(f.core_freq_c0(c, t))
            << ',' << fmt_full(f.pkg_freq_c0(t)) << ','
            << fmt_full(f.idle_frac_pkg(t)) << ',' << fmt_full(f.pkg_power(t))
            << ',' << fmt_full(f.core_temps(c, t)) << '\n';
      }
  }
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace coretherm
