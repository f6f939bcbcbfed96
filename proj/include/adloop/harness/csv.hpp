#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "adloop/attack/feedback.hpp"
#include "adloop/attack/loop.hpp"
#include "adloop/error.hpp"
#include "adloop/victim/victim.hpp"

namespace adloop::harness {

namespace csv {

/// Shortest text that reads back to the same double.
inline std::string num(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse(const std::string& s, const std::string& where) {
  if (s.empty()) return std::nan("");
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw IoError(where + ": not a number: '" + s + "'");
  return v;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline Table read(const std::filesystem::path& path, const std::vector<std::string>& expected) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split(line);
  if (t.header != expected) {
    std::string want;
    for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
    throw IoError(path.string() + ": unexpected header '" + line + "' (want '" + want + "')");
  }
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != expected.size()) {
      throw IoError(path.string() + ":" + std::to_string(n) + ": expected " +
                    std::to_string(expected.size()) + " columns, got " + std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

inline void open_out(std::ofstream& out, const std::filesystem::path& path) {
  out.open(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace csv

inline const std::vector<std::string>& trace_header() {
  static const std::vector<std::string> h{"time_s",      "true_rate_dps", "sensor_dps",
                                          "heading_deg", "command",       "speed_rpm"};
  return h;
}

inline const std::vector<std::string>& telemetry_header() {
  static const std::vector<std::string> h{"time_s", "y_raw",      "y_smoothed", "T_h",
                                          "event",  "carrier_hz", "amplitude"};
  return h;
}

inline const std::vector<std::string>& commands_header() {
  static const std::vector<std::string> h{"issue_time_s", "kind", "frequency_hz", "amplitude"};
  return h;
}

inline std::string join(const std::vector<std::string>& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) s += ',';
    s += cells[i];
  }
  return s;
}

inline void write_trace_csv(const std::filesystem::path& path,
                            const std::vector<victim::TraceRow>& trace) {
  std::ofstream out;
  csv::open_out(out, path);
  out << join(trace_header()) << '\n';
  for (const auto& r : trace) {
    out << csv::num(r.time) << ',' << csv::num(r.true_rate) << ',' << csv::num(r.sensor_rate) << ','
        << csv::num(r.heading) << ',' << csv::num(r.command) << ',' << csv::num(r.speed) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::vector<victim::TraceRow> read_trace_csv(const std::filesystem::path& path) {
  const auto t = csv::read(path, trace_header());
  std::vector<victim::TraceRow> out;
  out.reserve(t.rows.size());
  const std::string w = path.string();
  for (const auto& c : t.rows) {
    victim::TraceRow r;
    r.time = csv::parse(c[0], w);
    r.true_rate = csv::parse(c[1], w);
    r.sensor_rate = csv::parse(c[2], w);
    r.heading = csv::parse(c[3], w);
    r.command = csv::parse(c[4], w);
    r.speed = csv::parse(c[5], w);
    out.push_back(r);
  }
  return out;
}

inline void write_telemetry_csv(const std::filesystem::path& path,
                                const std::vector<attack::TelemetryRow>& rows) {
  std::ofstream out;
  csv::open_out(out, path);
  out << join(telemetry_header()) << '\n';
  for (const auto& r : rows) {
    if (r.event.find(',') != std::string::npos) {
      throw InvariantError("telemetry event text may not contain commas: " + r.event);
    }
    out << csv::num(r.time) << ',' << csv::num(r.y_raw) << ',' << csv::num(r.y_smoothed) << ','
        << csv::num(r.threshold) << ',' << r.event << ',' << csv::num(r.carrier_hz) << ','
        << csv::num(r.amplitude) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::vector<attack::TelemetryRow> read_telemetry_csv(const std::filesystem::path& path) {
  const auto t = csv::read(path, telemetry_header());
  std::vector<attack::TelemetryRow> out;
  const std::string w = path.string();
  for (const auto& c : t.rows) {
    attack::TelemetryRow r;
    r.time = csv::parse(c[0], w);
    r.y_raw = csv::parse(c[1], w);
    r.y_smoothed = csv::parse(c[2], w);
    r.threshold = csv::parse(c[3], w);
    r.event = c[4];
    r.carrier_hz = csv::parse(c[5], w);
    r.amplitude = csv::parse(c[6], w);
    out.push_back(std::move(r));
  }
  return out;
}

inline void write_commands_csv(const std::filesystem::path& path,
                               const std::vector<attack::AttackCommand>& cmds) {
  std::ofstream out;
  csv::open_out(out, path);
  out << join(commands_header()) << '\n';
  for (const auto& c : cmds) {
    out << csv::num(c.issue_time) << ',' << attack::to_string(c.kind) << ','
        << (c.new_frequency ? csv::num(*c.new_frequency) : "") << ','
        << (c.new_amplitude ? csv::num(*c.new_amplitude) : "") << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::vector<attack::AttackCommand> read_commands_csv(const std::filesystem::path& path) {
  const auto t = csv::read(path, commands_header());
  std::vector<attack::AttackCommand> out;
  const std::string w = path.string();
  for (const auto& c : t.rows) {
    attack::AttackCommand cmd;
    cmd.issue_time = csv::parse(c[0], w);
    cmd.kind = attack::parse_command_kind(c[1]);
    if (!c[2].empty()) cmd.new_frequency = csv::parse(c[2], w);
    if (!c[3].empty()) cmd.new_amplitude = csv::parse(c[3], w);
    cmd.validate();
    out.push_back(cmd);
  }
  return out;
}

inline void write_feedback_csv(const std::filesystem::path& path, const signal::FeedbackSeries& fb) {
  std::ofstream out;
  csv::open_out(out, path);
  out << "time_s,y_raw,y_smoothed\n";
  for (std::size_t i = 0; i < fb.raw.size(); ++i) {
    out << csv::num(fb.frame_end_times[i]) << ',' << csv::num(fb.raw[i]) << ','
        << csv::num(fb.smoothed[i]) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

inline void write_spectrogram_csv(const std::filesystem::path& path,
                                  const std::vector<attack::FeedbackExtractor::BandSpectrum>& frames) {
  std::ofstream out;
  csv::open_out(out, path);
  out << "time_s,frequency_hz,magnitude\n";
  for (const auto& f : frames) {
    for (std::size_t k = 0; k < f.magnitudes.size(); ++k) {
      out << csv::num(f.time) << ',' << csv::num(f.first_bin_hz + static_cast<double>(k) * f.bin_width)
          << ',' << csv::num(f.magnitudes[k]) << '\n';
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace adloop::harness
