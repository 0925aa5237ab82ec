#pragma once

#include <array>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mbotsim/errors.hpp"

namespace mbotsim {

struct LogSample {
  double t{0.0};
  std::string robot;
  double x{0.0};
  double y{0.0};
  double theta{0.0};
  double v_cmd{0.0};
  double w_cmd{0.0};
  int led_r{0};
  int led_g{0};
  int led_b{0};

  friend bool operator==(const LogSample&, const LogSample&) = default;
};

enum class EventKind { arrival, waypoint_advance, fault, overlap, command_timeout };

inline constexpr std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::arrival:
      return "arrival";
    case EventKind::waypoint_advance:
      return "waypoint_advance";
    case EventKind::fault:
      return "fault";
    case EventKind::overlap:
      return "overlap";
    case EventKind::command_timeout:
      return "command_timeout";
  }
  return "unknown";
}

struct Event {
  double t{0.0};
  std::string robot;
  EventKind kind{EventKind::arrival};
  std::string detail;

  friend bool operator==(const Event&, const Event&) = default;
};

/// Samples in step order (robot config order within a step) plus events.
struct TrajectoryLog {
  std::vector<LogSample> samples;
  std::vector<Event> events;

  std::vector<LogSample> for_robot(std::string_view robot) const {
    std::vector<LogSample> out;
    for (const auto& s : samples) {
      if (s.robot == robot) {
        out.push_back(s);
      }
    }
    return out;
  }

  std::size_t count_events(std::string_view robot, EventKind kind) const {
    std::size_t n = 0;
    for (const auto& e : events) {
      if (e.robot == robot && e.kind == kind) {
        ++n;
      }
    }
    return n;
  }
};

enum class LogFormat { csv, jsonl };

inline constexpr std::array<std::string_view, 10> kLogColumns{"t",     "robot", "x",     "y",     "theta",
                                                              "v_cmd", "w_cmd", "led_r", "led_g", "led_b"};

namespace log_detail {

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw DecodeError("bad_number", "log: malformed number '" + std::string(s) + "'");
  }
  return v;
}

inline nlohmann::ordered_json sample_json(const LogSample& s) {
  nlohmann::ordered_json j;
  j["t"] = s.t;
  j["robot"] = s.robot;
  j["x"] = s.x;
  j["y"] = s.y;
  j["theta"] = s.theta;
  j["v_cmd"] = s.v_cmd;
  j["w_cmd"] = s.w_cmd;
  j["led_r"] = s.led_r;
  j["led_g"] = s.led_g;
  j["led_b"] = s.led_b;
  return j;
}

}  // namespace log_detail

inline void write_log(const TrajectoryLog& log, LogFormat format, std::ostream& out) {
  if (log.samples.empty()) {
    throw DomainError("export_log: log is empty");
  }
  using log_detail::format_double;
  if (format == LogFormat::csv) {
    for (std::size_t i = 0; i < kLogColumns.size(); ++i) {
      out << (i ? "," : "") << kLogColumns[i];
    }
    out << '\n';
    for (const auto& s : log.samples) {
      out << format_double(s.t) << ',' << s.robot << ',' << format_double(s.x) << ',' << format_double(s.y) << ','
          << format_double(s.theta) << ',' << format_double(s.v_cmd) << ',' << format_double(s.w_cmd) << ','
          << s.led_r << ',' << s.led_g << ',' << s.led_b << '\n';
    }
  } else {
    for (const auto& s : log.samples) {
      out << log_detail::sample_json(s).dump() << '\n';
    }
  }
}

inline std::string log_to_string(const TrajectoryLog& log, LogFormat format) {
  std::ostringstream ss;
  write_log(log, format, ss);
  return ss.str();
}

/// Writes the log to `destination`. Throws IoError if it cannot be written.
inline void export_log(const TrajectoryLog& log, LogFormat format, const std::filesystem::path& destination) {
  if (log.samples.empty()) {
    throw DomainError("export_log: log is empty");
  }
  std::ofstream out(destination, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("export_log: cannot open " + destination.string() + " for writing");
  }
  write_log(log, format, out);
  out.flush();
  if (!out) {
    throw IoError("export_log: write failed for " + destination.string());
  }
}

inline std::vector<LogSample> parse_jsonl_log(std::istream& in) {
  std::vector<LogSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      continue;
    }
    try {
      const auto j = nlohmann::json::parse(line);
      LogSample s;
      s.t = j.at("t").get<double>();
      s.robot = j.at("robot").get<std::string>();
      s.x = j.at("x").get<double>();
      s.y = j.at("y").get<double>();
      s.theta = j.at("theta").get<double>();
      s.v_cmd = j.at("v_cmd").get<double>();
      s.w_cmd = j.at("w_cmd").get<double>();
      s.led_r = j.at("led_r").get<int>();
      s.led_g = j.at("led_g").get<int>();
      s.led_b = j.at("led_b").get<int>();
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw DecodeError("bad_log_line", "log line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<LogSample> parse_csv_log(std::istream& in) {
  std::vector<LogSample> out;
  std::string line;
  if (!std::getline(in, line)) {
    return out;
  }
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    std::vector<std::string_view> f;
    std::string_view rest = line;
    while (true) {
      const auto comma = rest.find(',');
      f.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (f.size() != kLogColumns.size()) {
      throw DecodeError("bad_log_line", "csv: expected 10 columns, got " + std::to_string(f.size()));
    }
    using log_detail::parse_double;
    LogSample s{parse_double(f[0]), std::string(f[1]), parse_double(f[2]), parse_double(f[3]), parse_double(f[4]),
                parse_double(f[5]), parse_double(f[6]), static_cast<int>(parse_double(f[7])),
                static_cast<int>(parse_double(f[8])), static_cast<int>(parse_double(f[9]))};
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace mbotsim
