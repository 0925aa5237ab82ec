#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "mbotsim/bus.hpp"
#include "mbotsim/controllers.hpp"
#include "mbotsim/core.hpp"
#include "mbotsim/kinematics.hpp"
#include "mbotsim/sensors.hpp"

namespace mbotsim {

// Controller bindings. Each robot carries exactly one.

struct NoController {};
struct TeleopBinding {};
struct ConstantTwistBinding {
  Twist2D twist;
};
struct ConstantPwmBinding {
  PwmCommand pwm;
};
struct GoToGoalBinding {
  Vec2 goal;
  GoToGoalConfig cfg;
};
struct PurePursuitBinding {
  Path path;
  PurePursuitConfig cfg;
};
struct LineFollowBinding {
  LineFollowConfig cfg;
  std::optional<Vec2> goal;
  double goal_radius{0.05};
};
struct RendezvousBinding {
  GoToGoalConfig cfg;
  std::optional<Vec2> fixed_goal;
  StatusLedConfig led;
};
struct LeaderFollowerBinding {
  std::string predecessor;
  double gap{0.4};
  GoToGoalConfig cfg;
};

using ControllerBinding = std::variant<NoController, TeleopBinding, ConstantTwistBinding, ConstantPwmBinding,
                                       GoToGoalBinding, PurePursuitBinding, LineFollowBinding, RendezvousBinding,
                                       LeaderFollowerBinding>;

struct RobotConfig {
  std::string name;
  std::string profile{"smartmbot"};
  RobotParams params;
  Pose2D initial_pose;
  ControllerBinding controller;
};

/// Painted polyline on the floor map, kept for clients that draw the arena.
struct FloorLine {
  std::vector<Vec2> points;
  double width{0.05};
  double value{0.05};
};

struct ScenarioConfig {
  std::string name{"scenario"};
  WorldModel world;
  std::vector<FloorLine> floor_lines;
  std::vector<RobotConfig> robots;
  double duration{10.0};
  double dt{0.01};
  std::uint64_t seed{0};
  /// Per-suffix rate overrides, e.g. {"reading_tof_array": 15}.
  std::map<std::string, double> rates;
  SensorNoise noise;
  AdcPolarity polarity{AdcPolarity::white_high};
  /// Zero the held motor command after this many steps without a new one; 0 disables.
  int command_timeout_steps{0};

  double rate_for(std::string_view suffix) const {
    if (const auto it = rates.find(std::string(suffix)); it != rates.end()) {
      return it->second;
    }
    if (suffix == topics::image_raw) return topics::image_raw_hz;
    if (suffix == topics::image_compressed) return topics::image_compressed_hz;
    if (suffix == topics::spi_adc) return topics::spi_adc_hz;
    if (suffix == topics::tof_array) return topics::tof_array_hz;
    if (suffix == topics::ground_truth_pose) return 1.0 / dt;
    return 0.0;
  }
};

// ---------------------------------------------------------------------------
// JSON loading

namespace scenario_detail {

using nlohmann::json;

inline std::string join(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

inline std::string index(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

inline const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) {
    throw ValidationError(path, "expected an object");
  }
  const auto it = obj.find(key);
  if (it == obj.end()) {
    throw ValidationError(join(path, key), "missing required field");
  }
  return *it;
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) {
    throw ValidationError(path, "expected a number");
  }
  const double v = j.get<double>();
  if (!std::isfinite(v)) {
    throw ValidationError(path, "expected a finite number");
  }
  return v;
}

inline double number_or(const json& obj, const std::string& key, const std::string& path, double fallback) {
  const auto it = obj.find(key);
  return it == obj.end() ? fallback : number(*it, join(path, key));
}

inline double positive(const json& j, const std::string& path) {
  const double v = number(j, path);
  if (!(v > 0.0)) {
    throw ValidationError(path, "must be positive");
  }
  return v;
}

inline std::string string(const json& j, const std::string& path) {
  if (!j.is_string()) {
    throw ValidationError(path, "expected a string");
  }
  return j.get<std::string>();
}

inline bool boolean(const json& j, const std::string& path) {
  if (!j.is_boolean()) {
    throw ValidationError(path, "expected a boolean");
  }
  return j.get<bool>();
}

inline std::vector<double> numbers(const json& j, const std::string& path, std::size_t n) {
  if (!j.is_array() || j.size() != n) {
    throw ValidationError(path, "expected an array of " + std::to_string(n) + " numbers");
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(number(j[i], index(path, i)));
  }
  return out;
}

inline Vec2 point(const json& j, const std::string& path) {
  const auto v = numbers(j, path, 2);
  return {v[0], v[1]};
}

inline std::vector<Vec2> points(const json& j, const std::string& path) {
  if (!j.is_array()) {
    throw ValidationError(path, "expected an array of points");
  }
  std::vector<Vec2> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(point(j[i], index(path, i)));
  }
  return out;
}

inline double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 d = b - a;
  const double len2 = dot(d, d);
  const double u = len2 == 0.0 ? 0.0 : std::clamp(dot(p - a, d) / len2, 0.0, 1.0);
  return distance(p, a + u * d);
}

/// Paints every cell whose center lies within width/2 of the polyline.
inline void paint_line(FloorMap& f, const FloorLine& line) {
  const double half = line.width / 2.0;
  for (std::size_t i = 0; i + 1 < line.points.size(); ++i) {
    const Vec2 a = line.points[i];
    const Vec2 b = line.points[i + 1];
    const int c0 = std::max(0, static_cast<int>(std::floor((std::min(a.x, b.x) - half - f.origin.x) / f.cell_size)));
    const int c1 = std::min(f.cols - 1, static_cast<int>(std::floor((std::max(a.x, b.x) + half - f.origin.x) / f.cell_size)));
    const int r0 = std::max(0, static_cast<int>(std::floor((std::min(a.y, b.y) - half - f.origin.y) / f.cell_size)));
    const int r1 = std::min(f.rows - 1, static_cast<int>(std::floor((std::max(a.y, b.y) + half - f.origin.y) / f.cell_size)));
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const Vec2 center{f.origin.x + (c + 0.5) * f.cell_size, f.origin.y + (r + 0.5) * f.cell_size};
        if (point_segment_distance(center, a, b) <= half) {
          f.at(c, r) = line.value;
        }
      }
    }
  }
}

inline void parse_floor(const json& j, const std::string& path, ScenarioConfig& out) {
  FloorMap& f = out.world.floor;
  f.origin = point(require(j, "origin", path), join(path, "origin"));
  f.cell_size = positive(require(j, "cell_size", path), join(path, "cell_size"));
  f.background = number_or(j, "background", path, 1.0);
  const double cols = number(require(j, "cols", path), join(path, "cols"));
  const double rows = number(require(j, "rows", path), join(path, "rows"));
  if (cols < 0 || rows < 0 || cols != std::floor(cols) || rows != std::floor(rows) || cols * rows > 2.0e7) {
    throw ValidationError(join(path, "cols"), "cols and rows must be non-negative integers of modest size");
  }
  f.cols = static_cast<int>(cols);
  f.rows = static_cast<int>(rows);
  const double fill = number_or(j, "fill", path, f.background);
  f.values.assign(static_cast<std::size_t>(f.cols) * f.rows, fill);
  if (const auto it = j.find("values"); it != j.end()) {
    if (!it->is_array() || it->size() != f.values.size()) {
      throw ValidationError(join(path, "values"), "expected cols * rows numbers, row-major");
    }
    for (std::size_t i = 0; i < f.values.size(); ++i) {
      const std::string vp = index(join(path, "values"), i);
      f.values[i] = number((*it)[i], vp);
      if (!(f.values[i] >= 0.0 && f.values[i] <= 1.0)) {
        throw ValidationError(vp, "reflectance must be within [0, 1]");
      }
    }
  }
  if (const auto it = j.find("lines"); it != j.end()) {
    if (!it->is_array()) {
      throw ValidationError(join(path, "lines"), "expected an array");
    }
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string lp = index(join(path, "lines"), i);
      const json& lj = (*it)[i];
      FloorLine line;
      line.points = points(require(lj, "points", lp), join(lp, "points"));
      if (line.points.size() < 2) {
        throw ValidationError(join(lp, "points"), "a line needs at least two points");
      }
      line.width = positive(require(lj, "width", lp), join(lp, "width"));
      line.value = number_or(lj, "value", lp, 0.05);
      paint_line(f, line);
      out.floor_lines.push_back(std::move(line));
    }
  }
  try {
    f.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(join(path, e.field()), e.what());
  }
}

inline void parse_world(const json& j, const std::string& path, ScenarioConfig& out) {
  if (!j.is_object()) {
    throw ValidationError(path, "expected an object");
  }
  WorldModel& w = out.world;
  if (const auto it = j.find("bounds"); it != j.end()) {
    const auto b = numbers(*it, join(path, "bounds"), 4);
    if (!(b[2] > b[0] && b[3] > b[1])) {
      throw ValidationError(join(path, "bounds"), "expected [xmin, ymin, xmax, ymax] with max > min");
    }
    w.bounds = Bounds{{b[0], b[1]}, {b[2], b[3]}};
  }
  if (const auto it = j.find("segments"); it != j.end()) {
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto s = numbers((*it)[i], index(join(path, "segments"), i), 4);
      w.segments.push_back(Segment{{s[0], s[1]}, {s[2], s[3]}});
    }
  }
  if (const auto it = j.find("circles"); it != j.end()) {
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string cp = index(join(path, "circles"), i);
      const auto c = numbers((*it)[i], cp, 3);
      if (!(c[2] > 0.0)) {
        throw ValidationError(cp, "radius must be positive");
      }
      w.circles.push_back(Circle{{c[0], c[1]}, c[2]});
    }
  }
  if (const auto it = j.find("floor"); it != j.end()) {
    parse_floor(*it, join(path, "floor"), out);
  }
}

inline RobotParams parse_profile_object(const json& j, const std::string& path) {
  RobotParams p;
  p.wheel_radius = positive(require(j, "wheel_radius", path), join(path, "wheel_radius"));
  p.wheelbase = positive(require(j, "wheelbase", path), join(path, "wheelbase"));
  p.body_radius = positive(require(j, "body_radius", path), join(path, "body_radius"));
  p.max_wheel_speed = positive(require(j, "max_wheel_speed", path), join(path, "max_wheel_speed"));
  p.tof_max_range_mm = number_or(j, "tof_max_range_mm", path, 2000.0);
  p.tof_count = static_cast<int>(number_or(j, "tof_count", path, 8));
  if (p.tof_count != kTofChannels) {
    throw ValidationError(join(path, "tof_count"), "only 8 ToF channels are supported");
  }
  if (const auto it = j.find("line_sensor_offsets"); it != j.end()) {
    const auto pts = points(*it, join(path, "line_sensor_offsets"));
    if (pts.size() != 2) {
      throw ValidationError(join(path, "line_sensor_offsets"), "exactly two offsets required");
    }
    p.line_sensor_offsets = {pts[0], pts[1]};
  }
  try {
    p.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(join(path, e.field()), e.what());
  }
  return p;
}

inline GoToGoalConfig parse_gtg_cfg(const json& j, const std::string& path) {
  GoToGoalConfig c;
  c.kp_linear = number_or(j, "kp_linear", path, c.kp_linear);
  c.kp_angular = number_or(j, "kp_angular", path, c.kp_angular);
  c.arrival_epsilon = number_or(j, "arrival_epsilon", path, c.arrival_epsilon);
  c.v_max = number_or(j, "v_max", path, c.v_max);
  try {
    c.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(join(path, e.field()), e.what());
  }
  return c;
}

inline LedState parse_led(const json& j, const std::string& path) {
  const auto v = numbers(j, path, 3);
  for (std::size_t i = 0; i < 3; ++i) {
    if (v[i] < 0 || v[i] > 255) {
      throw ValidationError(index(path, i), "channel must be within 0-255");
    }
  }
  return LedState::make(static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2]), 1.0);
}

inline ControllerBinding parse_controller(const json& j, const std::string& path) {
  const std::string type = string(require(j, "type", path), join(path, "type"));
  if (type == "none") {
    return NoController{};
  }
  if (type == "teleop") {
    return TeleopBinding{};
  }
  if (type == "constant_twist") {
    return ConstantTwistBinding{{number(require(j, "v", path), join(path, "v")),
                                 number(require(j, "w", path), join(path, "w"))}};
  }
  if (type == "constant_pwm") {
    const double l = number(require(j, "left", path), join(path, "left"));
    const double r = number(require(j, "right", path), join(path, "right"));
    return ConstantPwmBinding{PwmCommand::clamped(l, r)};
  }
  if (type == "go_to_goal") {
    return GoToGoalBinding{point(require(j, "goal", path), join(path, "goal")), parse_gtg_cfg(j, path)};
  }
  if (type == "pure_pursuit") {
    PurePursuitBinding b;
    b.path.waypoints = points(require(j, "waypoints", path), join(path, "waypoints"));
    try {
      b.path.validate();
    } catch (const DomainError& e) {
      throw ValidationError(join(path, "waypoints"), e.what());
    }
    b.cfg.kp_linear = number_or(j, "kp_linear", path, b.cfg.kp_linear);
    b.cfg.kp_angular = number_or(j, "kp_angular", path, b.cfg.kp_angular);
    b.cfg.lookahead = number_or(j, "lookahead", path, b.cfg.lookahead);
    b.cfg.cruise_v = number_or(j, "cruise_v", path, b.cfg.cruise_v);
    b.cfg.waypoint_advance_epsilon = number_or(j, "waypoint_advance_epsilon", path, b.cfg.waypoint_advance_epsilon);
    try {
      b.cfg.validate();
    } catch (const ValidationError& e) {
      throw ValidationError(join(path, e.field()), e.what());
    }
    return b;
  }
  if (type == "line_follow") {
    LineFollowBinding b;
    b.cfg.threshold = number_or(j, "threshold", path, b.cfg.threshold);
    b.cfg.base_pwm = number_or(j, "base_pwm", path, b.cfg.base_pwm);
    b.cfg.delta_pwm = number_or(j, "delta_pwm", path, b.cfg.delta_pwm);
    if (const auto it = j.find("dark_line"); it != j.end()) {
      b.cfg.dark_line = boolean(*it, join(path, "dark_line"));
    }
    try {
      b.cfg.validate();
    } catch (const ValidationError& e) {
      throw ValidationError(join(path, e.field()), e.what());
    }
    if (const auto it = j.find("goal"); it != j.end()) {
      b.goal = point(*it, join(path, "goal"));
    }
    if (const auto it = j.find("goal_radius"); it != j.end()) {
      b.goal_radius = positive(*it, join(path, "goal_radius"));
    }
    return b;
  }
  if (type == "rendezvous") {
    RendezvousBinding b;
    b.cfg = parse_gtg_cfg(j, path);
    if (const auto it = j.find("goal"); it != j.end()) {
      b.fixed_goal = point(*it, join(path, "goal"));
    }
    if (const auto it = j.find("arrival_color"); it != j.end()) {
      b.led.arrived = parse_led(*it, join(path, "arrival_color"));
    }
    return b;
  }
  if (type == "leader_follower") {
    LeaderFollowerBinding b;
    b.predecessor = string(require(j, "predecessor", path), join(path, "predecessor"));
    if (const auto it = j.find("gap"); it != j.end()) {
      b.gap = positive(*it, join(path, "gap"));
    }
    b.cfg = parse_gtg_cfg(j, path);
    return b;
  }
  throw ValidationError(join(path, "type"), "unknown controller type '" + type + "'");
}

}  // namespace scenario_detail

/// Builds and validates a scenario from its JSON document. Throws
/// ValidationError naming the offending field.
inline ScenarioConfig parse_scenario(const nlohmann::json& doc) {
  using namespace scenario_detail;
  if (!doc.is_object()) {
    throw ValidationError("$", "scenario document must be an object");
  }
  ScenarioConfig cfg;
  if (const auto it = doc.find("name"); it != doc.end()) {
    cfg.name = string(*it, "name");
  }
  cfg.duration = positive(require(doc, "duration", ""), "duration");
  cfg.dt = positive(require(doc, "dt", ""), "dt");
  if (const auto it = doc.find("seed"); it != doc.end()) {
    if (!it->is_number_integer()) {
      throw ValidationError("seed", "expected an integer");
    }
    cfg.seed = it->get<std::uint64_t>();
  }
  parse_world(require(doc, "world", ""), "world", cfg);

  std::map<std::string, RobotParams> profiles{{"smartmbot", RobotParams::smartmbot()}};
  if (const auto it = doc.find("profiles"); it != doc.end()) {
    if (!it->is_object()) {
      throw ValidationError("profiles", "expected an object");
    }
    for (const auto& [name, pj] : it->items()) {
      profiles[name] = parse_profile_object(pj, "profiles." + name);
    }
  }

  if (const auto it = doc.find("rates"); it != doc.end()) {
    if (!it->is_object()) {
      throw ValidationError("rates", "expected an object");
    }
    for (const auto& [suffix, rj] : it->items()) {
      if (suffix != topics::image_raw && suffix != topics::image_compressed && suffix != topics::spi_adc &&
          suffix != topics::tof_array) {
        throw ValidationError("rates." + suffix, "not a scheduled topic");
      }
      cfg.rates[suffix] = positive(rj, "rates." + suffix);
    }
  }
  double max_rate = 0.0;
  for (auto suffix : {topics::image_raw, topics::image_compressed, topics::spi_adc, topics::tof_array}) {
    max_rate = std::max(max_rate, cfg.rate_for(suffix));
  }
  if (cfg.dt > 1.0 / (2.0 * max_rate) + 1e-12) {
    throw ValidationError("dt", "must not exceed 1 / (2 * highest topic rate)");
  }

  if (const auto it = doc.find("sensors"); it != doc.end()) {
    cfg.noise.tof_mm = number_or(*it, "tof_noise_mm", "sensors", 0.0);
    cfg.noise.adc_counts = number_or(*it, "adc_noise_counts", "sensors", 0.0);
    if (cfg.noise.tof_mm < 0.0 || cfg.noise.adc_counts < 0.0) {
      throw ValidationError("sensors", "noise amplitudes must be non-negative");
    }
    if (const auto pit = it->find("adc_polarity"); pit != it->end()) {
      const std::string pol = string(*pit, "sensors.adc_polarity");
      if (pol == "white_high") {
        cfg.polarity = AdcPolarity::white_high;
      } else if (pol == "white_low") {
        cfg.polarity = AdcPolarity::white_low;
      } else {
        throw ValidationError("sensors.adc_polarity", "expected white_high or white_low");
      }
    }
  }
  if (const auto it = doc.find("command_timeout_steps"); it != doc.end()) {
    const double n = number(*it, "command_timeout_steps");
    if (n < 0 || n != std::floor(n)) {
      throw ValidationError("command_timeout_steps", "expected a non-negative integer");
    }
    cfg.command_timeout_steps = static_cast<int>(n);
  }

  const json& robots = require(doc, "robots", "");
  if (!robots.is_array() || robots.empty()) {
    throw ValidationError("robots", "expected a non-empty array");
  }
  std::set<std::string> names;
  for (std::size_t i = 0; i < robots.size(); ++i) {
    const std::string rp = index("robots", i);
    const json& rj = robots[i];
    RobotConfig rc;
    rc.name = string(require(rj, "name", rp), join(rp, "name"));
    if (!is_valid_robot_name(rc.name)) {
      throw ValidationError(join(rp, "name"), "robot names use [A-Za-z0-9_] only");
    }
    if (!names.insert(rc.name).second) {
      throw ValidationError(join(rp, "name"), "duplicate robot name '" + rc.name + "'");
    }
    if (const auto it = rj.find("profile"); it != rj.end()) {
      if (it->is_string()) {
        rc.profile = it->get<std::string>();
        const auto pit = profiles.find(rc.profile);
        if (pit == profiles.end()) {
          throw ValidationError(join(rp, "profile"), "unknown profile '" + rc.profile + "'");
        }
        rc.params = pit->second;
      } else {
        rc.profile = "custom";
        rc.params = parse_profile_object(*it, join(rp, "profile"));
      }
    } else {
      rc.params = profiles.at("smartmbot");
    }
    const auto pose = numbers(require(rj, "pose", rp), join(rp, "pose"), 3);
    rc.initial_pose = Pose2D(pose[0], pose[1], pose[2]);
    if (const auto it = rj.find("controller"); it != rj.end()) {
      rc.controller = parse_controller(*it, join(rp, "controller"));
    }
    cfg.robots.push_back(std::move(rc));
  }
  for (std::size_t i = 0; i < cfg.robots.size(); ++i) {
    if (const auto* lf = std::get_if<LeaderFollowerBinding>(&cfg.robots[i].controller)) {
      if (!names.contains(lf->predecessor) || lf->predecessor == cfg.robots[i].name) {
        throw ValidationError(index("robots", i) + ".controller.predecessor",
                              "must name another robot in the scenario");
      }
    }
  }
  return cfg;
}

inline ScenarioConfig parse_scenario_text(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("$", std::string("malformed JSON: ") + e.what());
  }
  return parse_scenario(doc);
}

inline ScenarioConfig load_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError(path.string(), "cannot open scenario file");
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario_text(ss.str());
}

}  // namespace mbotsim
