#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "mbotsim/bus.hpp"
#include "mbotsim/engine.hpp"
#include "mbotsim/errors.hpp"
#include "mbotsim/scenario.hpp"

namespace mbotsim {

inline constexpr int kWireProtocolVersion = 1;

enum class FrameType { hello, state, topic, teleop, control, error };

inline constexpr std::string_view to_string(FrameType t) {
  switch (t) {
    case FrameType::hello:
      return "hello";
    case FrameType::state:
      return "state";
    case FrameType::topic:
      return "topic";
    case FrameType::teleop:
      return "teleop";
    case FrameType::control:
      return "control";
    case FrameType::error:
      return "error";
  }
  return "unknown";
}

inline std::optional<FrameType> frame_type_from_string(std::string_view s) {
  for (auto t : {FrameType::hello, FrameType::state, FrameType::topic, FrameType::teleop, FrameType::control,
                 FrameType::error}) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

/// One newline-delimited JSON text frame. Keys are emitted in sorted order so
/// that encoding is canonical.
struct WireFrame {
  FrameType type{FrameType::hello};
  std::uint64_t seq{0};
  nlohmann::json body = nlohmann::json::object();

  friend bool operator==(const WireFrame&, const WireFrame&) = default;
};

/// Single-line JSON, no trailing newline.
inline std::string encode_frame(const WireFrame& f) {
  nlohmann::json j;
  j["type"] = to_string(f.type);
  j["seq"] = f.seq;
  j["body"] = f.body;
  return j.dump();
}

/// Parses one frame. Unknown top-level fields are ignored. Throws DecodeError
/// with code "malformed" (offset = parser byte position), "bad_frame" or
/// "unknown_type".
inline WireFrame decode_frame(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DecodeError("malformed", e.what(), e.byte);
  }
  if (!j.is_object()) {
    throw DecodeError("bad_frame", "frame must be a JSON object");
  }
  const auto type_it = j.find("type");
  if (type_it == j.end() || !type_it->is_string()) {
    throw DecodeError("bad_frame", "frame is missing a string 'type'");
  }
  const auto type = frame_type_from_string(type_it->get<std::string>());
  if (!type) {
    throw DecodeError("unknown_type", "unknown frame type '" + type_it->get<std::string>() + "'");
  }
  WireFrame f;
  f.type = *type;
  const auto seq_it = j.find("seq");
  if (seq_it == j.end() || !seq_it->is_number_unsigned()) {
    throw DecodeError("bad_frame", "frame is missing a non-negative integer 'seq'");
  }
  f.seq = seq_it->get<std::uint64_t>();
  if (const auto body_it = j.find("body"); body_it != j.end()) {
    if (!body_it->is_object()) {
      throw DecodeError("bad_frame", "'body' must be an object");
    }
    f.body = *body_it;
  }
  return f;
}

// ---------------------------------------------------------------------------
// Frame builders

inline WireFrame make_error_frame(std::uint64_t seq, std::string_view code, std::string_view message,
                                  std::optional<std::size_t> offset = std::nullopt) {
  WireFrame f{FrameType::error, seq, nlohmann::json::object()};
  f.body["code"] = code;
  f.body["message"] = message;
  if (offset) f.body["offset"] = *offset;
  return f;
}

inline WireFrame make_hello_frame(std::uint64_t seq, const ScenarioConfig& cfg) {
  using nlohmann::json;
  WireFrame f{FrameType::hello, seq, json::object()};
  f.body["protocol"] = kWireProtocolVersion;
  f.body["scenario"] = cfg.name;
  f.body["dt"] = cfg.dt;
  json robots = json::array();
  for (const auto& r : cfg.robots) {
    robots.push_back({{"name", r.name}, {"body_radius", r.params.body_radius}});
  }
  f.body["robots"] = robots;
  const auto& w = cfg.world;
  json world = json::object();
  world["bounds"] = {w.bounds.min.x, w.bounds.min.y, w.bounds.max.x, w.bounds.max.y};
  json segs = json::array();
  for (const auto& s : w.segments) segs.push_back({s.a.x, s.a.y, s.b.x, s.b.y});
  world["segments"] = segs;
  json circles = json::array();
  for (const auto& c : w.circles) circles.push_back({c.center.x, c.center.y, c.radius});
  world["circles"] = circles;
  json lines = json::array();
  for (const auto& l : cfg.floor_lines) {
    json pts = json::array();
    for (const auto& p : l.points) pts.push_back({p.x, p.y});
    lines.push_back({{"points", pts}, {"width", l.width}, {"value", l.value}});
  }
  world["floor_lines"] = lines;
  world["floor_background"] = w.floor.background;
  f.body["world"] = world;
  return f;
}

inline WireFrame make_state_frame(std::uint64_t seq, const SimSnapshot& snap, bool paused, std::uint64_t dropped) {
  using nlohmann::json;
  WireFrame f{FrameType::state, seq, json::object()};
  f.body["t"] = snap.t;
  f.body["step"] = snap.step;
  f.body["paused"] = paused;
  f.body["dropped"] = dropped;
  json robots = json::array();
  for (const auto& r : snap.robots) {
    json jr = json::object();
    jr["name"] = r.name;
    jr["x"] = r.pose.x;
    jr["y"] = r.pose.y;
    jr["theta"] = r.pose.theta;
    jr["v"] = r.applied.v;
    jr["w"] = r.applied.w;
    jr["led"] = {{"rgb", {r.led.rgb[0], r.led.rgb[1], r.led.rgb[2]}}, {"intensity", r.led.intensity}};
    jr["tof"] = json(std::vector<double>(r.tof.begin(), r.tof.end()));
    jr["line"] = json(std::vector<double>(r.line.begin(), r.line.end()));
    robots.push_back(std::move(jr));
  }
  f.body["robots"] = robots;
  return f;
}

inline WireFrame make_topic_frame(std::uint64_t seq, const TopicMessage& msg) {
  using nlohmann::json;
  WireFrame f{FrameType::topic, seq, json::object()};
  f.body["topic"] = msg.topic;
  f.body["stamp"] = msg.stamp;
  f.body["kind"] = to_string(kind_of(msg.payload));
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, FloatArray>) {
          f.body["data"] = p;
        } else if constexpr (std::is_same_v<T, Twist2D>) {
          f.body["data"] = {{"v", p.v}, {"w", p.w}};
        } else {
          f.body["data"] = {{"length", p.length}, {"checksum", p.checksum}};
        }
      },
      msg.payload);
  return f;
}

inline WireFrame make_teleop_frame(std::uint64_t seq, const TeleopCommand& cmd) {
  WireFrame f{FrameType::teleop, seq, nlohmann::json::object()};
  f.body["robot"] = cmd.robot;
  f.body["v"] = cmd.v;
  f.body["w"] = cmd.w;
  f.body["stamp"] = cmd.stamp;
  return f;
}

/// Run control from a client. Absent fields leave the setting unchanged.
struct ControlCommand {
  std::optional<bool> pause;
  bool reset{false};
  std::optional<double> speed;
  std::vector<std::string> subscribe;
};

inline WireFrame make_control_frame(std::uint64_t seq, const ControlCommand& c) {
  WireFrame f{FrameType::control, seq, nlohmann::json::object()};
  if (c.pause) f.body["pause"] = *c.pause;
  if (c.reset) f.body["reset"] = true;
  if (c.speed) f.body["speed"] = *c.speed;
  if (!c.subscribe.empty()) f.body["subscribe"] = c.subscribe;
  return f;
}

namespace wire_detail {

inline double finite_number(const nlohmann::json& body, const char* key, bool required, double fallback = 0.0) {
  const auto it = body.find(key);
  if (it == body.end()) {
    if (required) throw DecodeError("bad_body", std::string("missing '") + key + "'");
    return fallback;
  }
  if (!it->is_number() || !std::isfinite(it->get<double>())) {
    throw DecodeError("bad_body", std::string("'") + key + "' must be a finite number");
  }
  return it->get<double>();
}

}  // namespace wire_detail

inline TeleopCommand parse_teleop(const WireFrame& f) {
  if (f.type != FrameType::teleop) {
    throw DecodeError("bad_frame", "not a teleop frame");
  }
  const auto robot = f.body.find("robot");
  if (robot == f.body.end() || !robot->is_string()) {
    throw DecodeError("bad_body", "teleop frame needs a string 'robot'");
  }
  return TeleopCommand{robot->get<std::string>(), wire_detail::finite_number(f.body, "v", true),
                       wire_detail::finite_number(f.body, "w", true),
                       wire_detail::finite_number(f.body, "stamp", false)};
}

inline ControlCommand parse_control(const WireFrame& f) {
  if (f.type != FrameType::control) {
    throw DecodeError("bad_frame", "not a control frame");
  }
  ControlCommand c;
  if (const auto it = f.body.find("pause"); it != f.body.end()) {
    if (!it->is_boolean()) throw DecodeError("bad_body", "'pause' must be a boolean");
    c.pause = it->get<bool>();
  }
  if (const auto it = f.body.find("reset"); it != f.body.end()) {
    if (!it->is_boolean()) throw DecodeError("bad_body", "'reset' must be a boolean");
    c.reset = it->get<bool>();
  }
  if (f.body.contains("speed")) {
    const double s = wire_detail::finite_number(f.body, "speed", true);
    if (s < 0.0) throw DecodeError("bad_body", "'speed' must be non-negative");
    c.speed = s;
  }
  if (const auto it = f.body.find("subscribe"); it != f.body.end()) {
    if (!it->is_array()) throw DecodeError("bad_body", "'subscribe' must be an array of topic names");
    for (const auto& t : *it) {
      if (!t.is_string()) throw DecodeError("bad_body", "'subscribe' must be an array of topic names");
      c.subscribe.push_back(t.get<std::string>());
    }
  }
  return c;
}

}  // namespace mbotsim
