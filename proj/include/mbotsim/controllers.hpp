#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "mbotsim/core.hpp"
#include "mbotsim/kinematics.hpp"
#include "mbotsim/sensors.hpp"

namespace mbotsim {

// ---------------------------------------------------------------------------
// Go-to-goal

struct GoToGoalConfig {
  double kp_linear{0.5};
  double kp_angular{2.0};
  double arrival_epsilon{0.05};
  double v_max{0.3};

  void validate() const {
    if (!(kp_linear > 0.0)) throw ValidationError("kp_linear", "must be positive");
    if (!(kp_angular > 0.0)) throw ValidationError("kp_angular", "must be positive");
    if (!(arrival_epsilon > 0.0)) throw ValidationError("arrival_epsilon", "must be positive");
    if (!(v_max > 0.0)) throw ValidationError("v_max", "must be positive");
  }
};

/// Proportional control on distance and bearing error. The angular output is
/// the commanded turn rate. Zero twist once within arrival_epsilon.
inline Twist2D go_to_goal_step(const Pose2D& pose, Vec2 goal, const GoToGoalConfig& cfg) {
  const double dx = goal.x - pose.x;
  const double dy = goal.y - pose.y;
  const double dist = std::hypot(dx, dy);
  if (dist <= cfg.arrival_epsilon) {
    return {};
  }
  const double v = std::min(cfg.kp_linear * dist, cfg.v_max);
  const double w = cfg.kp_angular * normalize_angle(std::atan2(dy, dx) - pose.theta);
  return {v, w};
}

// ---------------------------------------------------------------------------
// Pure pursuit

struct PurePursuitConfig {
  double kp_linear{2.0};
  double kp_angular{1.0};
  double lookahead{0.3};
  double cruise_v{0.15};
  double waypoint_advance_epsilon{0.03};

  void validate() const {
    if (!(lookahead > 0.0)) throw ValidationError("lookahead", "must be positive");
    if (!(cruise_v > 0.0)) throw ValidationError("cruise_v", "must be positive");
    if (!(kp_linear > 0.0)) throw ValidationError("kp_linear", "must be positive");
    if (!(kp_angular > 0.0)) throw ValidationError("kp_angular", "must be positive");
    if (!(waypoint_advance_epsilon > 0.0)) throw ValidationError("waypoint_advance_epsilon", "must be positive");
  }
};

/// Waypoint polyline plus a progress cursor. `cursor` is the index of the
/// segment currently pursued; it equals last_index() once the final waypoint
/// itself is the target.
struct Path {
  std::vector<Vec2> waypoints;
  std::size_t cursor{0};

  std::size_t last_index() const { return waypoints.empty() ? 0 : waypoints.size() - 1; }
  bool at_end() const { return !waypoints.empty() && cursor >= last_index(); }
  Vec2 final_waypoint() const { return waypoints.back(); }

  void validate() const {
    if (waypoints.size() < 2) {
      throw DomainError("path: at least two waypoints required");
    }
    double length = 0.0;
    for (std::size_t i = 0; i + 1 < waypoints.size(); ++i) {
      length += distance(waypoints[i], waypoints[i + 1]);
    }
    if (!(length > 0.0)) {
      throw DomainError("path: zero total length");
    }
    if (cursor > last_index()) {
      throw DomainError("path: cursor out of range");
    }
  }
};

struct Lookahead {
  Vec2 point;
  std::size_t cursor{0};
};

namespace detail {

// Parameters u in [0, 1] where segment a->b meets the circle.
inline std::vector<double> circle_segment_params(Vec2 center, double radius, Vec2 a, Vec2 b) {
  const Vec2 d = b - a;
  const Vec2 f = a - center;
  const double qa = dot(d, d);
  if (qa == 0.0) {
    return {};
  }
  const double qb = 2.0 * dot(f, d);
  const double qc = dot(f, f) - radius * radius;
  const double disc = qb * qb - 4.0 * qa * qc;
  if (disc < 0.0) {
    return {};
  }
  const double sq = std::sqrt(disc);
  std::vector<double> out;
  for (double u : {(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)}) {
    if (u >= 0.0 && u <= 1.0) {
      out.push_back(u);
    }
  }
  return out;
}

inline double segment_projection(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 d = b - a;
  const double len2 = dot(d, d);
  if (len2 == 0.0) {
    return 0.0;
  }
  return std::clamp(dot(p - a, d) / len2, 0.0, 1.0);
}

}  // namespace detail

/// Look-ahead target on the remaining path (segments at or after the cursor).
///
/// Preference order: the final waypoint when it is within `l`; otherwise the
/// farthest-along intersection of the radius-`l` circle with the remaining
/// path; otherwise the nearest point on the remaining path. The returned
/// cursor is never smaller than the input cursor.
inline Lookahead select_lookahead(const Path& path, Vec2 position, double l) {
  path.validate();
  if (!(l > 0.0)) {
    throw DomainError("select_lookahead: lookahead must be positive");
  }
  const std::size_t last = path.last_index();
  const auto& wp = path.waypoints;

  if (distance(position, wp[last]) <= l) {
    return {wp[last], last};
  }

  std::optional<double> best_arc;  // segment index + u
  for (std::size_t i = path.cursor; i < last; ++i) {
    for (double u : detail::circle_segment_params(position, l, wp[i], wp[i + 1])) {
      const double arc = static_cast<double>(i) + u;
      if (!best_arc || arc > *best_arc) {
        best_arc = arc;
      }
    }
  }
  if (best_arc) {
    auto seg = static_cast<std::size_t>(std::floor(*best_arc));
    double u = *best_arc - static_cast<double>(seg);
    if (seg >= last) {  // u == 1 on the final segment
      seg = last - 1;
      u = 1.0;
    }
    const Vec2 point = wp[seg] + u * (wp[seg + 1] - wp[seg]);
    return {point, std::max(path.cursor, seg)};
  }

  double best_dist = std::numeric_limits<double>::infinity();
  Lookahead nearest{wp[path.cursor], path.cursor};
  for (std::size_t i = path.cursor; i < last; ++i) {
    const double u = detail::segment_projection(position, wp[i], wp[i + 1]);
    const Vec2 q = wp[i] + u * (wp[i + 1] - wp[i]);
    const double d = distance(position, q);
    if (d < best_dist) {
      best_dist = d;
      nearest = {q, std::max(path.cursor, i)};
    }
  }
  return nearest;
}

/// Steering angle toward the look-ahead point, realized on a differential
/// drive as curvature: w = v tan(delta) / wb.
struct PurePursuitOutput {
  double alpha{0.0};
  double delta{0.0};
  Twist2D twist;
};

inline PurePursuitOutput pure_pursuit_detail(const Pose2D& pose, Vec2 target, const PurePursuitConfig& cfg,
                                             const RobotParams& params) {
  const double dx = target.x - pose.x;
  const double dy = target.y - pose.y;
  PurePursuitOutput out;
  if (dx == 0.0 && dy == 0.0) {
    out.twist = {cfg.cruise_v, 0.0};
    return out;
  }
  out.alpha = cfg.kp_angular * normalize_angle(std::atan2(dy, dx) - pose.theta);
  out.delta = std::atan(cfg.kp_linear * params.wheelbase * std::sin(out.alpha) / cfg.lookahead);
  out.twist = {cfg.cruise_v, cfg.cruise_v * std::tan(out.delta) / params.wheelbase};
  return out;
}

inline Twist2D pure_pursuit_step(const Pose2D& pose, Vec2 target, const PurePursuitConfig& cfg,
                                 const RobotParams& params) {
  return pure_pursuit_detail(pose, target, cfg, params).twist;
}

// ---------------------------------------------------------------------------
// Line following

struct LineFollowConfig {
  double threshold{500.0};
  double base_pwm{30.0};
  double delta_pwm{15.0};
  bool dark_line{true};

  void validate() const {
    if (!(threshold > 0.0 && threshold < kAdcFullScale)) throw ValidationError("threshold", "must be in (0, 1023)");
    if (!(base_pwm >= 0.0 && base_pwm <= 100.0)) throw ValidationError("base_pwm", "must be in [0, 100]");
    if (!(delta_pwm >= 0.0 && delta_pwm <= 100.0)) throw ValidationError("delta_pwm", "must be in [0, 100]");
    if (base_pwm + delta_pwm > 100.0) throw ValidationError("delta_pwm", "base_pwm + delta_pwm must not exceed 100");
  }
};

/// One step of memory: the most recent turning command.
struct LineFollowMemory {
  std::optional<PwmCommand> last_turn;
};

/// Bang-bang two-sensor law. A sensor over the line speeds up the wheel on
/// that side's opposite, steering back toward the line. With the line lost on
/// both sensors the last turn is repeated.
inline PwmCommand line_follow_step(const AdcFrame& adc, const LineFollowConfig& cfg, LineFollowMemory& memory) {
  auto on_line = [&](double s) { return cfg.dark_line ? s < cfg.threshold : s > cfg.threshold; };
  const bool left = on_line(adc.left());
  const bool right = on_line(adc.right());
  const double base = cfg.base_pwm;
  const double d = cfg.delta_pwm;
  if (left && right) {
    return PwmCommand::clamped(base, base);
  }
  if (left) {
    memory.last_turn = PwmCommand::clamped(base - d, base + d);
    return *memory.last_turn;
  }
  if (right) {
    memory.last_turn = PwmCommand::clamped(base + d, base - d);
    return *memory.last_turn;
  }
  return memory.last_turn.value_or(PwmCommand::clamped(base, base));
}

// ---------------------------------------------------------------------------
// Swarm behaviors

struct RendezvousOutput {
  Twist2D twist;
  bool arrived{false};
  Vec2 target;
};

inline Vec2 centroid(Vec2 own, std::span<const Vec2> others) {
  Vec2 sum = own;
  for (const auto& p : others) {
    sum = sum + p;
  }
  return (1.0 / static_cast<double>(others.size() + 1)) * sum;
}

/// Go-to-goal toward the centroid of every agent, own position included.
inline RendezvousOutput rendezvous_step(const Pose2D& own, std::span<const Vec2> others, const GoToGoalConfig& cfg) {
  const Vec2 target = centroid(own.position(), others);
  const bool arrived = distance(own.position(), target) <= cfg.arrival_epsilon;
  return {go_to_goal_step(own, target, cfg), arrived, target};
}

/// Point `gap` behind the predecessor along its heading.
inline Vec2 follower_target(const Pose2D& predecessor, double gap) {
  return {predecessor.x - gap * std::cos(predecessor.theta), predecessor.y - gap * std::sin(predecessor.theta)};
}

inline Twist2D leader_follower_step(const Pose2D& own, const Pose2D& predecessor, double gap,
                                    const GoToGoalConfig& cfg) {
  if (!(gap > 0.0)) {
    throw DomainError("leader_follower_step: gap must be positive");
  }
  return go_to_goal_step(own, follower_target(predecessor, gap), cfg);
}

struct StatusLedConfig {
  LedState pending{{0, 255, 0}, 1.0};
  LedState arrived{{0, 0, 255}, 1.0};
};

/// Green while travelling, arrival color afterwards.
inline LedState led_for_status(bool arrived, const StatusLedConfig& cfg = {}) {
  return arrived ? cfg.arrived : cfg.pending;
}

inline LedState led_for_status(bool arrived, double intensity, const StatusLedConfig& cfg = {}) {
  LedState led = led_for_status(arrived, cfg);
  return LedState::make(led.rgb[0], led.rgb[1], led.rgb[2], intensity);
}

}  // namespace mbotsim
