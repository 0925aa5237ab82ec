#pragma once

#include <algorithm>
#include <cmath>

#include "mbotsim/core.hpp"

namespace mbotsim {

/// Motor duty command as carried on writing_dc_motor_vel, each channel in [-100, 100].
struct PwmCommand {
  double left{0.0};
  double right{0.0};

  static PwmCommand clamped(double left, double right) {
    auto clamp = [](double v) { return std::isfinite(v) ? std::clamp(v, -100.0, 100.0) : 0.0; };
    return {clamp(left), clamp(right)};
  }

  friend bool operator==(const PwmCommand&, const PwmCommand&) = default;
};

/// Forward differential-drive kinematics:
///   v = r (wR + wL) / 2,  w = r (wR - wL) / wb
inline Twist2D wheel_to_body(WheelSpeeds wheels, const RobotParams& params) {
  const double r = params.wheel_radius;
  return {r * (wheels.right + wheels.left) / 2.0, r * (wheels.right - wheels.left) / params.wheelbase};
}

/// Scales both wheels by one factor so neither exceeds max_wheel_speed.
inline WheelSpeeds saturate(WheelSpeeds wheels, double max_wheel_speed) {
  const double peak = std::max(std::abs(wheels.left), std::abs(wheels.right));
  if (peak <= max_wheel_speed) {
    return wheels;
  }
  const double scale = max_wheel_speed / peak;
  return {wheels.left * scale, wheels.right * scale};
}

/// Inverse kinematics followed by curvature-preserving saturation.
inline WheelSpeeds body_to_wheel(Twist2D twist, const RobotParams& params) {
  const double r = params.wheel_radius;
  const double wb = params.wheelbase;
  WheelSpeeds raw{(2.0 * twist.v - twist.w * wb) / (2.0 * r), (2.0 * twist.v + twist.w * wb) / (2.0 * r)};
  return saturate(raw, params.max_wheel_speed);
}

/// Memoryless linear motor model: full duty is the no-load wheel speed.
inline WheelSpeeds pwm_to_wheel_speed(PwmCommand pwm, const RobotParams& params) {
  const PwmCommand c = PwmCommand::clamped(pwm.left, pwm.right);
  return {c.left / 100.0 * params.max_wheel_speed, c.right / 100.0 * params.max_wheel_speed};
}

inline constexpr double kStraightLineEpsilon = 1e-9;  // rad/s

/// Exact unicycle arc over dt; straight-line update when |w| < kStraightLineEpsilon.
inline Pose2D integrate_pose(const Pose2D& pose, Twist2D twist, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw DomainError("integrate_pose: dt must be positive");
  }
  const double th = pose.theta;
  if (std::abs(twist.w) < kStraightLineEpsilon) {
    return Pose2D(pose.x + twist.v * std::cos(th) * dt, pose.y + twist.v * std::sin(th) * dt, th);
  }
  const double radius = twist.v / twist.w;
  const double th1 = th + twist.w * dt;
  return Pose2D(pose.x + radius * (std::sin(th1) - std::sin(th)), pose.y - radius * (std::cos(th1) - std::cos(th)),
                th1);
}

/// First-order Euler step. Only used to compare against the exact arc.
inline Pose2D integrate_pose_euler(const Pose2D& pose, Twist2D twist, double dt) {
  if (!(dt > 0.0)) {
    throw DomainError("integrate_pose_euler: dt must be positive");
  }
  return Pose2D(pose.x + twist.v * std::cos(pose.theta) * dt, pose.y + twist.v * std::sin(pose.theta) * dt,
                pose.theta + twist.w * dt);
}

}  // namespace mbotsim
