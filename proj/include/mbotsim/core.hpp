#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "mbotsim/errors.hpp"

namespace mbotsim {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Wraps an angle into (-pi, pi]. Throws DomainError on non-finite input.
inline double normalize_angle(double theta) {
  if (!std::isfinite(theta)) {
    throw DomainError("normalize_angle: non-finite angle");
  }
  double r = std::remainder(theta, kTwoPi);  // [-pi, pi]
  if (r <= -kPi) {
    r += kTwoPi;
  }
  return r;
}

inline constexpr double rpm_to_rad_per_s(double rpm) { return rpm * kTwoPi / 60.0; }

struct Vec2 {
  double x{0.0};
  double y{0.0};

  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend constexpr bool operator==(Vec2, Vec2) = default;
};

inline constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(b - a); }

/// Planar pose. Counterclockwise-positive heading, zero along +x.
/// The constructor normalizes theta into (-pi, pi].
struct Pose2D {
  double x{0.0};
  double y{0.0};
  double theta{0.0};

  Pose2D() = default;
  Pose2D(double x_, double y_, double theta_) : x(x_), y(y_), theta(normalize_angle(theta_)) {}

  Vec2 position() const { return {x, y}; }

  /// Body-frame point to world frame.
  Vec2 transform(Vec2 body) const {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    return {x + c * body.x - s * body.y, y + s * body.x + c * body.y};
  }

  friend bool operator==(const Pose2D&, const Pose2D&) = default;
};

struct Twist2D {
  double v{0.0};  ///< m/s
  double w{0.0};  ///< rad/s

  friend bool operator==(const Twist2D&, const Twist2D&) = default;
};

struct WheelSpeeds {
  double left{0.0};   ///< rad/s
  double right{0.0};  ///< rad/s

  friend bool operator==(const WheelSpeeds&, const WheelSpeeds&) = default;
};

struct RobotParams {
  double wheel_radius{0.016};
  double wheelbase{0.11};
  double body_radius{0.075};
  double max_wheel_speed{rpm_to_rad_per_s(330.0)};
  int tof_count{8};
  double tof_max_range_mm{2000.0};
  /// Left then right line sensor, body frame (x forward, y left).
  std::array<Vec2, 2> line_sensor_offsets{{{0.05, 0.02}, {0.05, -0.02}}};

  /// Default "smartmbot" profile: 15 cm body, 330 RPM no-load gearmotor.
  static RobotParams smartmbot() { return RobotParams{}; }

  double tof_max_range_m() const { return tof_max_range_mm / 1000.0; }

  /// Throws ValidationError naming the first bad field (relative name).
  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(std::isfinite(v) && v > 0.0)) {
        throw ValidationError(name, "must be a finite positive number");
      }
    };
    positive(wheel_radius, "wheel_radius");
    positive(wheelbase, "wheelbase");
    positive(body_radius, "body_radius");
    positive(max_wheel_speed, "max_wheel_speed");
    positive(tof_max_range_mm, "tof_max_range_mm");
    if (tof_count <= 0) {
      throw ValidationError("tof_count", "must be positive");
    }
  }
};

struct Segment {
  Vec2 a;
  Vec2 b;
};

struct Circle {
  Vec2 center;
  double radius{0.0};
};

/// Row-major grayscale reflectance grid. Cell (col, row) covers the half-open
/// box [origin + (col, row) * cell_size, origin + (col + 1, row + 1) * cell_size).
struct FloorMap {
  Vec2 origin;
  double cell_size{0.01};
  int cols{0};
  int rows{0};
  std::vector<double> values;
  double background{1.0};

  double at(int col, int row) const { return values[static_cast<std::size_t>(row) * cols + col]; }
  double& at(int col, int row) { return values[static_cast<std::size_t>(row) * cols + col]; }

  void validate() const {
    if (!(cell_size > 0.0) || !std::isfinite(cell_size)) {
      throw ValidationError("cell_size", "must be positive");
    }
    if (cols < 0 || rows < 0 || values.size() != static_cast<std::size_t>(cols) * rows) {
      throw ValidationError("values", "grid size does not match cols * rows");
    }
    for (double v : values) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ValidationError("values", "reflectance must be within [0, 1]");
      }
    }
    if (!(background >= 0.0 && background <= 1.0)) {
      throw ValidationError("background", "reflectance must be within [0, 1]");
    }
  }
};

struct Bounds {
  Vec2 min{-5.0, -5.0};
  Vec2 max{5.0, 5.0};
};

struct WorldModel {
  std::vector<Segment> segments;
  std::vector<Circle> circles;
  FloorMap floor;
  Bounds bounds;
};

/// Reflectance of the floor cell containing `point`; background outside the grid.
inline double floor_reflectance(const WorldModel& world, Vec2 point) {
  const FloorMap& f = world.floor;
  if (f.cols == 0 || f.rows == 0) {
    return f.background;
  }
  const double cx = std::floor((point.x - f.origin.x) / f.cell_size);
  const double cy = std::floor((point.y - f.origin.y) / f.cell_size);
  if (!(cx >= 0.0 && cy >= 0.0 && cx < f.cols && cy < f.rows)) {
    return f.background;
  }
  return f.at(static_cast<int>(cx), static_cast<int>(cy));
}

struct LedState {
  std::array<int, 3> rgb{0, 0, 0};
  double intensity{0.0};

  static LedState make(int r, int g, int b, double intensity = 1.0) {
    auto clamp_channel = [](int c) { return c < 0 ? 0 : (c > 255 ? 255 : c); };
    const double i = std::isfinite(intensity) ? (intensity < 0.0 ? 0.0 : (intensity > 1.0 ? 1.0 : intensity)) : 0.0;
    return LedState{{clamp_channel(r), clamp_channel(g), clamp_channel(b)}, i};
  }

  friend bool operator==(const LedState&, const LedState&) = default;
};

}  // namespace mbotsim
