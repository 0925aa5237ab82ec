#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <random>

#include "mbotsim/core.hpp"

namespace mbotsim {

inline constexpr int kTofChannels = 8;
inline constexpr int kAdcChannels = 8;
inline constexpr double kAdcFullScale = 1023.0;  // 10-bit

/// Eight ToF distances in millimeters, index 0 at the heading, increasing clockwise.
/// Missed channels carry the max-range sentinel and valid = false.
struct TofReading {
  std::array<double, kTofChannels> distances{};
  std::array<bool, kTofChannels> valid{};
};

/// data[0] left line sensor, data[1] right line sensor, data[2..7] spare.
struct AdcFrame {
  std::array<double, kAdcChannels> values{};

  double left() const { return values[0]; }
  double right() const { return values[1]; }
};

enum class AdcPolarity {
  white_high,  ///< bright floor gives high counts (default)
  white_low,
};

/// Optional uniform zero-mean noise; both amplitudes zero means noiseless.
struct SensorNoise {
  double tof_mm{0.0};
  double adc_counts{0.0};

  bool enabled() const { return tof_mm > 0.0 || adc_counts > 0.0; }
};

namespace detail {

inline std::optional<double> ray_segment(Vec2 origin, Vec2 dir, const Segment& s) {
  const Vec2 e = s.b - s.a;
  const double denom = cross(dir, e);
  if (denom == 0.0) {
    return std::nullopt;  // parallel, including collinear overlap
  }
  const Vec2 ao = s.a - origin;
  const double t = cross(ao, e) / denom;
  const double u = cross(ao, dir) / denom;
  if (t > 0.0 && u >= 0.0 && u <= 1.0) {
    return t;
  }
  return std::nullopt;
}

inline std::optional<double> ray_circle(Vec2 origin, Vec2 dir, const Circle& c) {
  const Vec2 oc = origin - c.center;
  const double b = dot(dir, oc);
  const double cc = dot(oc, oc) - c.radius * c.radius;
  const double disc = b * b - cc;
  if (disc < 0.0) {
    return std::nullopt;
  }
  const double sq = std::sqrt(disc);
  const double near = -b - sq;
  if (near > 0.0) {
    return near;
  }
  const double far = -b + sq;
  if (far > 0.0) {
    return far;
  }
  return std::nullopt;
}

}  // namespace detail

/// Nearest positive hit along the ray against every segment and circle, or
/// nullopt if nothing lies within max_range.
inline std::optional<double> raycast(const WorldModel& world, Vec2 origin, double bearing, double max_range) {
  if (!(max_range > 0.0)) {
    throw DomainError("raycast: max_range must be positive");
  }
  const Vec2 dir{std::cos(bearing), std::sin(bearing)};
  std::optional<double> best;
  auto consider = [&](std::optional<double> t) {
    if (t && *t <= max_range && (!best || *t < *best)) {
      best = t;
    }
  };
  for (const auto& s : world.segments) {
    consider(detail::ray_segment(origin, dir, s));
  }
  for (const auto& c : world.circles) {
    consider(detail::ray_circle(origin, dir, c));
  }
  return best;
}

/// Bearing of ToF channel k in world frame: clockwise from the heading.
inline double tof_bearing(const Pose2D& pose, int k, int count = kTofChannels) {
  return normalize_angle(pose.theta - k * (kTwoPi / count));
}

/// Sensor origins sit on the body perimeter; distances are surface-to-object.
inline TofReading sample_tof_array(const WorldModel& world, const Pose2D& pose, const RobotParams& params,
                                   const SensorNoise& noise = {}, std::mt19937_64* rng = nullptr) {
  if (params.tof_count != kTofChannels) {
    throw DomainError("sample_tof_array: tof_count must be 8");
  }
  const double max_mm = params.tof_max_range_mm;
  TofReading out;
  for (int k = 0; k < kTofChannels; ++k) {
    const double bearing = tof_bearing(pose, k);
    const Vec2 origin = pose.position() + params.body_radius * Vec2{std::cos(bearing), std::sin(bearing)};
    const auto hit = raycast(world, origin, bearing, params.tof_max_range_m());
    if (hit) {
      double mm = *hit * 1000.0;
      if (noise.tof_mm > 0.0 && rng != nullptr) {
        std::uniform_real_distribution<double> u(-noise.tof_mm, noise.tof_mm);
        mm += u(*rng);
      }
      out.distances[k] = std::clamp(mm, 1e-3, max_mm);
      out.valid[k] = true;
    } else {
      out.distances[k] = max_mm;
      out.valid[k] = false;
    }
  }
  return out;
}

inline double reflectance_to_adc(double reflectance, AdcPolarity polarity) {
  const double level = polarity == AdcPolarity::white_high ? reflectance : 1.0 - reflectance;
  return std::round(kAdcFullScale * std::clamp(level, 0.0, 1.0));
}

inline AdcFrame sample_line_sensors(const WorldModel& world, const Pose2D& pose, const RobotParams& params,
                                    AdcPolarity polarity = AdcPolarity::white_high, const SensorNoise& noise = {},
                                    std::mt19937_64* rng = nullptr) {
  AdcFrame frame;
  for (std::size_t i = 0; i < params.line_sensor_offsets.size(); ++i) {
    const Vec2 p = pose.transform(params.line_sensor_offsets[i]);
    double counts = reflectance_to_adc(floor_reflectance(world, p), polarity);
    if (noise.adc_counts > 0.0 && rng != nullptr) {
      std::uniform_real_distribution<double> u(-noise.adc_counts, noise.adc_counts);
      counts = std::clamp(std::round(counts + u(*rng)), 0.0, kAdcFullScale);
    }
    frame.values[i] = counts;
  }
  return frame;
}

}  // namespace mbotsim
