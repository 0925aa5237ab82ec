#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mbotsim/core.hpp"

namespace mbotsim {

enum class TopicKind { float_array, twist, image_stub };

inline constexpr std::string_view to_string(TopicKind k) {
  switch (k) {
    case TopicKind::float_array:
      return "float_array";
    case TopicKind::twist:
      return "twist";
    case TopicKind::image_stub:
      return "image_stub";
  }
  return "unknown";
}

inline constexpr std::size_t kMaxFloatArrayLength = 16;

/// Camera payload stand-in: size marker plus a checksum of the (virtual) bytes.
struct ByteStub {
  std::uint32_t length{0};
  std::uint32_t checksum{0};

  friend bool operator==(const ByteStub&, const ByteStub&) = default;
};

using FloatArray = std::vector<float>;
using Payload = std::variant<FloatArray, Twist2D, ByteStub>;

inline TopicKind kind_of(const Payload& p) {
  return static_cast<TopicKind>(p.index());
}

struct TopicSpec {
  std::string name;
  TopicKind kind{TopicKind::float_array};
  std::optional<double> rate_hz;
  /// Required float-array length; 0 accepts any length up to 16.
  std::size_t array_length{0};
};

struct TopicMessage {
  std::string topic;
  double stamp{0.0};
  Payload payload;
};

struct RateSample {
  std::string topic;
  double window{0.0};
  double mean_hz{0.0};
  double stddev_hz{0.0};
  std::size_t count{0};
};

// ---------------------------------------------------------------------------
// Robot topic names

namespace topics {
inline constexpr std::string_view image_raw = "image_raw";
inline constexpr std::string_view image_compressed = "image_raw/compressed";
inline constexpr std::string_view spi_adc = "reading_spi_adc";
inline constexpr std::string_view tof_array = "reading_tof_array";
inline constexpr std::string_view cmd_vel = "writing_dc_cmd_vel";
inline constexpr std::string_view motor_vel = "writing_dc_motor_vel";
inline constexpr std::string_view led = "writing_gpio_smd5050_led";
inline constexpr std::string_view rgb_strip = "writing_ws2813b_rgb_strip";
/// Simulator addition: ground-truth pose [x, y, theta] in place of motion capture.
inline constexpr std::string_view ground_truth_pose = "ground_truth_pose";

inline constexpr std::array<std::string_view, 9> all{image_raw, image_compressed, spi_adc, tof_array, cmd_vel,
                                                     motor_vel, led,       rgb_strip, ground_truth_pose};

inline constexpr double image_raw_hz = 12.0;
inline constexpr double image_compressed_hz = 30.0;
inline constexpr double spi_adc_hz = 50.0;
inline constexpr double tof_array_hz = 15.0;

inline constexpr std::uint32_t image_raw_bytes = 64 * 1024;
inline constexpr std::uint32_t image_compressed_bytes = 8 * 1024;
}  // namespace topics

inline bool is_valid_robot_name(std::string_view name) {
  if (name.empty()) {
    return false;
  }
  return std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
  });
}

/// "/<robot>/<suffix>"; throws DomainError unless both parts follow the grammar.
inline std::string robot_topic(std::string_view robot, std::string_view suffix) {
  if (!is_valid_robot_name(robot)) {
    throw DomainError("robot_topic: invalid robot name '" + std::string(robot) + "'");
  }
  if (std::find(topics::all.begin(), topics::all.end(), suffix) == topics::all.end()) {
    throw DomainError("robot_topic: unknown suffix '" + std::string(suffix) + "'");
  }
  std::string out;
  out.reserve(robot.size() + suffix.size() + 2);
  out += '/';
  out += robot;
  out += '/';
  out += suffix;
  return out;
}

/// Splits "/<robot>/<suffix>" where suffix is one of topics::all.
inline std::optional<std::pair<std::string, std::string>> parse_robot_topic(std::string_view name) {
  if (name.size() < 3 || name.front() != '/') {
    return std::nullopt;
  }
  const auto slash = name.find('/', 1);
  if (slash == std::string_view::npos) {
    return std::nullopt;
  }
  const auto robot = name.substr(1, slash - 1);
  const auto suffix = name.substr(slash + 1);
  if (!is_valid_robot_name(robot)) {
    return std::nullopt;
  }
  if (std::find(topics::all.begin(), topics::all.end(), suffix) == topics::all.end()) {
    return std::nullopt;
  }
  return std::pair{std::string(robot), std::string(suffix)};
}

inline double rate_mean(const std::vector<double>& stamps) {
  if (stamps.size() < 2) {
    throw InsufficientDataError("rate: need at least two messages");
  }
  const double span = stamps.back() - stamps.front();
  if (!(span > 0.0)) {
    throw InsufficientDataError("rate: messages share one stamp");
  }
  return static_cast<double>(stamps.size() - 1) / span;
}

// ---------------------------------------------------------------------------

struct TopicHandle {
  std::size_t index{0};
};

struct SubscriptionHandle {
  std::size_t id{0};
};

/// In-process publish/subscribe with per-subscriber bounded queues
/// (drop-oldest, no history replay) and simulation-time scheduled publishers.
///
/// Not thread-safe; the engine is the only caller.
class Bus {
 public:
  using Source = std::function<Payload(double stamp)>;

  static constexpr std::size_t kDefaultDepth = 10;
  static constexpr std::size_t kStampHistory = 8192;

  TopicHandle advertise(const TopicSpec& spec) {
    if (spec.name.empty() || spec.name.front() != '/') {
      throw DomainError("advertise: topic name must start with '/': " + spec.name);
    }
    if (spec.rate_hz && !(*spec.rate_hz > 0.0)) {
      throw DomainError("advertise: rate_hz must be positive for " + spec.name);
    }
    if (spec.array_length > kMaxFloatArrayLength) {
      throw DomainError("advertise: array_length above 16 for " + spec.name);
    }
    if (by_name_.contains(spec.name)) {
      throw ConflictError("advertise: topic already advertised: " + spec.name);
    }
    const std::size_t index = topics_.size();
    topics_.push_back(Topic{spec, std::nullopt, {}});
    by_name_.emplace(spec.name, index);
    return TopicHandle{index};
  }

  std::optional<TopicHandle> find(std::string_view name) const {
    const auto it = by_name_.find(std::string(name));
    if (it == by_name_.end()) {
      return std::nullopt;
    }
    return TopicHandle{it->second};
  }

  const TopicSpec& spec(TopicHandle h) const { return topics_.at(h.index).spec; }

  std::vector<TopicSpec> advertised() const {
    std::vector<TopicSpec> out;
    out.reserve(topics_.size());
    for (const auto& t : topics_) {
      out.push_back(t.spec);
    }
    return out;
  }

  /// Subscriptions may precede advertisement; they see every publish made
  /// after this call and nothing before it.
  SubscriptionHandle subscribe(std::string name, std::size_t queue_depth = kDefaultDepth) {
    if (queue_depth == 0) {
      throw DomainError("subscribe: queue depth must be positive");
    }
    const std::size_t id = subscribers_.size();
    subscribers_.push_back(Subscriber{name, queue_depth, {}, 0});
    by_topic_subs_[std::move(name)].push_back(id);
    return SubscriptionHandle{id};
  }

  void publish(TopicHandle h, Payload payload, double stamp) {
    Topic& topic = topics_.at(h.index);
    const TopicSpec& spec = topic.spec;
    if (kind_of(payload) != spec.kind) {
      throw TypeError("publish: " + std::string(to_string(kind_of(payload))) + " payload on " +
                      std::string(to_string(spec.kind)) + " topic " + spec.name);
    }
    if (const auto* arr = std::get_if<FloatArray>(&payload)) {
      if (arr->size() > kMaxFloatArrayLength || (spec.array_length != 0 && arr->size() != spec.array_length)) {
        throw TypeError("publish: float array of length " + std::to_string(arr->size()) + " on " + spec.name);
      }
    }
    if (!std::isfinite(stamp)) {
      throw OrderingError("publish: non-finite stamp on " + spec.name);
    }
    if (topic.last_stamp && stamp < *topic.last_stamp) {
      throw OrderingError("publish: stamp regression on " + spec.name);
    }
    topic.last_stamp = stamp;
    topic.stamps.push_back(stamp);
    if (topic.stamps.size() > kStampHistory) {
      topic.stamps.pop_front();
    }

    const auto it = by_topic_subs_.find(spec.name);
    if (it == by_topic_subs_.end()) {
      return;
    }
    for (std::size_t id : it->second) {
      Subscriber& sub = subscribers_[id];
      sub.queue.push_back(TopicMessage{spec.name, stamp, payload});
      if (sub.queue.size() > sub.depth) {
        sub.queue.pop_front();
        ++sub.dropped;
      }
    }
  }

  void publish(TopicHandle h, const TopicMessage& msg) {
    if (msg.topic != spec(h).name) {
      throw TypeError("publish: message for " + msg.topic + " on handle for " + spec(h).name);
    }
    publish(h, msg.payload, msg.stamp);
  }

  /// Oldest queued message, FIFO.
  std::optional<TopicMessage> take(SubscriptionHandle s) {
    auto& q = subscribers_.at(s.id).queue;
    if (q.empty()) {
      return std::nullopt;
    }
    TopicMessage m = std::move(q.front());
    q.pop_front();
    return m;
  }

  /// Drains the queue and returns the newest message, if any.
  std::optional<TopicMessage> take_latest(SubscriptionHandle s) {
    auto& q = subscribers_.at(s.id).queue;
    if (q.empty()) {
      return std::nullopt;
    }
    TopicMessage m = std::move(q.back());
    q.clear();
    return m;
  }

  std::size_t pending(SubscriptionHandle s) const { return subscribers_.at(s.id).queue.size(); }
  std::uint64_t dropped(SubscriptionHandle s) const { return subscribers_.at(s.id).dropped; }

  /// Advertises `spec` (rate_hz required) and fires `source` on the
  /// simulation clock: a fire happens whenever floor(t * rate) increments.
  TopicHandle register_scheduled_publisher(const TopicSpec& spec, Source source) {
    if (!spec.rate_hz || !(*spec.rate_hz > 0.0)) {
      throw DomainError("register_scheduled_publisher: rate_hz must be positive for " + spec.name);
    }
    const TopicHandle h = advertise(spec);
    scheduled_.push_back(Scheduled{h, *spec.rate_hz, 0, std::move(source)});
    return h;
  }

  /// Fires every scheduled publisher due by simulation time tick * dt, in
  /// registration order. Each due publisher fires once per call, stamped with
  /// its nominal firing instant. Returns the number of messages published.
  std::size_t fire_due(std::uint64_t tick, double dt) {
    std::size_t fired = 0;
    for (auto& s : scheduled_) {
      const auto due = static_cast<std::uint64_t>(std::floor(static_cast<double>(tick) * dt * s.rate + 1e-9));
      if (due > s.fired) {
        s.fired = due;
        const double stamp = static_cast<double>(due) / s.rate;
        publish(s.handle, s.source(stamp), stamp);
        ++fired;
      }
    }
    return fired;
  }

  /// Rate over the messages stamped within `window` seconds of the newest one.
  RateSample measure_rate(std::string_view topic, double window) const {
    if (!(window > 0.0)) {
      throw DomainError("measure_rate: window must be positive");
    }
    const auto h = find(topic);
    if (!h) {
      throw InsufficientDataError("measure_rate: topic not advertised: " + std::string(topic));
    }
    const auto& all = topics_[h->index].stamps;
    if (all.size() < 2) {
      throw InsufficientDataError("measure_rate: fewer than two messages on " + std::string(topic));
    }
    const double newest = all.back();
    std::vector<double> stamps;
    for (double s : all) {
      if (s >= newest - window - 1e-9) {
        stamps.push_back(s);
      }
    }
    RateSample out;
    out.topic = std::string(topic);
    out.window = window;
    out.count = stamps.size();
    out.mean_hz = rate_mean(stamps);

    std::vector<double> inst;
    for (std::size_t i = 1; i < stamps.size(); ++i) {
      const double gap = stamps[i] - stamps[i - 1];
      if (gap > 0.0) {
        inst.push_back(1.0 / gap);
      }
    }
    if (inst.size() >= 2) {
      double mean = 0.0;
      for (double r : inst) mean += r;
      mean /= static_cast<double>(inst.size());
      double var = 0.0;
      for (double r : inst) var += (r - mean) * (r - mean);
      out.stddev_hz = std::sqrt(var / static_cast<double>(inst.size() - 1));
    }
    return out;
  }

 private:
  struct Topic {
    TopicSpec spec;
    std::optional<double> last_stamp;
    std::deque<double> stamps;
  };
  struct Subscriber {
    std::string topic;
    std::size_t depth;
    std::deque<TopicMessage> queue;
    std::uint64_t dropped;
  };
  struct Scheduled {
    TopicHandle handle;
    double rate;
    std::uint64_t fired;
    Source source;
  };

  std::vector<Topic> topics_;
  std::map<std::string, std::size_t, std::less<>> by_name_;
  std::vector<Subscriber> subscribers_;
  std::map<std::string, std::vector<std::size_t>, std::less<>> by_topic_subs_;
  std::vector<Scheduled> scheduled_;
};

inline TopicHandle advertise(Bus& bus, const TopicSpec& spec) { return bus.advertise(spec); }

inline RateSample measure_rate(const Bus& bus, std::string_view topic, double window) {
  return bus.measure_rate(topic, window);
}

}  // namespace mbotsim
