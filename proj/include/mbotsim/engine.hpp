#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mbotsim/bus.hpp"
#include "mbotsim/controllers.hpp"
#include "mbotsim/core.hpp"
#include "mbotsim/kinematics.hpp"
#include "mbotsim/scenario.hpp"
#include "mbotsim/sensors.hpp"
#include "mbotsim/trajectory_log.hpp"

namespace mbotsim {

/// Human drive command for one robot, routed onto its writing_dc_cmd_vel topic.
struct TeleopCommand {
  std::string robot;
  double v{0.0};
  double w{0.0};
  double stamp{0.0};
};

struct RobotSnapshot {
  std::string name;
  Pose2D pose;
  LedState led;
  std::array<double, kTofChannels> tof{};
  std::array<double, 2> line{};
  Twist2D applied;
};

struct SimSnapshot {
  double t{0.0};
  std::uint64_t step{0};
  std::vector<RobotSnapshot> robots;
};

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

/// Deterministic fixed-timestep simulation of one scenario.
///
/// Each step, in order: fire due scheduled publishers from the current poses
/// (delivery is synchronous); run every robot controller on its freshest
/// inputs and publish its outputs; consume the motor topics (later stamp wins,
/// Twist on a tie); integrate poses over dt; append one log sample per robot.
///
/// Scheduled messages carry their nominal firing instant as stamp; controller
/// outputs are stamped with the end of the step.
class Simulation {
 public:
  explicit Simulation(ScenarioConfig cfg) : cfg_(std::move(cfg)) {
    if (!(cfg_.dt > 0.0)) {
      throw ValidationError("dt", "must be positive");
    }
    std::set<std::string> names;
    for (const auto& rc : cfg_.robots) {
      if (!is_valid_robot_name(rc.name) || !names.insert(rc.name).second) {
        throw ValidationError("robots", "robot names must be unique and use [A-Za-z0-9_]");
      }
      rc.params.validate();
    }
    obstacles_.segments = cfg_.world.segments;
    obstacles_.circles = cfg_.world.circles;

    robots_.reserve(cfg_.robots.size());
    for (std::size_t i = 0; i < cfg_.robots.size(); ++i) {
      robots_.push_back(make_robot(cfg_.robots[i]));
    }
    for (std::size_t i = 0; i < robots_.size(); ++i) {
      wire_robot(i);
    }
    for (auto& r : robots_) {
      r.last_tof = sample_tof_for(r);
      r.last_adc = sample_line_sensors(cfg_.world, r.pose, r.cfg.params, cfg_.polarity);
    }
  }

  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  const ScenarioConfig& config() const { return cfg_; }
  double dt() const { return cfg_.dt; }
  double clock() const { return static_cast<double>(tick_) * cfg_.dt; }
  std::uint64_t steps() const { return tick_; }
  Bus& bus() { return bus_; }
  const Bus& bus() const { return bus_; }
  const TrajectoryLog& log() const { return log_; }
  std::size_t robot_count() const { return robots_.size(); }

  std::optional<std::size_t> robot_index(std::string_view name) const {
    for (std::size_t i = 0; i < robots_.size(); ++i) {
      if (robots_[i].cfg.name == name) return i;
    }
    return std::nullopt;
  }

  const Pose2D& pose(std::size_t i) const { return robots_.at(i).pose; }
  const LedState& led(std::size_t i) const { return robots_.at(i).led; }
  const Path* path(std::size_t i) const {
    const auto* pp = std::get_if<PurePursuitBinding>(&robots_.at(i).cfg.controller);
    return pp ? &pp->path : nullptr;
  }
  bool arrived(std::size_t i) const { return robots_.at(i).arrived; }

  /// Publishes a teleop twist on the robot's writing_dc_cmd_vel topic, stamped
  /// with the current clock; it is consumed during the next step.
  void apply_teleop(const TeleopCommand& cmd) {
    const auto i = robot_index(cmd.robot);
    if (!i) {
      throw DomainError("teleop: unknown robot '" + cmd.robot + "'");
    }
    bus_.publish(robots_[*i].cmd_h, Twist2D{cmd.v, cmd.w}, clock());
  }

  std::vector<Event> step() {
    const std::uint64_t next = tick_ + 1;
    const double t_end = static_cast<double>(next) * cfg_.dt;
    step_events_.clear();

    bus_.fire_due(next, cfg_.dt);
    for (auto& r : robots_) {
      run_controller(r, t_end);
    }
    for (auto& r : robots_) {
      consume_commands(r, t_end);
    }
    for (auto& r : robots_) {
      r.pose = integrate_pose(r.pose, r.applied, cfg_.dt);
    }
    tick_ = next;
    check_overlaps(t_end);
    for (const auto& r : robots_) {
      log_.samples.push_back(LogSample{t_end, r.cfg.name, r.pose.x, r.pose.y, r.pose.theta, r.applied.v,
                                       r.applied.w, r.led.rgb[0], r.led.rgb[1], r.led.rgb[2]});
    }
    log_.events.insert(log_.events.end(), step_events_.begin(), step_events_.end());
    return step_events_;
  }

  /// Executes ceil(duration / dt) steps and returns the accumulated log.
  const TrajectoryLog& run(double duration) {
    if (!(duration > 0.0)) {
      throw DomainError("run: duration must be positive");
    }
    const auto n = static_cast<std::uint64_t>(std::ceil(duration / cfg_.dt - 1e-9));
    for (std::uint64_t k = 0; k < n; ++k) {
      step();
    }
    return log_;
  }

  SimSnapshot snapshot() const {
    SimSnapshot s;
    s.t = clock();
    s.step = tick_;
    for (const auto& r : robots_) {
      RobotSnapshot rs;
      rs.name = r.cfg.name;
      rs.pose = r.pose;
      rs.led = r.led;
      rs.tof = r.last_tof.distances;
      rs.line = {r.last_adc.values[0], r.last_adc.values[1]};
      rs.applied = r.applied;
      s.robots.push_back(std::move(rs));
    }
    return s;
  }

 private:
  using HeldCommand = std::variant<Twist2D, PwmCommand>;

  struct Robot {
    RobotConfig cfg;
    Pose2D pose;
    WheelSpeeds wheels;
    Twist2D applied;
    LedState led;
    TofReading last_tof;
    AdcFrame last_adc;
    std::mt19937_64 rng;
    std::uint64_t raw_frames{0};
    std::uint64_t compressed_frames{0};

    TopicHandle tof_h, adc_h, raw_h, comp_h, pose_h, cmd_h, motor_h, led_h, strip_h;
    SubscriptionHandle cmd_sub, motor_sub, led_sub, strip_sub;
    std::optional<SubscriptionHandle> own_pose_sub;
    std::optional<SubscriptionHandle> adc_sub;
    std::optional<Pose2D> own_pose_obs;
    std::optional<AdcFrame> adc_obs;
    bool adc_fresh{false};
    std::vector<std::pair<std::string, SubscriptionHandle>> peer_subs;  // sorted by name
    std::map<std::string, Pose2D> peer_obs;

    LineFollowMemory lf_memory;
    bool arrived{false};
    bool faulted{false};
    std::optional<LedState> led_published;
    HeldCommand held{Twist2D{}};
    int steps_without_command{0};
    bool timed_out{false};
  };

  Robot make_robot(const RobotConfig& rc) {
    Robot r;
    r.cfg = rc;
    r.pose = rc.initial_pose;
    r.rng.seed(cfg_.seed ^ fnv1a(rc.name));
    return r;
  }

  static FloatArray pose_array(const Pose2D& p) {
    return {static_cast<float>(p.x), static_cast<float>(p.y), static_cast<float>(p.theta)};
  }
  static Pose2D array_pose(const FloatArray& a) { return Pose2D(a.at(0), a.at(1), a.at(2)); }

  void wire_robot(std::size_t i) {
    Robot& r = robots_[i];
    const std::string& n = r.cfg.name;
    auto spec = [&](std::string_view suffix, TopicKind kind, std::size_t len, std::optional<double> rate) {
      return TopicSpec{robot_topic(n, suffix), kind, rate, len};
    };

    r.raw_h = bus_.register_scheduled_publisher(
        spec(topics::image_raw, TopicKind::image_stub, 0, cfg_.rate_for(topics::image_raw)), [this, i](double) {
          Robot& rr = robots_[i];
          const auto frame = ++rr.raw_frames;
          return Payload{ByteStub{topics::image_raw_bytes,
                                  static_cast<std::uint32_t>(fnv1a(rr.cfg.name + "/raw/" + std::to_string(frame)))}};
        });
    r.comp_h = bus_.register_scheduled_publisher(
        spec(topics::image_compressed, TopicKind::image_stub, 0, cfg_.rate_for(topics::image_compressed)),
        [this, i](double) {
          Robot& rr = robots_[i];
          const auto frame = ++rr.compressed_frames;
          return Payload{ByteStub{topics::image_compressed_bytes,
                                  static_cast<std::uint32_t>(fnv1a(rr.cfg.name + "/jpg/" + std::to_string(frame)))}};
        });
    r.adc_h = bus_.register_scheduled_publisher(
        spec(topics::spi_adc, TopicKind::float_array, kAdcChannels, cfg_.rate_for(topics::spi_adc)),
        [this, i](double) {
          Robot& rr = robots_[i];
          rr.last_adc = sample_line_sensors(cfg_.world, rr.pose, rr.cfg.params, cfg_.polarity, cfg_.noise, &rr.rng);
          FloatArray a(kAdcChannels);
          for (int k = 0; k < kAdcChannels; ++k) a[k] = static_cast<float>(rr.last_adc.values[k]);
          return Payload{std::move(a)};
        });
    r.tof_h = bus_.register_scheduled_publisher(
        spec(topics::tof_array, TopicKind::float_array, kTofChannels, cfg_.rate_for(topics::tof_array)),
        [this, i](double) {
          Robot& rr = robots_[i];
          rr.last_tof = sample_tof_for(rr);
          FloatArray a(kTofChannels);
          for (int k = 0; k < kTofChannels; ++k) a[k] = static_cast<float>(rr.last_tof.distances[k]);
          return Payload{std::move(a)};
        });
    r.pose_h = bus_.register_scheduled_publisher(
        spec(topics::ground_truth_pose, TopicKind::float_array, 3, cfg_.rate_for(topics::ground_truth_pose)),
        [this, i](double) { return Payload{pose_array(robots_[i].pose)}; });

    r.cmd_h = bus_.advertise(spec(topics::cmd_vel, TopicKind::twist, 0, std::nullopt));
    r.motor_h = bus_.advertise(spec(topics::motor_vel, TopicKind::float_array, 2, std::nullopt));
    r.led_h = bus_.advertise(spec(topics::led, TopicKind::float_array, 4, std::nullopt));
    r.strip_h = bus_.advertise(spec(topics::rgb_strip, TopicKind::float_array, 4, std::nullopt));

    r.cmd_sub = bus_.subscribe(robot_topic(n, topics::cmd_vel));
    r.motor_sub = bus_.subscribe(robot_topic(n, topics::motor_vel));
    r.led_sub = bus_.subscribe(robot_topic(n, topics::led));
    r.strip_sub = bus_.subscribe(robot_topic(n, topics::rgb_strip));

    const auto& b = r.cfg.controller;
    const bool needs_pose = std::holds_alternative<GoToGoalBinding>(b) || std::holds_alternative<PurePursuitBinding>(b) ||
                            std::holds_alternative<RendezvousBinding>(b) ||
                            std::holds_alternative<LeaderFollowerBinding>(b) ||
                            (std::holds_alternative<LineFollowBinding>(b) && std::get<LineFollowBinding>(b).goal);
    if (needs_pose) {
      r.own_pose_sub = bus_.subscribe(robot_topic(n, topics::ground_truth_pose));
    }
    if (std::holds_alternative<LineFollowBinding>(b)) {
      r.adc_sub = bus_.subscribe(robot_topic(n, topics::spi_adc));
    }
    std::vector<std::string> peers;
    if (const auto* rz = std::get_if<RendezvousBinding>(&b); rz && !rz->fixed_goal) {
      for (const auto& other : cfg_.robots) {
        if (other.name != n) peers.push_back(other.name);
      }
    }
    if (const auto* lf = std::get_if<LeaderFollowerBinding>(&b)) {
      peers.push_back(lf->predecessor);
    }
    std::sort(peers.begin(), peers.end());
    for (const auto& p : peers) {
      r.peer_subs.emplace_back(p, bus_.subscribe(robot_topic(p, topics::ground_truth_pose)));
    }
  }

  TofReading sample_tof_for(Robot& r) {
    WorldModel view;
    view.segments = obstacles_.segments;
    view.circles = obstacles_.circles;
    for (const auto& other : robots_) {
      if (&other != &r) {
        view.circles.push_back(Circle{other.pose.position(), other.cfg.params.body_radius});
      }
    }
    return sample_tof_array(view, r.pose, r.cfg.params, cfg_.noise, &r.rng);
  }

  void emit(double t, const Robot& r, EventKind kind, std::string detail = {}) {
    step_events_.push_back(Event{t, r.cfg.name, kind, std::move(detail)});
  }

  void publish_twist(Robot& r, Twist2D tw, double t) { bus_.publish(r.cmd_h, tw, t); }
  void publish_pwm(Robot& r, PwmCommand p, double t) {
    bus_.publish(r.motor_h, FloatArray{static_cast<float>(p.left), static_cast<float>(p.right)}, t);
  }
  void publish_status_led(Robot& r, const LedState& led, double t) {
    if (r.led_published && *r.led_published == led) {
      return;
    }
    r.led_published = led;
    bus_.publish(r.strip_h,
                 FloatArray{static_cast<float>(led.rgb[0]), static_cast<float>(led.rgb[1]),
                            static_cast<float>(led.rgb[2]), static_cast<float>(led.intensity)},
                 t);
  }

  void refresh_inputs(Robot& r) {
    if (r.own_pose_sub) {
      if (auto m = bus_.take_latest(*r.own_pose_sub)) {
        r.own_pose_obs = array_pose(std::get<FloatArray>(m->payload));
      }
    }
    r.adc_fresh = false;
    if (r.adc_sub) {
      if (auto m = bus_.take_latest(*r.adc_sub)) {
        AdcFrame f;
        const auto& a = std::get<FloatArray>(m->payload);
        for (int k = 0; k < kAdcChannels; ++k) f.values[k] = a[k];
        r.adc_obs = f;
        r.adc_fresh = true;
      }
    }
    for (const auto& [name, sub] : r.peer_subs) {
      if (auto m = bus_.take_latest(sub)) {
        r.peer_obs[name] = array_pose(std::get<FloatArray>(m->payload));
      }
    }
  }

  void run_controller(Robot& r, double t) {
    refresh_inputs(r);
    if (r.faulted) {
      return;
    }
    try {
      std::visit([&](auto& binding) { control(r, binding, t); }, r.cfg.controller);
    } catch (const std::exception& e) {
      r.faulted = true;
      emit(t, r, EventKind::fault, e.what());
      publish_twist(r, Twist2D{}, t);
    }
  }

  void control(Robot&, NoController&, double) {}
  void control(Robot&, TeleopBinding&, double) {}
  void control(Robot& r, ConstantTwistBinding& b, double t) { publish_twist(r, b.twist, t); }
  void control(Robot& r, ConstantPwmBinding& b, double t) { publish_pwm(r, b.pwm, t); }

  void control(Robot& r, GoToGoalBinding& b, double t) {
    if (!r.own_pose_obs) return;
    const Twist2D tw = go_to_goal_step(*r.own_pose_obs, b.goal, b.cfg);
    if (!r.arrived && distance(r.own_pose_obs->position(), b.goal) <= b.cfg.arrival_epsilon) {
      r.arrived = true;
      emit(t, r, EventKind::arrival);
    }
    publish_twist(r, tw, t);
  }

  void control(Robot& r, PurePursuitBinding& b, double t) {
    if (!r.own_pose_obs) return;
    if (r.arrived) {
      publish_twist(r, Twist2D{}, t);
      return;
    }
    const Pose2D& pose = *r.own_pose_obs;
    const Lookahead la = select_lookahead(b.path, pose.position(), b.cfg.lookahead);
    while (b.path.cursor < la.cursor) {
      ++b.path.cursor;
      emit(t, r, EventKind::waypoint_advance, std::to_string(b.path.cursor));
    }
    if (b.path.at_end() && distance(pose.position(), b.path.final_waypoint()) <= b.cfg.waypoint_advance_epsilon) {
      r.arrived = true;
      emit(t, r, EventKind::arrival);
      publish_twist(r, Twist2D{}, t);
      return;
    }
    publish_twist(r, pure_pursuit_step(pose, la.point, b.cfg, r.cfg.params), t);
  }

  void control(Robot& r, LineFollowBinding& b, double t) {
    if (r.arrived) {
      return;
    }
    if (b.goal && r.own_pose_obs && distance(r.own_pose_obs->position(), *b.goal) <= b.goal_radius) {
      r.arrived = true;
      emit(t, r, EventKind::arrival);
      publish_pwm(r, PwmCommand{}, t);
      return;
    }
    if (r.adc_fresh && r.adc_obs) {
      publish_pwm(r, line_follow_step(*r.adc_obs, b.cfg, r.lf_memory), t);
    }
  }

  void control(Robot& r, RendezvousBinding& b, double t) {
    if (!r.own_pose_obs) return;
    if (!r.arrived) {
      bool arrived_now = false;
      Twist2D tw;
      if (b.fixed_goal) {
        tw = go_to_goal_step(*r.own_pose_obs, *b.fixed_goal, b.cfg);
        arrived_now = distance(r.own_pose_obs->position(), *b.fixed_goal) <= b.cfg.arrival_epsilon;
      } else {
        std::vector<Vec2> others;
        others.reserve(r.peer_obs.size());
        for (const auto& [name, p] : r.peer_obs) others.push_back(p.position());
        const RendezvousOutput out = rendezvous_step(*r.own_pose_obs, others, b.cfg);
        tw = out.twist;
        arrived_now = out.arrived;
      }
      if (arrived_now) {
        r.arrived = true;
        emit(t, r, EventKind::arrival);
        tw = Twist2D{};
      }
      publish_twist(r, tw, t);
    } else {
      publish_twist(r, Twist2D{}, t);
    }
    publish_status_led(r, led_for_status(r.arrived, b.led), t);
  }

  void control(Robot& r, LeaderFollowerBinding& b, double t) {
    if (!r.own_pose_obs) return;
    const auto it = r.peer_obs.find(b.predecessor);
    if (it == r.peer_obs.end()) return;
    publish_twist(r, leader_follower_step(*r.own_pose_obs, it->second, b.gap, b.cfg), t);
  }

  void consume_commands(Robot& r, double t) {
    std::optional<TopicMessage> twist_msg;
    while (auto m = bus_.take(r.cmd_sub)) twist_msg = std::move(m);
    std::optional<TopicMessage> pwm_msg;
    while (auto m = bus_.take(r.motor_sub)) pwm_msg = std::move(m);

    bool received = true;
    if (twist_msg && (!pwm_msg || twist_msg->stamp >= pwm_msg->stamp)) {
      r.held = std::get<Twist2D>(twist_msg->payload);
    } else if (pwm_msg) {
      const auto& a = std::get<FloatArray>(pwm_msg->payload);
      r.held = PwmCommand::clamped(a[0], a[1]);
    } else {
      received = false;
    }

    if (received) {
      r.steps_without_command = 0;
      r.timed_out = false;
    } else if (cfg_.command_timeout_steps > 0 && ++r.steps_without_command >= cfg_.command_timeout_steps &&
               !r.timed_out) {
      r.timed_out = true;
      r.held = Twist2D{};
      emit(t, r, EventKind::command_timeout);
    }

    if (const auto* tw = std::get_if<Twist2D>(&r.held)) {
      r.wheels = body_to_wheel(*tw, r.cfg.params);
    } else {
      r.wheels = pwm_to_wheel_speed(std::get<PwmCommand>(r.held), r.cfg.params);
    }
    r.applied = wheel_to_body(r.wheels, r.cfg.params);

    for (auto sub : {r.led_sub, r.strip_sub}) {
      if (auto m = bus_.take_latest(sub)) {
        const auto& a = std::get<FloatArray>(m->payload);
        r.led = LedState::make(static_cast<int>(std::lround(a[0])), static_cast<int>(std::lround(a[1])),
                               static_cast<int>(std::lround(a[2])), a[3]);
      }
    }
  }

  void check_overlaps(double t) {
    for (std::size_t i = 0; i < robots_.size(); ++i) {
      for (std::size_t j = i + 1; j < robots_.size(); ++j) {
        const Robot& a = robots_[i];
        const Robot& b = robots_[j];
        const auto key = a.cfg.name < b.cfg.name ? std::pair{a.cfg.name, b.cfg.name} : std::pair{b.cfg.name, a.cfg.name};
        const bool hit = distance(a.pose.position(), b.pose.position()) < a.cfg.params.body_radius + b.cfg.params.body_radius;
        if (hit && overlapping_.insert(key).second) {
          step_events_.push_back(Event{t, key.first, EventKind::overlap, key.second});
        } else if (!hit) {
          overlapping_.erase(key);
        }
      }
    }
  }

  ScenarioConfig cfg_;
  WorldModel obstacles_;
  Bus bus_;
  std::vector<Robot> robots_;
  std::uint64_t tick_{0};
  TrajectoryLog log_;
  std::vector<Event> step_events_;
  std::set<std::pair<std::string, std::string>> overlapping_;
};

inline TrajectoryLog run_scenario(const ScenarioConfig& cfg, std::optional<std::uint64_t> seed = std::nullopt) {
  ScenarioConfig c = cfg;
  if (seed) c.seed = *seed;
  Simulation sim(std::move(c));
  return sim.run(sim.config().duration);
}

}  // namespace mbotsim
