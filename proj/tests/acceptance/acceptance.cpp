// Acceptance suite: one PASS/FAIL line per primary criterion.
// Exit status is non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mbotsim/mbotsim.hpp"

using namespace mbotsim;

namespace {

// Pinned tolerances.
constexpr double kKinematicsTol = 1e-9;
constexpr double kKinematicsMaxSeconds = 1.0;
constexpr double kTofTolMm = 2.0;
constexpr double kRayMarchStep = 1e-4;
constexpr double kRayMarchTol = 2e-4;
constexpr double kTofMaxSeconds = 10.0;
constexpr double kLineCrossTrack = 0.03;
constexpr double kGoToGoalEpsilon = 0.05;
constexpr double kGoToGoalHorizon = 30.0;
constexpr double kGoToGoalMaxSeconds = 5.0;
constexpr double kMonotoneSlack = 1e-9;
constexpr double kPursuitFinalTol = 0.05;
constexpr double kPursuitMaxSeconds = 5.0;
constexpr double kRendezvousMaxSeconds = 5.0;
constexpr double kRateRelTol = 0.02;
constexpr double kRateWindow = 10.0;
constexpr std::uint64_t kBridgeSteps = 1500;

const std::filesystem::path kScenarios = std::filesystem::path(MBOTSIM_SOURCE_DIR) / "scenarios";

struct Outcome {
  bool pass{true};
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 d = b - a;
  const double len2 = dot(d, d);
  const double u = len2 == 0.0 ? 0.0 : std::clamp(dot(p - a, d) / len2, 0.0, 1.0);
  return distance(p, a + u * d);
}

double polyline_distance(Vec2 p, const std::vector<Vec2>& pts) {
  double best = 1e300;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) best = std::min(best, point_segment_distance(p, pts[i], pts[i + 1]));
  return best;
}

// Fixed-step ray march, independent of the analytic intersection code.
std::optional<double> ray_march(const WorldModel& w, Vec2 origin, double bearing, double max_range) {
  const Vec2 dir{std::cos(bearing), std::sin(bearing)};
  auto side = [](const Segment& s, Vec2 p) { return cross(s.b - s.a, p - s.a); };
  auto within = [](const Segment& s, Vec2 p) {
    const Vec2 e = s.b - s.a;
    const double u = dot(p - s.a, e) / dot(e, e);
    return u >= -1e-9 && u <= 1.0 + 1e-9;
  };
  Vec2 prev = origin;
  const int n = static_cast<int>(max_range / kRayMarchStep);
  for (int i = 1; i <= n; ++i) {
    const double t = i * kRayMarchStep;
    const Vec2 p = origin + t * dir;
    for (const auto& c : w.circles) {
      if (distance(p, c.center) <= c.radius) return t;
    }
    for (const auto& s : w.segments) {
      if ((side(s, prev) > 0.0) != (side(s, p) > 0.0) && (within(s, p) || within(s, prev))) return t;
    }
    prev = p;
  }
  return std::nullopt;
}

Outcome kinematics() {
  const auto start = Clock::now();
  RobotParams p;
  p.wheel_radius = 0.02;
  p.wheelbase = 0.1;
  p.max_wheel_speed = 100.0;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> speed(-p.max_wheel_speed, p.max_wheel_speed);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const WheelSpeeds s{speed(rng), speed(rng)};
    const WheelSpeeds back = body_to_wheel(wheel_to_body(s, p), p);
    worst = std::max({worst, std::abs(back.left - s.left), std::abs(back.right - s.right)});
  }
  struct Arc {
    Pose2D start;
    Twist2D cmd;
    double dt;
    double x, y, theta;
  };
  double arc_worst = 0.0;
  for (const Arc& a : {Arc{Pose2D(0, 0, 0), {1, 0}, 1.0, 1, 0, 0}, Arc{Pose2D(0, 0, 0), {0, kPi / 2}, 1.0, 0, 0, kPi / 2},
                       Arc{Pose2D(0, 0, 0), {1, 1}, kPi, 0, 2, kPi}}) {
    const Pose2D q = integrate_pose(a.start, a.cmd, a.dt);
    arc_worst = std::max({arc_worst, std::abs(q.x - a.x), std::abs(q.y - a.y),
                          std::abs(normalize_angle(q.theta - a.theta))});
  }
  const double secs = seconds_since(start);
  Outcome o;
  o.pass = worst <= kKinematicsTol && arc_worst <= kKinematicsTol && secs < kKinematicsMaxSeconds;
  o.detail = "round-trip max err " + fmt("%.3g", worst) + ", arc max err " + fmt("%.3g", arc_worst) + ", " +
             fmt("%.3f s", secs);
  return o;
}

Outcome tof() {
  const auto start = Clock::now();
  const auto cfg = load_scenario_file(kScenarios / "tof_objects.json");
  Simulation sim(cfg);
  const auto snap = sim.snapshot();
  const auto& params = cfg.robots[0].params;
  const Pose2D pose = cfg.robots[0].initial_pose;

  // Oracle for an object straight along a channel's bearing: center distance
  // minus object radius minus body radius.
  double worst_mm = 0.0;
  bool sentinels_ok = true;
  for (int k = 0; k < kTofChannels; ++k) {
    const double b = pose.theta - k * kPi / 4;
    std::optional<double> expected;
    for (const auto& c : cfg.world.circles) {
      const Vec2 rel = c.center - pose.position();
      if (std::abs(normalize_angle(std::atan2(rel.y, rel.x) - b)) < 1e-9) {
        expected = (norm(rel) - c.radius - params.body_radius) * 1000.0;
      }
    }
    if (expected) {
      worst_mm = std::max(worst_mm, std::abs(snap.robots[0].tof[k] - *expected));
    } else if (snap.robots[0].tof[k] != 2000.0) {
      sentinels_ok = false;
    }
  }
  const bool channels_ok = worst_mm <= kTofTolMm;

  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> coord(-1.5, 1.5);
  std::uniform_real_distribution<double> radius(0.02, 0.3);
  std::uniform_real_distribution<double> bearing(-kPi, kPi);
  std::uniform_int_distribution<int> count(1, 10);
  double march_worst = 0.0;
  int disagreements = 0;
  for (int trial = 0; trial < 100; ++trial) {
    WorldModel w;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      if (i % 2 == 0) {
        w.segments.push_back({{coord(rng), coord(rng)}, {coord(rng), coord(rng)}});
      } else {
        Circle c{{coord(rng), coord(rng)}, radius(rng)};
        if (norm(c.center) > c.radius + 1e-3) w.circles.push_back(c);
      }
    }
    const double b = bearing(rng);
    const auto expected = ray_march(w, {0, 0}, b, 2.0);
    const auto got = raycast(w, {0, 0}, b, 2.0);
    if (expected.has_value() != got.has_value()) {
      ++disagreements;
    } else if (got) {
      march_worst = std::max(march_worst, std::abs(*got - *expected));
    }
  }
  const double secs = seconds_since(start);
  Outcome o;
  o.pass = channels_ok && sentinels_ok && disagreements == 0 && march_worst <= kRayMarchTol && secs < kTofMaxSeconds;
  o.detail = "channels 0/2/4/6 max err " + fmt("%.3g mm", worst_mm) + (sentinels_ok ? ", others 2000.0" : ", bad sentinel") +
             ", ray-march max err " + fmt("%.3g m", march_worst) + ", hit/miss mismatches " +
             std::to_string(disagreements) + ", " + fmt("%.2f s", secs);
  return o;
}

Outcome line_tracing() {
  const auto cfg = load_scenario_file(kScenarios / "line_trace.json");
  Simulation sim(cfg);
  sim.run(cfg.duration);
  const auto& name = cfg.robots[0].name;
  const auto& center = cfg.floor_lines.at(0).points;
  double arrival_t = -1.0;
  for (const auto& e : sim.log().events) {
    if (e.robot == name && e.kind == EventKind::arrival) arrival_t = e.t;
  }
  double worst = 0.0;
  for (const auto& s : sim.log().for_robot(name)) {
    if (arrival_t >= 0.0 && s.t > arrival_t) break;
    worst = std::max(worst, polyline_distance({s.x, s.y}, center));
  }
  Outcome o;
  o.pass = arrival_t >= 0.0 && worst <= kLineCrossTrack;
  o.detail = "max centerline offset " + fmt("%.4f m", worst) +
             (arrival_t >= 0.0 ? ", goal reached at t=" + fmt("%.2f s", arrival_t) : ", goal not reached");
  return o;
}

Outcome go_to_goal() {
  const auto start = Clock::now();
  const auto cfg = load_scenario_file(kScenarios / "go_to_goal.json");
  Simulation sim(cfg);
  sim.run(kGoToGoalHorizon);
  const double secs = seconds_since(start);
  Outcome o;
  double worst_final = 0.0;
  bool monotone = true;
  for (std::size_t i = 0; i < sim.robot_count(); ++i) {
    const auto& b = std::get<GoToGoalBinding>(cfg.robots[i].controller);
    worst_final = std::max(worst_final, distance(sim.pose(i).position(), b.goal));
    std::vector<Pose2D> traj{cfg.robots[i].initial_pose};
    for (const auto& s : sim.log().for_robot(cfg.robots[i].name)) traj.emplace_back(s.x, s.y, s.theta);
    bool aligned = false;
    double prev = 1e300;
    for (const auto& p : traj) {
      const double d = distance(p.position(), b.goal);
      if (aligned && d > prev + kMonotoneSlack) monotone = false;
      if (std::abs(normalize_angle(std::atan2(b.goal.y - p.y, b.goal.x - p.x) - p.theta)) < kPi / 2) aligned = true;
      prev = d;
    }
  }
  o.pass = worst_final <= kGoToGoalEpsilon && monotone && secs < kGoToGoalMaxSeconds;
  o.detail = "max final distance " + fmt("%.4f m", worst_final) + (monotone ? ", monotone" : ", NOT monotone") +
             ", " + fmt("%.2f s wall", secs);
  return o;
}

Outcome pure_pursuit() {
  const auto start = Clock::now();
  const auto cfg = load_scenario_file(kScenarios / "pure_pursuit.json");
  Simulation sim(cfg);
  sim.run(cfg.duration);
  const double secs = seconds_since(start);
  bool all_end = true;
  double worst_final = 0.0;
  double worst_xtrack = 0.0;
  double bound = 0.0;
  for (std::size_t i = 0; i < sim.robot_count(); ++i) {
    const auto& b = std::get<PurePursuitBinding>(cfg.robots[i].controller);
    const Path* path = sim.path(i);
    all_end = all_end && path->at_end() && sim.arrived(i);
    worst_final = std::max(worst_final, distance(sim.pose(i).position(), b.path.final_waypoint()));
    bound = b.cfg.lookahead / 10.0;
    // Steady state on the first straight leg: from 1 m after its start until
    // one look-ahead before its end, while that leg is still pursued.
    const Vec2 a = b.path.waypoints[0];
    const Vec2 e = b.path.waypoints[1];
    const Vec2 dir = (1.0 / distance(a, e)) * (e - a);
    double leg_end_t = 1e300;
    for (const auto& ev : sim.log().events) {
      if (ev.robot == cfg.robots[i].name && ev.kind == EventKind::waypoint_advance) {
        leg_end_t = std::min(leg_end_t, ev.t);
      }
    }
    for (const auto& s : sim.log().for_robot(cfg.robots[i].name)) {
      if (s.t >= leg_end_t) break;
      const double along = dot(Vec2{s.x, s.y} - a, dir);
      if (along >= 1.0 && along <= distance(a, e) - b.cfg.lookahead) {
        worst_xtrack = std::max(worst_xtrack, std::abs(cross(dir, Vec2{s.x, s.y} - a)));
      }
    }
  }
  Outcome o;
  o.pass = all_end && worst_final <= kPursuitFinalTol && worst_xtrack <= bound && secs < kPursuitMaxSeconds;
  o.detail = std::string(all_end ? "all paths completed" : "path NOT completed") + ", max final distance " +
             fmt("%.4f m", worst_final) + ", straight-leg cross-track " + fmt("%.4f m", worst_xtrack) + " (bound " +
             fmt("%.3f", bound) + "), " + fmt("%.2f s wall", secs);
  return o;
}

Outcome rendezvous() {
  const auto start = Clock::now();
  const auto cfg = load_scenario_file(kScenarios / "rendezvous8.json");
  Simulation sim(cfg);
  sim.run(cfg.duration);
  const double secs = seconds_since(start);
  double max_pair = 0.0;
  for (std::size_t i = 0; i < sim.robot_count(); ++i)
    for (std::size_t j = i + 1; j < sim.robot_count(); ++j)
      max_pair = std::max(max_pair, distance(sim.pose(i).position(), sim.pose(j).position()));
  const double eps = std::get<RendezvousBinding>(cfg.robots[0].controller).cfg.arrival_epsilon;

  bool led_ok = true;
  for (const auto& rc : cfg.robots) {
    const auto& b = std::get<RendezvousBinding>(rc.controller);
    std::vector<std::array<int, 3>> seq;
    for (const auto& s : sim.log().for_robot(rc.name)) {
      const std::array<int, 3> c{s.led_r, s.led_g, s.led_b};
      if (seq.empty() || seq.back() != c) seq.push_back(c);
    }
    led_ok = led_ok && seq.size() == 2 && seq[0] == b.led.pending.rgb && seq[1] == b.led.arrived.rgb;
  }
  Outcome o;
  o.pass = max_pair <= 2.0 * eps && led_ok && secs < kRendezvousMaxSeconds;
  o.detail = "max pairwise " + fmt("%.4f m", max_pair) + " (bound " + fmt("%.2f", 2.0 * eps) + "), " +
             (led_ok ? "every LED green->arrival once" : "LED sequence wrong") + ", " + fmt("%.2f s wall", secs);
  return o;
}

Outcome topic_rates() {
  const auto cfg = load_scenario_file(kScenarios / "topic_rates.json");
  Simulation sim(cfg);
  sim.run(kRateWindow);
  const auto& robot = cfg.robots[0].name;
  Outcome o;
  for (auto [suffix, nominal] : {std::pair{topics::image_raw, 12.0}, std::pair{topics::image_compressed, 30.0},
                                 std::pair{topics::spi_adc, 50.0}, std::pair{topics::tof_array, 15.0}}) {
    const auto r = measure_rate(sim.bus(), robot_topic(robot, suffix), kRateWindow);
    const bool ok = std::abs(r.mean_hz - nominal) <= kRateRelTol * nominal;
    o.pass = o.pass && ok;
    if (!o.detail.empty()) o.detail += ", ";
    o.detail += std::string(suffix) + " " + fmt("%.3f Hz", r.mean_hz);
  }
  return o;
}

Outcome determinism() {
  Outcome o;
  int checked = 0;
  for (const auto& entry : std::filesystem::directory_iterator(kScenarios)) {
    if (entry.path().extension() != ".json") continue;
    const auto cfg = load_scenario_file(entry.path());
    for (auto fmt_kind : {LogFormat::csv, LogFormat::jsonl}) {
      const auto a = log_to_string(run_scenario(cfg), fmt_kind);
      const auto b = log_to_string(run_scenario(cfg), fmt_kind);
      if (a != b) {
        o.pass = false;
        o.detail += entry.path().filename().string() + " differs; ";
      }
    }
    ++checked;
  }
  o.pass = o.pass && checked > 0;
  o.detail += std::to_string(checked) + " scenarios, CSV and JSONL byte-compared";
  return o;
}

Outcome bridge_equivalence() {
  Outcome o;
  for (const char* file : {"rendezvous8.json", "pure_pursuit.json"}) {
    const auto cfg = load_scenario_file(kScenarios / file);
    Simulation direct(cfg);
    for (std::uint64_t k = 0; k < kBridgeSteps; ++k) direct.step();

    LiveOptions opt;
    opt.speed = 0.0;  // unpaced
    opt.max_steps = kBridgeSteps;
    LiveSession session(cfg, opt);
    std::uint64_t frames = 0;
    bool poses_match = true;
    session.on_state([&](const SimSnapshot& snap, bool) {
      ++frames;
      // Every broadcast pose must equal the direct run's logged pose at that step.
      if (snap.step == 0) return;
      const std::size_t base = (snap.step - 1) * snap.robots.size();
      for (std::size_t i = 0; i < snap.robots.size(); ++i) {
        const auto& s = direct.log().samples.at(base + i);
        if (s.x != snap.robots[i].pose.x || s.y != snap.robots[i].pose.y || s.theta != snap.robots[i].pose.theta)
          poses_match = false;
      }
    });
    session.start();
    const bool finished = session.wait_for_steps(kBridgeSteps, std::chrono::seconds(30));
    session.stop();
    const bool same = finished && log_to_string(session.log(), LogFormat::csv) == log_to_string(direct.log(), LogFormat::csv);
    o.pass = o.pass && same && poses_match && frames > 0;
    o.detail += std::string(file) + (same ? " identical" : " DIFFERENT") + (poses_match ? "" : " (state poses differ)") +
                "; ";
  }

  std::ifstream in(std::filesystem::path(MBOTSIM_SOURCE_DIR) / "docs" / "wire_corpus.jsonl");
  std::string line;
  int total = 0;
  int ok = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++total;
    try {
      if (encode_frame(decode_frame(line)) == line) ++ok;
    } catch (const std::exception&) {
    }
  }
  o.pass = o.pass && total > 0 && ok == total;
  o.detail += "wire corpus " + std::to_string(ok) + "/" + std::to_string(total);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"kinematics exactness", kinematics},
      {"ToF four objects + ray-march oracle", tof},
      {"line tracing on S-curve", line_tracing},
      {"go-to-goal, 4 robots to square center", go_to_goal},
      {"pure pursuit waypoint course", pure_pursuit},
      {"rendezvous, 8 robots", rendezvous},
      {"topic rates 12/30/50/15 Hz", topic_rates},
      {"determinism of bundled scenarios", determinism},
      {"bridge equivalence + wire corpus", bridge_equivalence},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::printf("%s  %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    if (!o.pass) ++failed;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
