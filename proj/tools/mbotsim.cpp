// mbotsim command-line entry point.
//
//   mbotsim run <scenario> [--out PATH] [--format csv|jsonl] [--seed N]
//   mbotsim serve <scenario> [--port N] [--speed X] [--broadcast-hz N]
//
// Exit status: 0 success, 2 scenario/validation error, 1 runtime fault.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "mbotsim/mbotsim.hpp"
#include "mbotsim/ws_server.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFault = 1;
constexpr int kExitValidation = 2;

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("mbotsim");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* lvl = std::getenv("MBOTSIM_LOG_LEVEL")) {
    spdlog::set_level(spdlog::level::from_str(lvl));
  }
}

void print_summary(std::ostream& os, const mbotsim::Simulation& sim) {
  const auto& log = sim.log();
  os << "scenario " << sim.config().name << ": " << sim.steps() << " steps, t = " << sim.clock() << " s\n";
  for (std::size_t i = 0; i < sim.robot_count(); ++i) {
    const auto& name = sim.config().robots[i].name;
    const auto& p = sim.pose(i);
    os << "  " << name << " final pose (" << p.x << ", " << p.y << ", " << p.theta << ")"
       << " arrivals " << log.count_events(name, mbotsim::EventKind::arrival) << '\n';
  }
  for (const auto& e : log.events) {
    if (e.kind == mbotsim::EventKind::arrival || e.kind == mbotsim::EventKind::fault) {
      os << "  event t=" << e.t << " " << e.robot << " " << mbotsim::to_string(e.kind);
      if (!e.detail.empty()) os << " (" << e.detail << ")";
      os << '\n';
    }
  }
}

int cmd_run(const std::string& scenario_path, const std::string& out, const std::string& format,
            std::optional<std::uint64_t> seed, std::optional<double> duration) {
  mbotsim::ScenarioConfig cfg;
  try {
    if (!std::filesystem::exists(scenario_path)) {
      std::cerr << "error: scenario file not found: " << scenario_path << '\n';
      return kExitValidation;
    }
    cfg = mbotsim::load_scenario_file(scenario_path);
  } catch (const mbotsim::ValidationError& e) {
    std::cerr << "error: invalid scenario " << scenario_path << ": " << e.what() << '\n';
    return kExitValidation;
  }
  if (seed) cfg.seed = *seed;
  const double run_for = duration.value_or(cfg.duration);
  const auto fmt = format == "jsonl" ? mbotsim::LogFormat::jsonl : mbotsim::LogFormat::csv;

  try {
    spdlog::info("running {} for {} s at dt {}", cfg.name, run_for, cfg.dt);
    mbotsim::Simulation sim(cfg);
    sim.run(run_for);
    bool faulted = false;
    for (const auto& e : sim.log().events) {
      if (e.kind == mbotsim::EventKind::fault) {
        spdlog::error("controller fault on {} at t={}: {}", e.robot, e.t, e.detail);
        faulted = true;
      }
    }
    if (out.empty() || out == "-") {
      mbotsim::write_log(sim.log(), fmt, std::cout);
      print_summary(std::cerr, sim);
    } else {
      mbotsim::export_log(sim.log(), fmt, out);
      print_summary(std::cout, sim);
    }
    return faulted ? kExitFault : kExitOk;
  } catch (const mbotsim::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFault;
  }
}

int cmd_serve(const std::string& scenario_path, const std::string& address, unsigned short port, double speed,
              double broadcast_hz, std::optional<std::uint64_t> max_steps, const std::string& out) {
  mbotsim::ScenarioConfig cfg;
  try {
    if (!std::filesystem::exists(scenario_path)) {
      std::cerr << "error: scenario file not found: " << scenario_path << '\n';
      return kExitValidation;
    }
    cfg = mbotsim::load_scenario_file(scenario_path);
  } catch (const mbotsim::ValidationError& e) {
    std::cerr << "error: invalid scenario " << scenario_path << ": " << e.what() << '\n';
    return kExitValidation;
  }

  mbotsim::LiveOptions opt;
  opt.speed = speed;
  opt.broadcast_hz = broadcast_hz;
  opt.max_steps = max_steps;

  try {
    mbotsim::LiveSession session(cfg, opt);
    mbotsim::BridgeServer server(session, port, address);
    server.start();
    session.start();
    std::cout << "serving " << cfg.name << " on ws://" << address << ":" << server.port() << std::endl;

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_interrupted) {
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    session.stop();
    server.stop();
    if (!out.empty() && !session.log().samples.empty()) {
      mbotsim::export_log(session.log(), out.ends_with(".jsonl") ? mbotsim::LogFormat::jsonl : mbotsim::LogFormat::csv,
                          out);
    }
    return kExitOk;
  } catch (const boost::system::system_error& e) {
    std::cerr << "error: cannot listen on " << address << ":" << port << ": " << e.what() << '\n';
    return kExitFault;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFault;
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();

  CLI::App app{"Deterministic 2D multi-robot simulator"};
  app.require_subcommand(1);

  std::string scenario;
  std::string out;
  std::string format = "csv";
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
  auto* run = app.add_subcommand("run", "Run a scenario to completion and export the trajectory log");
  run->add_option("scenario", scenario, "Scenario JSON file")->required();
  run->add_option("--out", out, "Output path (default: stdout)");
  run->add_option("--format", format, "Log format")->check(CLI::IsMember({"csv", "jsonl"}));
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--duration", duration, "Override the scenario duration (seconds)")->check(CLI::PositiveNumber);

  std::string address = "0.0.0.0";
  unsigned short port = 8765;
  double speed = 1.0;
  double broadcast_hz = 20.0;
  std::optional<std::uint64_t> max_steps;
  std::string serve_out;
  auto* serve = app.add_subcommand("serve", "Run a scenario live behind the WebSocket bridge");
  serve->add_option("scenario", scenario, "Scenario JSON file")->required();
  serve->add_option("--port", port, "TCP port (0 picks a free one)");
  serve->add_option("--address", address, "Listen address");
  serve->add_option("--speed", speed, "Simulation speed multiplier; 0 runs unpaced")->check(CLI::NonNegativeNumber);
  serve->add_option("--broadcast-hz", broadcast_hz, "State frame rate")->check(CLI::PositiveNumber);
  serve->add_option("--max-steps", max_steps, "Stop advancing after N steps");
  serve->add_option("--out", serve_out, "Export the trajectory log here on shutdown");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  if (*run) {
    return cmd_run(scenario, out, format, seed, duration);
  }
  return cmd_serve(scenario, address, port, speed, broadcast_hz, max_steps, serve_out);
}
