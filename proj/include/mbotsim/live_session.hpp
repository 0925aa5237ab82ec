#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "mbotsim/engine.hpp"
#include "mbotsim/wire.hpp"

namespace mbotsim {

/// Small mutex-guarded queue; push drops the oldest entry when full.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

  /// Returns false if an older entry was dropped to make room.
  bool push(T value) {
    std::lock_guard lock(mu_);
    bool kept_all = true;
    if (items_.size() >= capacity_) {
      items_.pop_front();
      kept_all = false;
    }
    items_.push_back(std::move(value));
    return kept_all;
  }

  std::vector<T> drain() {
    std::lock_guard lock(mu_);
    std::vector<T> out(std::make_move_iterator(items_.begin()), std::make_move_iterator(items_.end()));
    items_.clear();
    return out;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return items_.size();
  }

 private:
  mutable std::mutex mu_;
  std::deque<T> items_;
  std::size_t capacity_;
};

struct LiveOptions {
  /// Simulation seconds per wall second; 0 runs unpaced (as fast as possible).
  double speed{1.0};
  double broadcast_hz{20.0};
  /// Stop advancing after this many steps (the thread keeps broadcasting).
  std::optional<std::uint64_t> max_steps;
  double teleop_v_max{0.5};
  double teleop_w_max{4.0};
};

/// Runs a Simulation on its own thread. Clients influence it only through
/// the teleop and control queues, drained at the start of each step; state
/// leaves as immutable snapshots through the broadcast callback.
class LiveSession {
 public:
  using StateCallback = std::function<void(const SimSnapshot&, bool paused)>;
  using TopicCallback = std::function<void(const TopicMessage&)>;

  LiveSession(ScenarioConfig cfg, LiveOptions opt)
      : cfg_(std::move(cfg)), opt_(opt), sim_(std::make_unique<Simulation>(cfg_)), speed_(opt.speed) {}

  ~LiveSession() { stop(); }

  LiveSession(const LiveSession&) = delete;
  LiveSession& operator=(const LiveSession&) = delete;

  const ScenarioConfig& config() const { return cfg_; }
  const LiveOptions& options() const { return opt_; }

  /// Must be set before start().
  void on_state(StateCallback cb) { on_state_ = std::move(cb); }
  void on_topic(TopicCallback cb) { on_topic_ = std::move(cb); }

  /// Clamps to the configured teleop limits.
  void submit_teleop(TeleopCommand cmd) {
    cmd.v = std::clamp(cmd.v, -opt_.teleop_v_max, opt_.teleop_v_max);
    cmd.w = std::clamp(cmd.w, -opt_.teleop_w_max, opt_.teleop_w_max);
    teleop_.push(std::move(cmd));
    wake();
  }

  void submit_control(ControlCommand cmd) {
    control_.push(std::move(cmd));
    wake();
  }

  void start() {
    if (thread_.joinable()) return;
    running_ = true;
    thread_ = std::thread([this] { loop(); });
  }

  void stop() {
    running_ = false;
    wake();
    if (thread_.joinable()) thread_.join();
  }

  /// Blocks until `steps` steps have run or the session stops.
  bool wait_for_steps(std::uint64_t steps, std::chrono::milliseconds timeout) {
    std::unique_lock lock(progress_mu_);
    return progress_cv_.wait_for(lock, timeout, [&] { return steps_done_ >= steps || !running_; }) &&
           steps_done_ >= steps;
  }

  std::uint64_t steps() const {
    std::lock_guard lock(progress_mu_);
    return steps_done_;
  }

  bool paused() const { return paused_; }

  /// Copy of the trajectory log. Only valid once the thread is stopped.
  TrajectoryLog log() const { return sim_->log(); }

  /// Latest snapshot published by the engine thread.
  SimSnapshot latest_snapshot() const {
    std::lock_guard lock(snap_mu_);
    return latest_;
  }

  /// Single-threaded stepping for callers that own the session thread:
  /// drains queues then advances one step.
  void step_once() {
    apply_controls();
    if (!paused_) advance_one();
  }

 private:
  using Clock = std::chrono::steady_clock;

  void wake() {
    std::lock_guard lock(wake_mu_);
    woken_ = true;
    wake_cv_.notify_all();
  }

  void apply_controls() {
    for (auto& c : control_.drain()) {
      if (c.pause) paused_ = *c.pause;
      if (c.speed) speed_ = *c.speed;
      if (c.reset) {
        sim_ = std::make_unique<Simulation>(cfg_);
        topic_subs_.clear();
        std::lock_guard lock(progress_mu_);
        steps_done_ = 0;
      }
      for (const auto& name : c.subscribe) {
        topic_subs_.push_back(sim_->bus().subscribe(name, 64));
      }
      resync_ = true;
    }
  }

  void advance_one() {
    for (const auto& t : teleop_.drain()) {
      if (sim_->robot_index(t.robot)) sim_->apply_teleop(t);
    }
    sim_->step();
    if (on_topic_) {
      for (auto sub : topic_subs_) {
        while (auto m = sim_->bus().take(sub)) on_topic_(*m);
      }
    }
    {
      std::lock_guard lock(progress_mu_);
      ++steps_done_;
    }
    progress_cv_.notify_all();
  }

  bool can_advance() const {
    return !paused_ && (!opt_.max_steps || sim_->steps() < *opt_.max_steps);
  }

  void publish_state() {
    SimSnapshot snap = sim_->snapshot();
    {
      std::lock_guard lock(snap_mu_);
      latest_ = snap;
    }
    if (on_state_) on_state_(snap, paused_);
  }

  void loop() {
    const auto broadcast_period =
        std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / opt_.broadcast_hz));
    auto next_broadcast = Clock::now();
    auto anchor_wall = Clock::now();
    double anchor_sim = sim_->clock();
    resync_ = true;

    while (running_) {
      apply_controls();
      const auto now = Clock::now();
      if (resync_ || paused_) {
        anchor_wall = now;
        anchor_sim = sim_->clock();
        resync_ = false;
      }

      if (can_advance()) {
        if (speed_ <= 0.0) {
          // Unpaced: run until the next broadcast is due.
          while (running_ && can_advance() && Clock::now() < next_broadcast) {
            advance_one();
            apply_controls();
          }
        } else {
          const double elapsed = std::chrono::duration<double>(now - anchor_wall).count();
          // Never run more than one broadcast interval ahead of the wall clock.
          const double target = std::min(anchor_sim + elapsed * speed_, sim_->clock() + speed_ / opt_.broadcast_hz);
          while (running_ && can_advance() && sim_->clock() + 0.5 * sim_->dt() < target) {
            advance_one();
          }
        }
      }

      if (Clock::now() >= next_broadcast) {
        publish_state();
        next_broadcast += broadcast_period;
        if (next_broadcast < Clock::now()) next_broadcast = Clock::now() + broadcast_period;
      }

      if (speed_ > 0.0 || !can_advance()) {
        std::unique_lock lock(wake_mu_);
        const auto until = std::min(next_broadcast, Clock::now() + std::chrono::milliseconds(2));
        wake_cv_.wait_until(lock, until, [&] { return woken_ || !running_; });
        woken_ = false;
      }
    }
    {
      std::lock_guard lock(progress_mu_);
    }
    progress_cv_.notify_all();
  }

  ScenarioConfig cfg_;
  LiveOptions opt_;
  std::unique_ptr<Simulation> sim_;
  std::vector<SubscriptionHandle> topic_subs_;

  BoundedQueue<TeleopCommand> teleop_{256};
  BoundedQueue<ControlCommand> control_{64};

  StateCallback on_state_;
  TopicCallback on_topic_;

  std::atomic<bool> running_{false};
  std::atomic<bool> paused_{false};
  std::atomic<double> speed_;
  bool resync_{true};

  std::thread thread_;
  std::mutex wake_mu_;
  std::condition_variable wake_cv_;
  bool woken_{false};

  mutable std::mutex progress_mu_;
  std::condition_variable progress_cv_;
  std::uint64_t steps_done_{0};

  mutable std::mutex snap_mu_;
  SimSnapshot latest_;
};

}  // namespace mbotsim
