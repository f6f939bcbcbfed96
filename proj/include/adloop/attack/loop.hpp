#pragma once

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "adloop/attack/commands.hpp"
#include "adloop/attack/feedback.hpp"
#include "adloop/attack/side_swing.hpp"
#include "adloop/attack/switching.hpp"
#include "adloop/error.hpp"
#include "adloop/signal/types.hpp"

namespace adloop::attack {

enum class LoopMode { observe, oscillate, switching, side_swing, procedure };
enum class ExecutionMode { lockstep, pipelined };

inline const char* to_string(LoopMode m) {
  switch (m) {
    case LoopMode::observe: return "observe";
    case LoopMode::oscillate: return "oscillate";
    case LoopMode::switching: return "switching";
    case LoopMode::side_swing: return "side_swing";
    case LoopMode::procedure: return "procedure";
  }
  return "?";
}

inline LoopMode parse_loop_mode(const std::string& s) {
  for (auto m : {LoopMode::observe, LoopMode::oscillate, LoopMode::switching, LoopMode::side_swing,
                 LoopMode::procedure}) {
    if (s == to_string(m)) return m;
  }
  throw ConfigError("unknown attack mode '" + s +
                    "' (expected observe, oscillate, switching, side_swing or procedure)");
}

inline const char* to_string(ExecutionMode m) {
  return m == ExecutionMode::lockstep ? "lockstep" : "pipelined";
}

inline ExecutionMode parse_execution_mode(const std::string& s) {
  if (s == "lockstep") return ExecutionMode::lockstep;
  if (s == "pipelined") return ExecutionMode::pipelined;
  throw ConfigError("unknown execution mode '" + s + "' (expected lockstep or pipelined)");
}

struct LoopConfig {
  LoopMode mode = LoopMode::observe;
  double duration = 30.0;
  double injection_start = 5.0;      // carrier switched on (all modes but observe)
  double control_start = 19.0;       // closed-loop controller engages
  double oscillate_carrier = 19000.8;
  double oscillate_amplitude = 1.0;
  double loop_delay = 4096.0 / 44100.0;
  FeedbackConfig feedback{};
  SwitchingConfig switching{};
  SideSwingConfig side_swing{};
  std::vector<ProcedurePhase> procedure{};
  ExecutionMode execution = ExecutionMode::lockstep;
  bool realtime = false;             // pace the victim to the wall clock (pipelined only)
  std::size_t queue_capacity = 64;   // acoustic blocks in flight

  [[nodiscard]] double tick(double acoustic_rate) const {
    return static_cast<double>(feedback.frame_length) / acoustic_rate;
  }

  void validate(double acoustic_rate) const {
    if (!(duration > 0.0)) throw ConfigError("loop.duration must be positive");
    if (injection_start < 0.0) throw ConfigError("loop.injection_start must be >= 0");
    if (control_start < injection_start) {
      throw ConfigError("loop.control_start must not precede loop.injection_start");
    }
    if (!(oscillate_carrier > 0.0) || oscillate_amplitude < 0.0) {
      throw ConfigError("loop: oscillate_carrier must be positive, amplitude non-negative");
    }
    const double tc = tick(acoustic_rate);
    if (loop_delay < tc * (1.0 - 1e-12)) {
      throw ConfigError("loop.loop_delay (" + std::to_string(loop_delay) +
                        " s) must be at least one update time T_c = " + std::to_string(tc) + " s");
    }
    if (queue_capacity == 0) throw ConfigError("loop.queue_capacity must be positive");
    feedback.band.validate_for(acoustic_rate);
    switching.validate();
    side_swing.validate();
    if (mode == LoopMode::procedure) {
      if (procedure.empty()) throw ConfigError("procedure mode needs at least one phase");
      double total = control_start;
      for (const auto& p : procedure) {
        if (!(p.duration > 0.0)) throw ConfigError("procedure phase durations must be positive");
        total += p.duration;
      }
      if (total > duration + 1e-9) {
        throw ConfigError("procedure phases end at " + std::to_string(total) +
                          " s, after the run duration " + std::to_string(duration) + " s");
      }
    }
  }
};

struct TelemetryRow {
  double time = 0.0;
  double y_raw = 0.0;
  double y_smoothed = 0.0;
  double threshold = std::numeric_limits<double>::quiet_NaN();
  std::string event;
  double carrier_hz = 0.0;
  double amplitude = 0.0;
};

struct LoopTelemetry {
  signal::FeedbackSeries feedback;
  std::vector<std::pair<double, double>> thresholds;
  std::vector<SwitchEvent> switch_events;
  std::vector<double> step_history;
  std::vector<std::pair<double, double>> period_estimates;
  std::vector<AttackCommand> commands;
  std::vector<LoopEvent> events;
  std::vector<TelemetryRow> rows;
  std::vector<ProcedurePhase> procedure;
  double procedure_start = 0.0;
  double tick = 0.0;
  std::size_t latency_violations = 0;
  double max_stage_seconds = 0.0;
};

/// The attacker's whole view of the victim: sound comes out, injection
/// changes go in.
class VictimPort {
 public:
  virtual ~VictimPort() = default;
  [[nodiscard]] virtual double acoustic_rate() const = 0;
  virtual signal::SampleChunk next_acoustic_block() = 0;
  virtual void submit(const AttackCommand& cmd) = 0;
};

/// Single-threaded attacker: feedback extraction, controller and command
/// bookkeeping. Both execution modes drive it chunk by chunk.
class AttackEngine {
 public:
  AttackEngine(const LoopConfig& cfg, double acoustic_rate)
      : cfg_((cfg.validate(acoustic_rate), cfg)), tick_(cfg.tick(acoustic_rate)),
        extractor_(cfg.feedback, acoustic_rate), switching_(cfg.switching) {
    if (cfg_.mode == LoopMode::side_swing || cfg_.mode == LoopMode::procedure) {
      auto phases = cfg_.procedure;
      if (cfg_.mode == LoopMode::side_swing) {
        phases = {{PhaseGoal::spin_up, std::max(cfg_.duration - cfg_.control_start, tick_)}};
      }
      SideSwingConfig ss = cfg_.side_swing;
      ss.loop_delay = cfg_.loop_delay;
      if (ss.feedback_lag < 0.0) ss.feedback_lag = feedback_lag(cfg_.feedback, acoustic_rate);
      side_swing_.emplace(ss, phases, cfg_.control_start, tick_);
      telemetry_.procedure = phases;
      telemetry_.procedure_start = cfg_.control_start;
    }
    telemetry_.tick = tick_;
  }

  /// Commands known before the first sample (the carrier switch-on).
  std::vector<AttackCommand> start() {
    std::vector<AttackCommand> out;
    if (cfg_.mode != LoopMode::observe) {
      AttackCommand c;
      c.issue_time = cfg_.injection_start;
      c.new_frequency = cfg_.oscillate_carrier;
      c.new_amplitude = cfg_.oscillate_amplitude;
      c.kind = CommandKind::frequency_switch;
      record(c, std::nullopt);
      out.push_back(c);
      events_pending_.push_back({cfg_.injection_start, "injection_on"});
    }
    return out;
  }

  std::vector<AttackCommand> on_chunk(const signal::SampleChunk& chunk) {
    std::vector<AttackCommand> out;
    for (const auto& s : extractor_.push(chunk)) on_feedback(s, out);
    return out;
  }

  [[nodiscard]] LoopTelemetry finish() {
    telemetry_.feedback = extractor_.series();
    telemetry_.switch_events = switching_.events();
    telemetry_.step_history = switching_.step_history();
    if (side_swing_) {
      telemetry_.period_estimates = side_swing_->period_estimates();
    }
    return std::move(telemetry_);
  }

  [[nodiscard]] double tick() const noexcept { return tick_; }
  [[nodiscard]] const LoopConfig& config() const noexcept { return cfg_; }
  LoopTelemetry& telemetry() noexcept { return telemetry_; }

 private:
  void on_feedback(const FeedbackSample& s, std::vector<AttackCommand>& out) {
    const double issue = s.time + cfg_.loop_delay;
    std::vector<AttackCommand> cmds;
    double threshold = std::numeric_limits<double>::quiet_NaN();
    std::string event;

    if (cfg_.mode == LoopMode::switching && s.time >= cfg_.control_start) {
      if (!switching_engaged_) {
        switching_engaged_ = true;
        add_event(event, "switching_on");
        telemetry_.events.push_back({s.time, "switching_on"});
      }
      if (auto c = switching_.on_sample(s, issue, carrier_)) {
        const auto& e = switching_.events().back();
        const std::string text = "switch " + fmt(e.old_frequency) + "->" + fmt(e.new_frequency) +
                                 " step=" + fmt(e.step);
        add_event(event, text);
        telemetry_.events.push_back({s.time, text});
        cmds.push_back(*c);
      }
      threshold = switching_.threshold();
      telemetry_.thresholds.emplace_back(s.time, threshold);
    }
    if (side_swing_) {
      const std::size_t before = side_swing_->events().size();
      cmds = side_swing_->on_sample(s);
      for (std::size_t i = before; i < side_swing_->events().size(); ++i) {
        const auto& e = side_swing_->events()[i];
        add_event(event, e.text);
        telemetry_.events.push_back(e);
      }
    }
    for (auto it = events_pending_.begin(); it != events_pending_.end();) {
      if (it->time <= s.time) {
        add_event(event, it->text);
        telemetry_.events.push_back(*it);
        it = events_pending_.erase(it);
      } else {
        ++it;
      }
    }

    for (auto& c : cmds) {
      if (c.issue_time < issue - 1e-9) {
        throw InvariantError("causality: command at " + std::to_string(c.issue_time) +
                             " s issued from feedback at " + std::to_string(s.time) + " s");
      }
      record(c, s.time);
      out.push_back(c);
    }

    TelemetryRow row;
    row.time = s.time;
    row.y_raw = s.raw;
    row.y_smoothed = s.smoothed;
    row.threshold = threshold;
    row.event = std::move(event);
    row.carrier_hz = carrier_;
    row.amplitude = amplitude_;
    telemetry_.rows.push_back(std::move(row));
  }

  void record(const AttackCommand& c, std::optional<double> /*feedback_time*/) {
    c.validate();
    if (!telemetry_.commands.empty() && c.issue_time < telemetry_.commands.back().issue_time) {
      throw InvariantError("command stream issue times must be non-decreasing");
    }
    if (c.new_frequency) carrier_ = *c.new_frequency;
    if (c.new_amplitude) amplitude_ = *c.new_amplitude;
    telemetry_.commands.push_back(c);
  }

  static void add_event(std::string& field, const std::string& text) {
    if (!field.empty()) field += ';';
    field += text;
  }

  static std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
  }

  LoopConfig cfg_;
  double tick_;
  FeedbackExtractor extractor_;
  SwitchingController switching_;
  std::optional<SideSwingController> side_swing_;
  bool switching_engaged_ = false;
  double carrier_ = 0.0;
  double amplitude_ = 0.0;
  std::vector<LoopEvent> events_pending_;
  LoopTelemetry telemetry_;
};

namespace detail {

inline bool finished(const signal::SampleChunk& c, double duration) {
  return c.end_time() >= duration - 1e-9;
}

inline LoopTelemetry run_lockstep(VictimPort& port, const LoopConfig& cfg) {
  AttackEngine engine(cfg, port.acoustic_rate());
  for (const auto& c : engine.start()) port.submit(c);
  for (;;) {
    const auto chunk = port.next_acoustic_block();
    for (const auto& c : engine.on_chunk(chunk)) port.submit(c);
    if (finished(chunk, cfg.duration)) break;
  }
  return engine.finish();
}

/// Victim and attacker on separate threads joined by two FIFO queues.
///
/// The victim may produce block [b0, b1) only once the attacker has
/// consumed every block ending at or before b1 - delta_loop: any command
/// that could take effect before b1 is then already queued. The victim
/// therefore sees exactly the injection program of the lockstep run.
inline LoopTelemetry run_pipelined(VictimPort& port, const LoopConfig& cfg) {
  AttackEngine engine(cfg, port.acoustic_rate());
  const double delay = cfg.loop_delay;
  const double tick = engine.tick();

  std::mutex mu;
  std::condition_variable cv;
  std::deque<signal::SampleChunk> chunks;
  std::deque<AttackCommand> commands;
  double watermark = 0.0;  // end time of the last chunk the attacker finished
  bool victim_done = false;
  bool abort = false;
  std::exception_ptr victim_error;

  for (const auto& c : engine.start()) commands.push_back(c);

  std::thread victim([&] {
    try {
      const auto wall0 = std::chrono::steady_clock::now();
      double produced = 0.0;
      double block = 0.0;
      for (;;) {
        std::deque<AttackCommand> todo;
        {
          std::unique_lock lk(mu);
          cv.wait(lk, [&] {
            return abort || (chunks.size() < cfg.queue_capacity &&
                             produced + block <= watermark + delay + 1e-9);
          });
          if (abort) return;
          todo.swap(commands);
        }
        for (const auto& c : todo) port.submit(c);
        if (cfg.realtime) {
          std::this_thread::sleep_until(wall0 + std::chrono::duration<double>(produced));
        }
        auto chunk = port.next_acoustic_block();
        block = chunk.end_time() - chunk.start_time();
        produced = chunk.end_time();
        const bool last = finished(chunk, cfg.duration);
        {
          std::lock_guard lk(mu);
          chunks.push_back(std::move(chunk));
          if (last) victim_done = true;
        }
        cv.notify_all();
        if (last) return;
      }
    } catch (...) {
      std::lock_guard lk(mu);
      victim_error = std::current_exception();
      abort = true;
      cv.notify_all();
    }
  });

  std::exception_ptr attack_error;
  try {
    for (;;) {
      signal::SampleChunk chunk;
      bool last = false;
      {
        std::unique_lock lk(mu);
        cv.wait(lk, [&] { return abort || !chunks.empty(); });
        if (abort && chunks.empty()) break;
        chunk = std::move(chunks.front());
        chunks.pop_front();
        last = victim_done && chunks.empty();
      }
      const auto t0 = std::chrono::steady_clock::now();
      auto out = engine.on_chunk(chunk);
      const double spent = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      auto& tel = engine.telemetry();
      tel.max_stage_seconds = std::max(tel.max_stage_seconds, spent);
      if (spent > tick) ++tel.latency_violations;
      {
        std::lock_guard lk(mu);
        for (auto& c : out) commands.push_back(std::move(c));
        watermark = chunk.end_time();
      }
      cv.notify_all();
      if (last) break;
    }
  } catch (...) {
    attack_error = std::current_exception();
    std::lock_guard lk(mu);
    abort = true;
    cv.notify_all();
  }
  victim.join();
  if (victim_error) std::rethrow_exception(victim_error);
  if (attack_error) std::rethrow_exception(attack_error);
  // Commands issued from the final chunk still reach the victim's program.
  for (const auto& c : commands) port.submit(c);
  return engine.finish();
}

}  // namespace detail

/// Runs the adversarial loop against `port` until the victim's sound
/// reaches cfg.duration.
inline LoopTelemetry run_attack_loop(VictimPort& port, const LoopConfig& cfg) {
  return cfg.execution == ExecutionMode::lockstep ? detail::run_lockstep(port, cfg)
                                                  : detail::run_pipelined(port, cfg);
}

}  // namespace adloop::attack
