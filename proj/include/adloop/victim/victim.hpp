#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "adloop/error.hpp"
#include "adloop/signal/types.hpp"
#include "adloop/signal/waveform.hpp"
#include "adloop/victim/emanation.hpp"
#include "adloop/victim/gyro.hpp"
#include "adloop/victim/plant.hpp"

namespace adloop::victim {

/// Scripted motor command, linearly interpolated between points and held
/// after the last one. Replaces the heading controller's output when set.
struct CommandPoint {
  double time = 0.0;
  double command = 0.0;
};

struct VictimConfig {
  PlantConfig plant{};
  double gyro_rate = 1000.0;  // F_S0, Hz
  DriftConfig drift{};
  TransductionModel transduction{};  // initial_phase is redrawn from the run seed
  std::vector<CommandPoint> command_profile{};

  [[nodiscard]] double dt() const noexcept { return 1.0 / gyro_rate; }
  [[nodiscard]] double block_duration() const noexcept {
    return plant.emission_block_steps / gyro_rate;
  }
  [[nodiscard]] std::size_t block_samples() const noexcept {
    return static_cast<std::size_t>(std::llround(block_duration() * plant.acoustic_rate));
  }

  void validate() const {
    plant.validate();
    transduction.validate();
    if (!(gyro_rate > 0.0)) throw ConfigError("victim.gyro_rate must be positive");
    const double per_block = block_duration() * plant.acoustic_rate;
    if (std::abs(per_block - std::round(per_block)) > 1e-9) {
      throw ConfigError("acoustic_rate * emission_block_steps / gyro_rate = " +
                        std::to_string(per_block) +
                        " is not an integer; acoustic blocks would not align with control steps");
    }
    for (std::size_t i = 1; i < command_profile.size(); ++i) {
      if (!(command_profile[i].time > command_profile[i - 1].time)) {
        throw ConfigError("victim.command_profile times must be strictly increasing");
      }
    }
    for (const auto& p : command_profile) {
      if (p.command < -1.0 || p.command > 1.0) {
        throw ConfigError("victim.command_profile commands must lie in [-1, 1]");
      }
    }
  }
};

/// One row of the state trace (one gyro step).
struct TraceRow {
  double time = 0.0;
  double true_rate = 0.0;
  double sensor_rate = 0.0;
  double heading = 0.0;
  double command = 0.0;
  double speed = 0.0;
};

inline double command_at(const std::vector<CommandPoint>& profile, double t) {
  if (profile.empty()) return 0.0;
  if (t <= profile.front().time) return profile.front().command;
  for (std::size_t i = 1; i < profile.size(); ++i) {
    if (t <= profile[i].time) {
      const auto& a = profile[i - 1];
      const auto& b = profile[i];
      return a.command + (b.command - a.command) * (t - a.time) / (b.time - a.time);
    }
  }
  return profile.back().command;
}

/// The victim device in lockstep: sample -> control -> actuate, and every
/// emission_block_steps steps one block of motor sound.
///
/// The body turns with the motor (true_rate = -yaw_coupling * speed), so the
/// heading loop is self-restoring. The injection waveform is owned here and
/// may only be changed from the current time forward.
class VictimSimulator {
 public:
  VictimSimulator(const VictimConfig& cfg, std::uint64_t seed)
      : cfg_((cfg.validate(), cfg)),
        gyro_(cfg.gyro_rate, seeded_drift(cfg.drift, seed), seeded_transduction(cfg.transduction, seed)),
        synth_(cfg.plant, seed * 0x2545F4914F6CDD1DULL + 7),
        injection_(cfg.transduction.resonant_center_hz, 0.0) {}

  [[nodiscard]] const VictimConfig& config() const noexcept { return cfg_; }
  [[nodiscard]] const VictimState& state() const noexcept { return state_; }
  [[nodiscard]] double time() const noexcept {
    return static_cast<double>(step_) / cfg_.gyro_rate;
  }
  [[nodiscard]] std::int64_t step_index() const noexcept { return step_; }
  [[nodiscard]] const std::vector<TraceRow>& trace() const noexcept { return trace_; }
  [[nodiscard]] const signal::AttackWaveformSpec& injection() const noexcept { return injection_; }
  [[nodiscard]] double initial_phase() const noexcept { return gyro_.transduction().initial_phase; }
  [[nodiscard]] const GyroSamplerModel& gyro() const noexcept { return gyro_; }

  /// Changes the injected carrier from `time` on.
  void set_injection(double time, std::optional<double> frequency_hz,
                     std::optional<double> amplitude) {
    if (time < this->time()) {
      throw InvariantError("injection change at " + std::to_string(time) +
                           " s is in the victim's past (now " + std::to_string(this->time()) + " s)");
    }
    injection_.set(time, frequency_hz, amplitude);
  }

  /// Advances one gyro step; returns a block of sound when one completes.
  std::optional<signal::SampleChunk> step() {
    const double dt = cfg_.dt();
    TraceRow row;
    row.time = time();
    row.true_rate = state_.true_rate;

    const double sensor = sample_gyro(gyro_, &injection_, state_.true_rate, step_);
    state_ = step_controller(state_, sensor, dt, cfg_.plant);
    if (!cfg_.command_profile.empty()) {
      state_.motor_command = command_at(cfg_.command_profile, row.time);
    }
    state_ = step_motor(state_, dt, cfg_.plant);
    ++step_;
    state_.time = time();
    state_.true_rate = -cfg_.plant.yaw_coupling * state_.motor_speed;

    row.sensor_rate = sensor;
    row.heading = state_.heading;
    row.command = state_.motor_command;
    row.speed = state_.motor_speed;
    trace_.push_back(row);

    if (step_ % cfg_.plant.emission_block_steps == 0) {
      return synth_.emit(state_, cfg_.block_duration());
    }
    return std::nullopt;
  }

  /// Runs to the end of the next acoustic block and returns it.
  signal::SampleChunk advance_block() {
    for (;;) {
      if (auto chunk = step()) return std::move(*chunk);
    }
  }

 private:
  static DriftConfig seeded_drift(DriftConfig d, std::uint64_t seed) {
    d.seed = d.seed * 1000003ULL + seed;
    return d;
  }
  static TransductionModel seeded_transduction(TransductionModel t, std::uint64_t seed) {
    t.initial_phase = draw_initial_phase(seed);
    return t;
  }

  VictimConfig cfg_;
  GyroSamplerModel gyro_;
  EmanationSynth synth_;
  signal::AttackWaveformSpec injection_;
  VictimState state_{};
  std::int64_t step_ = 0;
  std::vector<TraceRow> trace_;
};

struct VictimRun {
  std::vector<TraceRow> trace;
  signal::SampleChunk acoustic;
  double initial_phase = 0.0;
};

/// Open-loop run against a fixed injection program.
inline VictimRun run_victim(const VictimConfig& cfg, std::uint64_t seed,
                            const signal::AttackWaveformSpec& attack, double duration) {
  if (!(duration > 0.0)) throw ConfigError("run_victim: duration must be positive");
  VictimSimulator sim(cfg, seed);
  for (const auto& bp : attack.breakpoints()) {
    sim.set_injection(std::max(bp.time, 0.0), bp.frequency_hz, bp.amplitude);
  }
  VictimRun run;
  run.initial_phase = sim.initial_phase();
  run.acoustic.sample_rate = cfg.plant.acoustic_rate;
  const auto blocks = static_cast<std::int64_t>(std::ceil(duration / cfg.block_duration() - 1e-9));
  for (std::int64_t b = 0; b < blocks; ++b) {
    auto chunk = sim.advance_block();
    run.acoustic.samples.insert(run.acoustic.samples.end(), chunk.samples.begin(),
                                chunk.samples.end());
  }
  run.trace = sim.trace();
  return run;
}

}  // namespace adloop::victim
