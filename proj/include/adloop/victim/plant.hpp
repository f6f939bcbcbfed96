#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "adloop/error.hpp"
#include "adloop/signal/types.hpp"

namespace adloop::victim {

struct PlantConfig {
  double controller_gain = 10.0;       // rpm per degree of heading
  double motor_time_constant = 0.03;   // s
  double max_speed = 200.0;            // rpm
  double torque = 0.2;                 // N*m, load torque used for the power law
  double yaw_coupling = 0.1;           // deg/s of body rotation per rpm (restoring)
  signal::BandSpec emanation_band{};   // where the motor's tones live
  double emanation_power_ratio = 500;  // alpha_p: P = alpha_p * P_s
  double noise_floor = 0.01;           // background noise std, acoustic units
  double acoustic_rate = 44100.0;      // Hz
  int tone_count = 5;
  double tone_weight_exponent = 0.5;   // tone k carries power ~ (k+1)^-exponent
  double tone_grid_hz = 44100.0 / 4096.0;
  int tone_shift_bins = 3;             // grid steps the stack climbs from rest to max speed
  int tone_width_bins = 3;             // half-width of each tone on the grid
  int emission_block_steps = 10;       // gyro steps per acoustic block

  void validate() const {
    if (!(controller_gain > 0.0) || !(motor_time_constant > 0.0) || !(max_speed > 0.0) ||
        !(torque > 0.0) || !(emanation_power_ratio > 0.0) || !(noise_floor >= 0.0) ||
        !(acoustic_rate > 0.0) || !(yaw_coupling >= 0.0) || !(tone_grid_hz > 0.0)) {
      throw ConfigError("plant: gains, time constant, max speed, torque, power ratio and rates "
                        "must be positive; noise floor and yaw coupling non-negative");
    }
    if (tone_count <= 0) throw ConfigError("plant: tone_count must be positive");
    if (tone_shift_bins < 0) throw ConfigError("plant: tone_shift_bins must be non-negative");
    if (tone_width_bins <= 0) throw ConfigError("plant: tone_width_bins must be positive");
    if (emission_block_steps <= 0) throw ConfigError("plant: emission_block_steps must be positive");
    try {
      emanation_band.validate_for(acoustic_rate);
    } catch (const SignalError& e) {
      throw ConfigError(std::string("plant.emanation_band: ") + e.what());
    }
  }
};

struct VictimState {
  double time = 0.0;               // s
  double true_rate = 0.0;          // deg/s, X(t)
  double sensor_rate = 0.0;        // deg/s, X'(t) as read by the gyro
  double heading = 0.0;            // deg, perceived
  double motor_command = 0.0;      // [-1, 1]
  double motor_speed = 0.0;        // rpm, signed
  double torque = 0.0;             // N*m
};

/// Heading integration and proportional heading-to-speed command.
inline VictimState step_controller(VictimState state, double sensor_value, double dt,
                                   const PlantConfig& cfg) {
  if (!(dt > 0.0)) throw SignalError("step_controller: dt must be positive");
  state.sensor_rate = sensor_value;
  state.heading += sensor_value * dt;
  state.motor_command = std::clamp(cfg.controller_gain * state.heading / cfg.max_speed, -1.0, 1.0);
  return state;
}

/// First-order actuator lag, integrated exactly over dt.
inline VictimState step_motor(VictimState state, double dt, const PlantConfig& cfg) {
  if (!(dt > 0.0)) throw SignalError("step_motor: dt must be positive");
  const double target = state.motor_command * cfg.max_speed;
  const double k = -std::expm1(-dt / cfg.motor_time_constant);
  state.motor_speed += (target - state.motor_speed) * k;
  state.motor_speed = std::clamp(state.motor_speed, -cfg.max_speed, cfg.max_speed);
  state.torque = cfg.torque;
  return state;
}

/// Mechanical output power, P = tau * rpm * 2 pi / 60 (W).
inline double motor_power(double torque, double rpm) {
  return torque * std::abs(rpm) * 2.0 * std::numbers::pi / 60.0;
}

}  // namespace adloop::victim
