#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "adloop/attack/feedback.hpp"
#include "adloop/victim/victim.hpp"
#include "oracles.hpp"

using namespace adloop;
using namespace adloop::victim;

namespace {

DriftConfig no_drift() {
  DriftConfig d;
  d.jitter_sigma_s = 0.0;
  d.bias_walk_sigma_s = 0.0;
  d.max_bias_s = 0.0;
  return d;
}

TransductionModel centred_at(double f, double phi0 = 0.0) {
  TransductionModel t;
  t.resonant_center_hz = f;
  t.initial_phase = phi0;
  return t;
}

double lorentz(double f, double centre, double a) {
  const double x = (f - centre) / 200.0;
  return 25.0 * a / (1.0 + x * x);
}

}  // namespace

TEST(Gyro, NoAttackReturnsTrueRate) {
  GyroSamplerModel m(1000.0, DriftConfig{}, TransductionModel{});
  for (std::int64_t i = 0; i < 500; ++i) {
    const double truth = i % 2 ? 0.0 : 3.25 * static_cast<double>(i);
    EXPECT_EQ(sample_gyro(m, nullptr, truth, i), truth);
  }
}

TEST(Gyro, DriftFreeCarrierAliasesToEpsilon) {
  // f = 19 * 1000 + 3 with the resonance on the carrier: a 3 Hz tone of 25.
  GyroSamplerModel m(1000.0, no_drift(), centred_at(19003.0, 0.4));
  signal::AttackWaveformSpec carrier(19003.0, 1.0);
  std::vector<double> v;
  for (std::int64_t i = 0; i < 2000; ++i) v.push_back(sample_gyro(m, &carrier, 0.0, i));
  const auto mags = oracle::dft_magnitudes(v);
  EXPECT_EQ(oracle::argmax_from(mags, 1), 6u);  // 3 Hz at 0.5 Hz per bin
  EXPECT_NEAR(mags[6], 25.0, 1e-6);
}

TEST(Gyro, HarmonicCarrierGivesConstantOffset) {
  const double phi0 = 1.1;
  GyroSamplerModel m(1000.0, no_drift(), centred_at(19000.0, phi0));
  signal::AttackWaveformSpec carrier(19000.0, 1.0);
  for (std::int64_t i = 0; i < 1000; ++i) {
    EXPECT_NEAR(sample_gyro(m, &carrier, 0.0, i), 25.0 * std::sin(phi0), 1e-9);
  }
}

TEST(Gyro, DriftedSamplesMatchContinuousOracle) {
  DriftConfig d;
  d.jitter_sigma_s = 1e-6;
  d.bias_walk_sigma_s = 1e-10;
  d.seed = 77;
  const double f = 19000.0 + 1.7;
  const double phi0 = 2.3;
  GyroSamplerModel m(1000.0, d, centred_at(19050.0, phi0));
  DriftProcess replay(d, 1000.0);
  signal::AttackWaveformSpec carrier(f, 0.8);
  const double a0 = lorentz(f, 19050.0, 0.8);
  long double sum = 0.0L;
  for (std::int64_t i = 0; i < 5000; ++i) {
    if (i > 0) sum += replay.next();
    const long double ti = static_cast<long double>(i) / 1000.0L + sum;
    const double want = oracle::aliased_sample(a0, 1.7, ti, 19, 1000.0, sum, phi0);
    ASSERT_NEAR(sample_gyro(m, &carrier, 0.0, i), want, 1e-9) << "sample " << i;
  }
}

TEST(Gyro, ConstantDriftShiftsDigitalFrequency) {
  DriftConfig d = no_drift();
  d.initial_bias_s = 2e-8;
  d.max_bias_s = 2e-8;
  GyroSamplerModel m(1000.0, d, centred_at(19000.0));
  signal::AttackWaveformSpec carrier(19000.0 + 2.0, 1.0);
  // Expected tone: eps + n F_S0^2 delta = 2 + 19 * 1e6 * 2e-8 = 2.38 Hz
  // (t_i shrinks too, but eps * t_i contributes at the 1e-5 level).
  std::vector<double> v;
  for (std::int64_t i = 0; i < 10000; ++i) v.push_back(sample_gyro(m, &carrier, 0.0, i));
  const auto mags = oracle::dft_magnitudes(v);
  const double bin = 1000.0 / 10000.0;
  EXPECT_NEAR(static_cast<double>(oracle::argmax_from(mags, 1)) * bin, 2.38, bin);
}

TEST(Gyro, PerturbationSuperposes) {
  DriftConfig d;
  d.seed = 5;
  GyroSamplerModel a(1000.0, d, TransductionModel{});
  GyroSamplerModel b(1000.0, d, TransductionModel{});
  signal::AttackWaveformSpec carrier(19000.6, 1.0);
  for (std::int64_t i = 0; i < 1000; ++i) {
    const double with = sample_gyro(a, &carrier, 7.5, i);
    const long double t = b.advance(i);
    EXPECT_EQ(with, 7.5 + b.perturbation(carrier, t));
  }
}

TEST(Gyro, SamplingTimesIncreaseAndSequenceIsEnforced) {
  DriftConfig d;
  d.jitter_sigma_s = 2e-5;
  GyroSamplerModel m(1000.0, d, TransductionModel{});
  long double prev = -1.0L;
  for (std::int64_t i = 0; i < 20000; ++i) {
    const long double t = m.advance(i);
    ASSERT_GT(t, prev);
    prev = t;
  }
  EXPECT_THROW(m.advance(5), SignalError);
  d.jitter_sigma_s = 1e-4;
  EXPECT_THROW(GyroSamplerModel(1000.0, d, TransductionModel{}), ConfigError);
}

TEST(Transduction, LorentzianAndCutoff) {
  TransductionModel t;
  EXPECT_DOUBLE_EQ(t.induced_amplitude(19000.0, 1.0), 25.0);
  EXPECT_DOUBLE_EQ(t.induced_amplitude(19200.0, 1.0), 12.5);
  EXPECT_DOUBLE_EQ(t.induced_amplitude(19000.0, 0.4), 10.0);
  EXPECT_EQ(t.induced_amplitude(17000.0, 1.0), 0.0);
  EXPECT_EQ(t.induced_amplitude(19000.0, 0.0), 0.0);
}

TEST(Controller, EquilibriumAndIntegration) {
  PlantConfig cfg;
  VictimState s;
  const auto same = step_controller(s, 0.0, 1e-3, cfg);
  EXPECT_EQ(same.heading, 0.0);
  EXPECT_EQ(same.motor_command, 0.0);
  for (int i = 0; i < 1000; ++i) s = step_controller(s, 10.0, 1e-3, cfg);
  EXPECT_NEAR(s.heading, 10.0, 1e-9);
  EXPECT_DOUBLE_EQ(s.motor_command, std::clamp(10.0 * s.heading / 200.0, -1.0, 1.0));
  EXPECT_THROW(step_controller(s, 1.0, 0.0, cfg), SignalError);
}

TEST(Controller, ZeroMeanOscillationFallsBack) {
  PlantConfig cfg;
  VictimState s;
  const double a = 25.0, f = 0.8, dt = 1e-3;
  double worst = 0.0;
  for (int i = 0; i < 5000; ++i) {  // 4 whole periods
    s = step_controller(s, a * std::sin(2.0 * oracle::kPi * f * i * dt), dt, cfg);
    worst = std::max(worst, std::abs(s.heading));
  }
  const double half_cycle = a / (oracle::kPi * f);
  EXPECT_LE(worst, half_cycle * 1.01);
  EXPECT_LT(std::abs(s.heading), 0.01 * half_cycle);
}

TEST(Motor, FirstOrderStepResponse) {
  PlantConfig cfg;
  VictimState s;
  EXPECT_EQ(step_motor(s, 1e-3, cfg).motor_speed, 0.0);
  s.motor_command = 1.0;
  const int steps = static_cast<int>(std::round(cfg.motor_time_constant / 1e-4));
  for (int i = 0; i < steps; ++i) s = step_motor(s, 1e-4, cfg);
  EXPECT_NEAR(s.motor_speed, (1.0 - std::exp(-1.0)) * cfg.max_speed, 0.02 * cfg.max_speed);
}

TEST(Motor, FastAlternationIsLowPassed) {
  PlantConfig cfg;
  VictimState s;
  double worst = 0.0;
  for (int i = 0; i < 2000; ++i) {
    s.motor_command = (i / 2) % 2 ? 1.0 : -1.0;  // 4 ms period vs 30 ms lag
    s = step_motor(s, 1e-3, cfg);
    worst = std::max(worst, std::abs(s.motor_speed));
  }
  EXPECT_LT(worst, 0.1 * cfg.max_speed);
}

TEST(Emanation, MotorPowerIsLinearInRpm) {
  EXPECT_NEAR(motor_power(1.0, 60.0), 2.0 * oracle::kPi, 1e-12);
  EXPECT_DOUBLE_EQ(motor_power(0.3, 120.0), 2.0 * motor_power(0.3, 60.0));
  EXPECT_DOUBLE_EQ(motor_power(0.3, -60.0), motor_power(0.3, 60.0));
}

TEST(Emanation, StationaryMotorIsNoiseOnly) {
  PlantConfig cfg;
  VictimState s;
  const auto c = emit_acoustics(s, 1.0, cfg, 3);
  double p = 0.0;
  for (double v : c.samples) p += v * v;
  EXPECT_NEAR(std::sqrt(p / static_cast<double>(c.size())), cfg.noise_floor, 0.02 * cfg.noise_floor);
}

TEST(Emanation, InBandPowerProportionalToMechanicalPower) {
  PlantConfig cfg;
  cfg.noise_floor = 0.0;
  for (double rpm = 10.0; rpm <= 200.0; rpm += 7.0) {
    VictimState s;
    s.motor_speed = rpm;
    const auto c = emit_acoustics(s, 0.5, cfg);
    double p = 0.0;
    for (double v : c.samples) p += v * v;
    p /= static_cast<double>(c.size());
    const double want = motor_power(cfg.torque, rpm) / cfg.emanation_power_ratio;
    EXPECT_NEAR(p / want, 1.0, 0.05) << "rpm " << rpm;
  }
}

TEST(Emanation, TonePlacementRisesWithSpeed) {
  PlantConfig cfg;
  EmanationSynth synth(cfg, 1);
  for (int k = 0; k < cfg.tone_count; ++k) {
    double prev = 0.0;
    for (double rpm = 0.0; rpm <= 200.0; rpm += 10.0) {
      const double f = synth.tone_frequency(k, rpm);
      EXPECT_GT(f, prev);
      EXPECT_GE(f, cfg.emanation_band.low_hz);
      EXPECT_LE(f, cfg.emanation_band.high_hz);
      prev = f;
    }
  }
}

TEST(Emanation, BandEnergyRisesMonotonicallyWithSpeed) {
  PlantConfig cfg;
  cfg.noise_floor = 0.0;
  attack::FeedbackConfig fb;
  double prev = -1.0;
  for (double rpm = 5.0; rpm <= 200.0; rpm += 2.5) {
    VictimState s;
    s.motor_speed = rpm;
    const auto series = attack::extract_feedback(emit_acoustics(s, 13000.0 / 44100.0, cfg), fb);
    ASSERT_GE(series.raw.size(), 3u);
    const double y = series.raw.back();
    EXPECT_GT(y, prev) << "rpm " << rpm;
    prev = y;
  }
}

TEST(Emanation, BlocksMustHoldWholeSamples) {
  PlantConfig cfg;
  EmanationSynth synth(cfg, 1);
  EXPECT_THROW((void)synth.emit(VictimState{}, 1e-5 / 3.0), SignalError);
}

TEST(Victim, StationaryWithoutAttack) {
  VictimConfig cfg;
  const auto run = run_victim(cfg, 4, signal::AttackWaveformSpec(19000.0, 0.0), 3.0);
  ASSERT_EQ(run.trace.size(), 3000u);
  for (const auto& r : run.trace) {
    ASSERT_EQ(r.speed, 0.0);
    ASSERT_EQ(r.heading, 0.0);
  }
  EXPECT_EQ(run.acoustic.size(), static_cast<std::size_t>(3.0 * 44100));
}

TEST(Victim, FixedCarrierOscillatesAroundZero) {
  VictimConfig cfg;
  const auto run = run_victim(cfg, 8, signal::AttackWaveformSpec(19000.8, 1.0), 12.0);
  double sum = 0.0, peak = 0.0;
  int sign_changes = 0;
  for (std::size_t i = 2000; i < run.trace.size(); ++i) {
    sum += run.trace[i].speed;
    peak = std::max(peak, std::abs(run.trace[i].speed));
    if (run.trace[i].speed * run.trace[i - 1].speed < 0.0) ++sign_changes;
  }
  const double mean = sum / static_cast<double>(run.trace.size() - 2000);
  EXPECT_GT(peak, 20.0);
  EXPECT_LT(std::abs(mean), 0.1 * peak);
  EXPECT_GE(sign_changes, 14);  // 0.8 Hz over 10 s
}

TEST(Victim, IdenticalSeedsGiveIdenticalTraces) {
  VictimConfig cfg;
  signal::AttackWaveformSpec carrier(19000.8, 1.0);
  const auto a = run_victim(cfg, 11, carrier, 2.0);
  const auto b = run_victim(cfg, 11, carrier, 2.0);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    ASSERT_EQ(a.trace[i].sensor_rate, b.trace[i].sensor_rate);
    ASSERT_EQ(a.trace[i].speed, b.trace[i].speed);
  }
  EXPECT_EQ(a.acoustic.samples, b.acoustic.samples);
  EXPECT_NE(run_victim(cfg, 12, carrier, 0.5).initial_phase, a.initial_phase);
}

TEST(Victim, InjectionCannotRewriteThePast) {
  VictimSimulator sim(VictimConfig{}, 1);
  (void)sim.advance_block();
  EXPECT_THROW(sim.set_injection(0.001, 19000.0, 1.0), InvariantError);
  EXPECT_NO_THROW(sim.set_injection(sim.time(), 19000.0, 1.0));
}

TEST(Victim, IncommensurateRatesRejected) {
  VictimConfig cfg;
  cfg.plant.emission_block_steps = 1;  // 44.1 samples per step
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = VictimConfig{};
  cfg.command_profile = {{1.0, 0.5}, {0.5, 0.2}};
  EXPECT_THROW(cfg.validate(), ConfigError);
}
