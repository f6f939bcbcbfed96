#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>

#include "adloop/error.hpp"
#include "adloop/signal/waveform.hpp"

namespace adloop::victim {

/// Drift of the gyro's sampling intervals, dT[i] = 1/F_S0 + delta[i].
///
/// delta[i] = j[i] - j[i-1] + b[i]: j is white timing jitter on the sampling
/// instants (it does not accumulate), b is a slowly wandering interval bias
/// (random walk, clamped to +-max_bias_s) whose running sum produces the
/// slow phase slip of the aliased tone.
struct DriftConfig {
  double jitter_sigma_s = 1e-6;
  double bias_walk_sigma_s = 1e-11;
  double initial_bias_s = 0.0;
  double max_bias_s = 1e-7;
  std::uint64_t seed = 1;
};

class DriftProcess {
 public:
  DriftProcess(const DriftConfig& cfg, double nominal_rate_hz)
      : cfg_(cfg), rng_(cfg.seed), bias_(cfg.initial_bias_s),
        limit_(0.5 / nominal_rate_hz * 0.999) {
    if (cfg.jitter_sigma_s < 0.0 || cfg.bias_walk_sigma_s < 0.0 || cfg.max_bias_s < 0.0) {
      throw ConfigError("drift sigmas and bias bound must be non-negative");
    }
    if (6.0 * 2.0 * cfg.jitter_sigma_s + cfg.max_bias_s >= limit_) {
      throw ConfigError("drift too large: sampling intervals could reach zero (need 12*jitter + "
                        "max_bias < 1/(2 F_S0))");
    }
    prev_jitter_ = draw_jitter();
  }

  /// delta[i] for i = 1, 2, ...
  double next() {
    const double j = draw_jitter();
    if (cfg_.bias_walk_sigma_s > 0.0) {
      bias_ += cfg_.bias_walk_sigma_s * unit_(rng_);
      bias_ = std::clamp(bias_, -cfg_.max_bias_s, cfg_.max_bias_s);
    }
    double d = j - prev_jitter_ + bias_;
    prev_jitter_ = j;
    return std::clamp(d, -limit_, limit_);
  }

  [[nodiscard]] double bias() const noexcept { return bias_; }

 private:
  double draw_jitter() {
    return cfg_.jitter_sigma_s > 0.0 ? cfg_.jitter_sigma_s * unit_(rng_) : 0.0;
  }

  DriftConfig cfg_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> unit_{0.0, 1.0};
  double bias_ = 0.0;
  double prev_jitter_ = 0.0;
  double limit_;
};

/// Carrier-to-sensor conversion: Lorentzian resonance in carrier frequency,
/// linear in carrier amplitude, zero outside +-cutoff_hz of the centre.
struct TransductionModel {
  double resonant_center_hz = 19000.0;
  double half_width_hz = 200.0;
  double cutoff_hz = 1000.0;
  double peak_gain_dps = 25.0;  // induced amplitude at resonance for A = 1
  double initial_phase = 0.0;   // phi_0, radians

  [[nodiscard]] double induced_amplitude(double carrier_hz, double carrier_amplitude) const {
    const double off = carrier_hz - resonant_center_hz;
    if (std::abs(off) > cutoff_hz || carrier_amplitude <= 0.0) return 0.0;
    const double x = off / half_width_hz;
    return peak_gain_dps * carrier_amplitude / (1.0 + x * x);
  }

  void validate() const {
    if (!(resonant_center_hz > 0.0) || !(half_width_hz > 0.0) || !(cutoff_hz > 0.0) ||
        !(peak_gain_dps >= 0.0)) {
      throw ConfigError("transduction: centre, half width and cutoff must be positive, gain >= 0");
    }
  }
};

/// Draws phi_0 uniformly in [0, 2 pi) from the run seed.
inline double draw_initial_phase(std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
  return u(rng);
}

/// Digitising MEMS gyro. Sample i is taken at t_i = sum_{j<=i} dT[j]
/// (t_0 = 0) and reads true_rate + A_0 sin(Phi(t_i) + phi_0), where Phi is
/// the carrier phase of the attack waveform. This is the drifted-sampling
/// form of V[i]: for a constant carrier f = n F_S0 + eps it equals
/// A_0 sin(2 pi eps t_i + 2 pi n F_S0 sum delta + phi_0).
class GyroSamplerModel {
 public:
  GyroSamplerModel(double nominal_rate_hz, const DriftConfig& drift,
                   const TransductionModel& transduction)
      : rate_(nominal_rate_hz), drift_(drift, nominal_rate_hz), transduction_(transduction) {
    if (!(nominal_rate_hz > 0.0)) throw ConfigError("gyro nominal rate must be positive");
    transduction_.validate();
  }

  [[nodiscard]] double nominal_rate() const noexcept { return rate_; }
  [[nodiscard]] const TransductionModel& transduction() const noexcept { return transduction_; }
  [[nodiscard]] std::int64_t next_index() const noexcept { return next_index_; }
  /// Sampling instant of the most recent sample.
  [[nodiscard]] long double last_sample_time() const noexcept { return time_; }
  [[nodiscard]] long double accumulated_drift() const noexcept { return drift_sum_; }

  /// Advances to sample `sample_index` (must be next_index()) and returns
  /// its instant t_i.
  long double advance(std::int64_t sample_index) {
    if (sample_index != next_index_) {
      throw SignalError("sample_gyro: sample index " + std::to_string(sample_index) +
                        " out of sequence (expected " + std::to_string(next_index_) + ")");
    }
    if (sample_index > 0) {
      const double d = drift_.next();
      drift_sum_ += d;
      time_ += 1.0L / static_cast<long double>(rate_) + static_cast<long double>(d);
    }
    ++next_index_;
    return time_;
  }

  /// Transduced perturbation at instant t for the given waveform.
  [[nodiscard]] double perturbation(const signal::AttackWaveformSpec& attack, long double t) const {
    const double a0 =
        transduction_.induced_amplitude(attack.frequency_at(t), attack.amplitude_at(t));
    if (a0 == 0.0) return 0.0;
    long double c = attack.cycles_at(t);
    c -= std::floor(c);
    return a0 * std::sin(static_cast<double>(2.0L * std::numbers::pi_v<long double> * c) +
                         transduction_.initial_phase);
  }

 private:
  double rate_;
  DriftProcess drift_;
  TransductionModel transduction_;
  std::int64_t next_index_ = 0;
  long double time_ = 0.0L;
  long double drift_sum_ = 0.0L;
};

/// One gyro reading. Without an attack the true rate is returned unchanged.
inline double sample_gyro(GyroSamplerModel& model, const signal::AttackWaveformSpec* attack,
                          double true_rate_dps, std::int64_t sample_index) {
  const long double t = model.advance(sample_index);
  if (attack == nullptr) return true_rate_dps;
  return true_rate_dps + model.perturbation(*attack, t);
}

}  // namespace adloop::victim
