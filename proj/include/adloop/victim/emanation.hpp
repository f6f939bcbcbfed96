#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "adloop/error.hpp"
#include "adloop/signal/types.hpp"
#include "adloop/victim/plant.hpp"

namespace adloop::victim {

/// Motor sound: white background noise plus a stack of tones inside the
/// emanation band whose total power is P_s = P / alpha_p.
///
/// The band is split into tone_count equal slots and tone k rests on the
/// tone grid near the centre of its slot. With u = |rpm| / max_speed the
/// tone sits s = u * tone_shift_bins + k / tone_count grid steps above its
/// rest bin. It is spread over the grid components within tone_width_bins
/// of that position with amplitudes cos(pi d / 2W) / sqrt(W), d the
/// distance and W the width; the squares of these sum to one for any
/// position, so the tone's power does not depend on where it sits. The
/// per-tone stagger of 1 / tone_count puts the tones at different
/// sub-grid offsets, which keeps the summed bin magnitude (the band energy
/// of an on-grid frame) within about half a percent of constant as the
/// stack moves.
///
/// Each component keeps a phase tied to absolute sample time, and tone
/// amplitude and position are interpolated linearly across a block, so
/// the stream has no discontinuities when the speed changes.
class EmanationSynth {
 public:
  EmanationSynth(const PlantConfig& cfg, std::uint64_t seed)
      : cfg_(cfg), rng_(seed),
        amplitudes_(static_cast<std::size_t>(cfg.tone_count), 0.0) {
    cfg_.validate();
    double total = 0.0;
    for (int k = 0; k < cfg_.tone_count; ++k) {
      weights_.push_back(std::pow(static_cast<double>(k + 1), -cfg_.tone_weight_exponent));
      total += weights_.back();
    }
    for (double& w : weights_) w /= total;
  }

  /// Acoustic power implied by a motor state.
  [[nodiscard]] double acoustic_power(const VictimState& s) const {
    return motor_power(cfg_.torque, s.motor_speed) / cfg_.emanation_power_ratio;
  }

  /// Grid index of tone k at rest.
  [[nodiscard]] double tone_base_bin(int k) const {
    const double slot = (cfg_.emanation_band.high_hz - cfg_.emanation_band.low_hz) /
                        static_cast<double>(cfg_.tone_count);
    return std::round((cfg_.emanation_band.low_hz + slot * (k + 0.5)) / cfg_.tone_grid_hz);
  }

  /// Climb in grid steps at a given speed.
  [[nodiscard]] double tone_shift(double rpm) const {
    return std::min(std::abs(rpm) / cfg_.max_speed, 1.0) * cfg_.tone_shift_bins;
  }

  /// Nominal centre frequency of tone k.
  [[nodiscard]] double tone_frequency(int k, double rpm) const {
    return (tone_base_bin(k) + tone_shift(rpm) + static_cast<double>(k) / cfg_.tone_count) *
           cfg_.tone_grid_hz;
  }

  /// Synthesises the next dt seconds of sound for `state`.
  [[nodiscard]] signal::SampleChunk emit(const VictimState& state, double dt) {
    const double exact = dt * cfg_.acoustic_rate;
    const auto n = static_cast<std::size_t>(std::llround(exact));
    if (n == 0 || std::abs(exact - static_cast<double>(n)) > 1e-6) {
      throw SignalError("emit_acoustics: dt must span a whole number of acoustic samples");
    }
    signal::SampleChunk out;
    out.sample_rate = cfg_.acoustic_rate;
    out.start_index = next_index_;
    out.samples.assign(n, 0.0);

    if (cfg_.noise_floor > 0.0) {
      for (double& v : out.samples) v = cfg_.noise_floor * noise_(rng_);
    }
    const double ps = acoustic_power(state);
    const double shift_end = tone_shift(state.motor_speed);
    const long double rate = cfg_.acoustic_rate;
    const long double grid = cfg_.tone_grid_hz;
    const double width = static_cast<double>(cfg_.tone_width_bins);
    const double norm = 1.0 / std::sqrt(width);
    for (int k = 0; k < cfg_.tone_count; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      const double target = std::sqrt(2.0 * weights_[kk] * ps);
      const double start = amplitudes_[kk];
      const double base = tone_base_bin(k);
      const double stagger = static_cast<double>(k) / static_cast<double>(cfg_.tone_count);
      if (target == 0.0 && start == 0.0) continue;
      for (std::size_t i = 0; i < n; ++i) {
        const double w = static_cast<double>(i + 1) / static_cast<double>(n);
        const double a = start + (target - start) * w;
        const double pos = shift_ + (shift_end - shift_) * w + stagger;
        const long double t = static_cast<long double>(next_index_ + static_cast<std::int64_t>(i)) / rate;
        for (double m = std::floor(pos - width) + 1.0; m < pos + width; m += 1.0) {
          const double h = norm * std::cos(std::numbers::pi * (m - pos) / (2.0 * width));
          out.samples[i] += a * h * component(base + m, k, t, grid);
        }
      }
      amplitudes_[kk] = target;
    }
    shift_ = shift_end;
    next_index_ += static_cast<std::int64_t>(n);
    return out;
  }

  /// Starts the tones at the steady amplitude for `state` instead of silence.
  void prime(const VictimState& state) {
    const double ps = acoustic_power(state);
    for (std::size_t k = 0; k < amplitudes_.size(); ++k) {
      amplitudes_[k] = std::sqrt(2.0 * weights_[k] * ps);
    }
    shift_ = tone_shift(state.motor_speed);
  }

  [[nodiscard]] std::int64_t next_index() const noexcept { return next_index_; }

 private:
  // Unit sinusoid on grid index m. The per-tone offset keeps the stack
  // from starting in phase.
  [[nodiscard]] static double component(double m, int k, long double t, long double grid) {
    long double c = static_cast<long double>(m) * grid * t + 0.1L * static_cast<long double>(k);
    c -= std::floor(c);
    return std::sin(static_cast<double>(2.0L * std::numbers::pi_v<long double> * c));
  }

  PlantConfig cfg_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> noise_{0.0, 1.0};
  std::vector<double> weights_;
  std::vector<double> amplitudes_;
  double shift_ = 0.0;
  std::int64_t next_index_ = 0;
};

/// One block from a fresh synthesiser already settled at `state`.
inline signal::SampleChunk emit_acoustics(const VictimState& state, double dt,
                                          const PlantConfig& cfg, std::uint64_t seed = 0) {
  EmanationSynth synth(cfg, seed);
  synth.prime(state);
  return synth.emit(state, dt);
}

}  // namespace adloop::victim
