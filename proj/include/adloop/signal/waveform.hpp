#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "adloop/error.hpp"
#include "adloop/signal/types.hpp"

namespace adloop::signal {

/// One change point of the injected carrier. Frequency and amplitude hold
/// from `time` until the next breakpoint.
struct WaveformBreakpoint {
  double time = 0.0;
  double frequency_hz = 0.0;
  double amplitude = 0.0;
};

/// Piecewise-constant frequency/amplitude program of the attack carrier
/// m(t) = A(t) sin(2 pi int_0^t f + phi_m).
///
/// The carrier phase is integrated segment by segment, so changing the
/// frequency never resets the phase. Phase is kept in cycles (long double,
/// reduced mod 1 at every breakpoint) so a 19 kHz carrier stays accurate to
/// well below a nanoradian over minutes of simulated time.
class AttackWaveformSpec {
 public:
  AttackWaveformSpec() : AttackWaveformSpec(1000.0, 0.0) {}

  AttackWaveformSpec(double frequency_hz, double amplitude, double initial_phase = 0.0)
      : initial_phase_(initial_phase) {
    check_values(frequency_hz, amplitude);
    segments_.push_back({0.0L, frequency_hz, amplitude, 0.0L});
  }

  /// Builds a program from explicit breakpoints. The first breakpoint's
  /// values also apply before its time.
  static AttackWaveformSpec from_breakpoints(const std::vector<WaveformBreakpoint>& points,
                                             double initial_phase = 0.0) {
    if (points.empty()) throw SignalError("waveform program needs at least one breakpoint");
    AttackWaveformSpec spec(points.front().frequency_hz, points.front().amplitude, initial_phase);
    spec.segments_.front().start = points.front().time;
    for (std::size_t i = 1; i < points.size(); ++i) {
      if (!(points[i].time > points[i - 1].time)) {
        throw SignalError("waveform breakpoints must be strictly increasing in time (breakpoint " +
                          std::to_string(i) + " at " + std::to_string(points[i].time) +
                          " s follows " + std::to_string(points[i - 1].time) + " s)");
      }
      spec.append(points[i].time, points[i].frequency_hz, points[i].amplitude);
    }
    return spec;
  }

  /// Changes frequency and/or amplitude from `time` on. A time equal to the
  /// last breakpoint replaces that breakpoint; earlier times are rejected.
  void set(double time, std::optional<double> frequency_hz, std::optional<double> amplitude) {
    const Segment& last = segments_.back();
    append(time, frequency_hz.value_or(last.frequency), amplitude.value_or(last.amplitude));
  }

  [[nodiscard]] double initial_phase() const noexcept { return initial_phase_; }
  [[nodiscard]] std::size_t breakpoint_count() const noexcept { return segments_.size(); }
  [[nodiscard]] double last_breakpoint_time() const noexcept {
    return static_cast<double>(segments_.back().start);
  }

  [[nodiscard]] std::vector<WaveformBreakpoint> breakpoints() const {
    std::vector<WaveformBreakpoint> out;
    out.reserve(segments_.size());
    for (const auto& s : segments_) {
      out.push_back({static_cast<double>(s.start), s.frequency, s.amplitude});
    }
    return out;
  }

  [[nodiscard]] double frequency_at(long double t) const { return segment_at(t).frequency; }
  [[nodiscard]] double amplitude_at(long double t) const { return segment_at(t).amplitude; }

  /// Carrier phase in cycles, modulo 1 offsets, excluding initial_phase.
  [[nodiscard]] long double cycles_at(long double t) const {
    const Segment& s = segment_at(t);
    return s.cycles + static_cast<long double>(s.frequency) * (t - s.start);
  }

  /// Carrier phase in radians in [0, 2 pi), including initial_phase.
  [[nodiscard]] double phase_at(long double t) const {
    long double c = cycles_at(t);
    c -= std::floor(c);
    double ph = static_cast<double>(2.0L * std::numbers::pi_v<long double> * c) + initial_phase_;
    ph = std::fmod(ph, 2.0 * std::numbers::pi);
    return ph < 0.0 ? ph + 2.0 * std::numbers::pi : ph;
  }

  [[nodiscard]] double value_at(long double t) const {
    const Segment& s = segment_at(t);
    if (s.amplitude == 0.0) return 0.0;
    long double c = s.cycles + static_cast<long double>(s.frequency) * (t - s.start);
    c -= std::floor(c);
    return s.amplitude *
           std::sin(static_cast<double>(2.0L * std::numbers::pi_v<long double> * c) + initial_phase_);
  }

 private:
  struct Segment {
    long double start;
    double frequency;
    double amplitude;
    long double cycles;  // carrier cycles at `start`, reduced mod 1
  };

  static void check_values(double frequency_hz, double amplitude) {
    if (!(frequency_hz > 0.0) || !std::isfinite(frequency_hz)) {
      throw SignalError("waveform frequency must be positive and finite");
    }
    if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) {
      throw SignalError("waveform amplitude must be non-negative and finite");
    }
  }

  void append(double time, double frequency_hz, double amplitude) {
    check_values(frequency_hz, amplitude);
    Segment& last = segments_.back();
    const long double t = time;
    if (t < last.start) {
      throw SignalError("waveform breakpoint at " + std::to_string(time) +
                        " s precedes the last breakpoint at " +
                        std::to_string(static_cast<double>(last.start)) + " s");
    }
    if (t == last.start) {
      last.frequency = frequency_hz;
      last.amplitude = amplitude;
      return;
    }
    long double c = last.cycles + static_cast<long double>(last.frequency) * (t - last.start);
    c -= std::floor(c);
    segments_.push_back({t, frequency_hz, amplitude, c});
  }

  [[nodiscard]] const Segment& segment_at(long double t) const {
    auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                               [](long double v, const Segment& s) { return v < s.start; });
    if (it == segments_.begin()) return segments_.front();
    return *std::prev(it);
  }

  std::vector<Segment> segments_;
  double initial_phase_ = 0.0;
};

/// Samples the carrier at (start_index + k) / sample_rate for k < length.
inline SampleChunk synthesize_waveform(const AttackWaveformSpec& spec, double sample_rate,
                                       std::int64_t start_index, std::size_t length) {
  if (length == 0) throw SignalError("synthesize_waveform: length must be positive");
  if (!(sample_rate > 0.0)) throw SignalError("synthesize_waveform: sample rate must be positive");
  SampleChunk out;
  out.sample_rate = sample_rate;
  out.start_index = start_index;
  out.samples.resize(length);
  const long double rate = sample_rate;
  for (std::size_t k = 0; k < length; ++k) {
    const long double t = static_cast<long double>(start_index + static_cast<std::int64_t>(k)) / rate;
    out.samples[k] = spec.value_at(t);
  }
  return out;
}

}  // namespace adloop::signal
