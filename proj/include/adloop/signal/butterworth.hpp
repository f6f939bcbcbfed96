#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "adloop/error.hpp"
#include "adloop/signal/types.hpp"

namespace adloop::signal {

/// Normalised biquad: H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2).
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

/// Digital Butterworth band-pass of prototype order N as N second-order
/// sections (2N poles). Analog prototype -> band-pass transform on
/// pre-warped edges -> bilinear transform. Each section carries zeros at
/// z = +1 and z = -1 and is scaled to unit gain at the geometric band centre,
/// where the cascade's ideal response is exactly 1.
inline std::vector<Biquad> design_butterworth_bandpass(const BandSpec& band, double sample_rate) {
  band.validate_for(sample_rate);
  using cd = std::complex<double>;
  const double pi = std::numbers::pi;
  const double fs2 = 2.0 * sample_rate;
  const double w1 = fs2 * std::tan(pi * band.low_hz / sample_rate);
  const double w2 = fs2 * std::tan(pi * band.high_hz / sample_rate);
  const double bw = w2 - w1;
  const double w0 = std::sqrt(w1 * w2);
  const int n = band.order;

  // Conjugate pairs are represented by their upper-half-plane member. Very
  // wide bands yield real poles, which are paired off in order.
  std::vector<cd> digital_poles;
  std::vector<double> real_poles;
  for (int k = 0; k < n; ++k) {
    const cd p = std::polar(1.0, pi * (2.0 * k + n + 1) / (2.0 * n));
    const cd half = p * bw / 2.0;
    const cd root = std::sqrt(half * half - w0 * w0);
    for (const cd s : {half + root, half - root}) {
      const cd z = (fs2 + s) / (fs2 - s);
      if (std::abs(z.imag()) < 1e-14) {
        real_poles.push_back(z.real());
      } else if (z.imag() > 0.0) {
        digital_poles.push_back(z);
      }
    }
  }
  if (real_poles.size() % 2 != 0 ||
      digital_poles.size() + real_poles.size() / 2 != static_cast<std::size_t>(n)) {
    throw SignalError("butterworth design produced an unexpected pole set");
  }

  const double wc = 2.0 * std::atan(w0 / fs2);  // digital centre, rad/sample
  const cd zc = std::polar(1.0, wc);
  std::vector<Biquad> sections;
  sections.reserve(n);
  auto add_section = [&](double a1, double a2) {
    Biquad q;
    q.a1 = a1;
    q.a2 = a2;
    const cd zi = 1.0 / zc;
    const cd num = 1.0 - zi * zi;
    const cd den = 1.0 + q.a1 * zi + q.a2 * zi * zi;
    const double g = 1.0 / std::abs(num / den);
    q.b0 = g;
    q.b1 = 0.0;
    q.b2 = -g;
    sections.push_back(q);
  };
  for (const cd& p : digital_poles) add_section(-2.0 * p.real(), std::norm(p));
  for (std::size_t i = 0; i + 1 < real_poles.size(); i += 2) {
    add_section(-(real_poles[i] + real_poles[i + 1]), real_poles[i] * real_poles[i + 1]);
  }
  return sections;
}

/// Frequency response of a section cascade at `freq_hz`.
inline std::complex<double> sos_response(std::span<const Biquad> sections, double freq_hz,
                                         double sample_rate) {
  const std::complex<double> zi = std::polar(1.0, -2.0 * std::numbers::pi * freq_hz / sample_rate);
  std::complex<double> h = 1.0;
  for (const Biquad& q : sections) {
    h *= (q.b0 + q.b1 * zi + q.b2 * zi * zi) / (1.0 + q.a1 * zi + q.a2 * zi * zi);
  }
  return h;
}

/// Cascade of direct-form-II-transposed biquads. State persists between
/// process() calls.
class SosFilter {
 public:
  SosFilter() = default;
  explicit SosFilter(std::vector<Biquad> sections)
      : sections_(std::move(sections)), state_(sections_.size()) {}

  double process(double x) noexcept {
    for (std::size_t i = 0; i < sections_.size(); ++i) {
      const Biquad& q = sections_[i];
      State& s = state_[i];
      const double y = q.b0 * x + s.z1;
      s.z1 = q.b1 * x - q.a1 * y + s.z2;
      s.z2 = q.b2 * x - q.a2 * y;
      x = y;
    }
    return x;
  }

  void process(std::span<double> samples) noexcept {
    for (double& v : samples) v = process(v);
  }

  void reset() noexcept {
    for (auto& s : state_) s = State{};
  }

  [[nodiscard]] const std::vector<Biquad>& sections() const noexcept { return sections_; }

 private:
  struct State {
    double z1 = 0.0, z2 = 0.0;
  };
  std::vector<Biquad> sections_;
  std::vector<State> state_;
};

/// Streaming band-pass for one stream. Rejects chunks that are not contiguous
/// with the previous one or arrive at a different rate.
class BandpassFilter {
 public:
  BandpassFilter(const BandSpec& band, double sample_rate)
      : band_(band), sample_rate_(sample_rate),
        filter_(design_butterworth_bandpass(band, sample_rate)) {}

  [[nodiscard]] SampleChunk process(const SampleChunk& chunk) {
    chunk.validate();
    if (chunk.sample_rate != sample_rate_) {
      throw SignalError("bandpass: chunk sample rate differs from filter design rate");
    }
    if (next_index_ && chunk.start_index != *next_index_) {
      throw SignalError("bandpass: chunk is not contiguous with the previous chunk of this stream");
    }
    SampleChunk out = chunk;
    filter_.process(out.samples);
    next_index_ = chunk.end_index();
    return out;
  }

  [[nodiscard]] const BandSpec& band() const noexcept { return band_; }
  [[nodiscard]] const SosFilter& filter() const noexcept { return filter_; }

 private:
  BandSpec band_;
  double sample_rate_;
  SosFilter filter_;
  std::optional<std::int64_t> next_index_;
};

/// One-shot band-pass of a single chunk from rest.
inline SampleChunk bandpass(const SampleChunk& chunk, const BandSpec& band) {
  BandpassFilter f(band, chunk.sample_rate);
  return f.process(chunk);
}

}  // namespace adloop::signal
