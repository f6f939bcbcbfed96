#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "adloop/error.hpp"

namespace adloop::signal {

/// A contiguous run of samples from one stream. start_index counts samples
/// since the stream origin, so chunk k+1 starts where chunk k ended.
struct SampleChunk {
  std::vector<double> samples;
  double sample_rate = 0.0;
  std::int64_t start_index = 0;

  [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
  [[nodiscard]] std::int64_t end_index() const noexcept {
    return start_index + static_cast<std::int64_t>(samples.size());
  }
  [[nodiscard]] double start_time() const noexcept {
    return static_cast<double>(start_index) / sample_rate;
  }
  [[nodiscard]] double end_time() const noexcept {
    return static_cast<double>(end_index()) / sample_rate;
  }

  void validate() const {
    if (samples.empty()) throw SignalError("sample chunk is empty");
    if (!(sample_rate > 0.0)) throw SignalError("sample chunk has non-positive sample rate");
    for (double s : samples) {
      if (!std::isfinite(s)) throw SignalError("sample chunk contains a non-finite sample");
    }
  }
};

/// Pass band [low_hz, high_hz] plus the Butterworth prototype order.
struct BandSpec {
  double low_hz = 14600.0;
  double high_hz = 16900.0;
  int order = 4;

  void validate_for(double sample_rate) const {
    if (order <= 0) throw SignalError("band filter order must be positive");
    if (!(low_hz > 0.0) || !(high_hz > low_hz) || !(high_hz < sample_rate / 2.0)) {
      throw SignalError("band [" + std::to_string(low_hz) + ", " + std::to_string(high_hz) +
                        "] Hz must satisfy 0 < low < high < Nyquist (" +
                        std::to_string(sample_rate / 2.0) + " Hz)");
    }
  }
};

/// Single-sided amplitude spectrum of one analysis frame.
struct SpectralFrame {
  std::vector<double> magnitudes;  // frame_length/2 + 1 bins
  double bin_width = 0.0;          // Hz
  double frame_end_time = 0.0;     // s

  [[nodiscard]] double bin_frequency(std::size_t k) const noexcept {
    return static_cast<double>(k) * bin_width;
  }
};

/// Band-energy time series y[n] and its smoothed form y0[n]. Entry n covers
/// the window ending at frame_end_times[n].
struct FeedbackSeries {
  std::vector<double> raw;
  std::vector<double> smoothed;
  std::vector<double> frame_end_times;
  double chunk_duration = 0.0;

  [[nodiscard]] std::size_t size() const noexcept { return raw.size(); }
};

}  // namespace adloop::signal
