#pragma once

#include <fftw3.h>

#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "adloop/error.hpp"
#include "adloop/signal/types.hpp"

namespace adloop::signal {

enum class WindowKind { rectangular, hann };

inline WindowKind parse_window_kind(const std::string& name) {
  if (name == "rectangular") return WindowKind::rectangular;
  if (name == "hann") return WindowKind::hann;
  throw ConfigError("unknown window '" + name + "' (expected rectangular or hann)");
}

inline const char* to_string(WindowKind w) {
  return w == WindowKind::hann ? "hann" : "rectangular";
}

namespace detail {
// FFTW's planner is not re-entrant.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// Magnitude spectra of fixed-length frames (FFTW real-to-complex).
///
/// Magnitudes are a single-sided amplitude spectrum: interior bins are scaled
/// by 2/N and the DC and Nyquist bins by 1/N, so a unit-amplitude sinusoid at
/// a bin centre reads 1.0 in that bin under the rectangular window. Hann
/// frames are additionally divided by the window's coherent gain.
class SpectralAnalyzer {
 public:
  explicit SpectralAnalyzer(std::size_t frame_length = 4096,
                            WindowKind window = WindowKind::rectangular)
      : frame_length_(frame_length), window_kind_(window) {
    if (frame_length_ < 2 || frame_length_ % 2 != 0) {
      throw SignalError("frame length must be an even number >= 2");
    }
    in_.reset(fftw_alloc_real(frame_length_));
    out_.reset(fftw_alloc_complex(bins()));
    {
      std::lock_guard lock(detail::fftw_planner_mutex());
      plan_.reset(fftw_plan_dft_r2c_1d(static_cast<int>(frame_length_), in_.get(), out_.get(),
                                       FFTW_ESTIMATE));
    }
    if (!plan_) throw SignalError("FFTW failed to create a plan");
    window_.assign(frame_length_, 1.0);
    if (window_kind_ == WindowKind::hann) {
      double sum = 0.0;
      for (std::size_t i = 0; i < frame_length_; ++i) {
        window_[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                          static_cast<double>(frame_length_));
        sum += window_[i];
      }
      const double gain = sum / static_cast<double>(frame_length_);
      for (double& w : window_) w /= gain;
    }
  }

  SpectralAnalyzer(const SpectralAnalyzer&) = delete;
  SpectralAnalyzer& operator=(const SpectralAnalyzer&) = delete;
  SpectralAnalyzer(SpectralAnalyzer&&) noexcept = default;
  SpectralAnalyzer& operator=(SpectralAnalyzer&&) noexcept = default;

  [[nodiscard]] std::size_t frame_length() const noexcept { return frame_length_; }
  [[nodiscard]] std::size_t bins() const noexcept { return frame_length_ / 2 + 1; }
  [[nodiscard]] WindowKind window() const noexcept { return window_kind_; }

  [[nodiscard]] SpectralFrame analyze(const SampleChunk& window) {
    if (window.size() != frame_length_) {
      throw SignalError("spectral frame expects exactly " + std::to_string(frame_length_) +
                        " samples, got " + std::to_string(window.size()));
    }
    window.validate();
    for (std::size_t i = 0; i < frame_length_; ++i) in_.get()[i] = window.samples[i] * window_[i];
    fftw_execute(plan_.get());

    SpectralFrame frame;
    frame.bin_width = window.sample_rate / static_cast<double>(frame_length_);
    frame.frame_end_time = window.end_time();
    frame.magnitudes.resize(bins());
    const double n = static_cast<double>(frame_length_);
    for (std::size_t k = 0; k < bins(); ++k) {
      const double re = out_.get()[k][0];
      const double im = out_.get()[k][1];
      const double scale = (k == 0 || k == bins() - 1) ? 1.0 / n : 2.0 / n;
      frame.magnitudes[k] = std::hypot(re, im) * scale;
    }
    return frame;
  }

 private:
  struct RealDeleter {
    void operator()(double* p) const noexcept { fftw_free(p); }
  };
  struct ComplexDeleter {
    void operator()(fftw_complex* p) const noexcept { fftw_free(p); }
  };
  struct PlanDeleter {
    void operator()(fftw_plan p) const noexcept {
      std::lock_guard lock(detail::fftw_planner_mutex());
      fftw_destroy_plan(p);
    }
  };

  std::size_t frame_length_;
  WindowKind window_kind_;
  std::unique_ptr<double, RealDeleter> in_;
  std::unique_ptr<fftw_complex, ComplexDeleter> out_;
  std::unique_ptr<std::remove_pointer_t<fftw_plan>, PlanDeleter> plan_;
  std::vector<double> window_;
};

inline SpectralFrame spectral_frame(const SampleChunk& window, std::size_t frame_length = 4096,
                                    WindowKind kind = WindowKind::rectangular) {
  SpectralAnalyzer analyzer(frame_length, kind);
  return analyzer.analyze(window);
}

/// Sum of magnitudes over bins whose centre lies in [low_hz, high_hz].
inline double band_energy(const SpectralFrame& frame, const BandSpec& band) {
  if (frame.magnitudes.empty() || !(frame.bin_width > 0.0)) {
    throw SignalError("band_energy: empty spectral frame");
  }
  const double nyquist = frame.bin_frequency(frame.magnitudes.size() - 1);
  if (!(band.low_hz >= 0.0) || !(band.high_hz > band.low_hz) || band.high_hz > nyquist) {
    throw SignalError("band_energy: band lies outside the frame's frequency range");
  }
  const auto first = static_cast<std::size_t>(std::ceil(band.low_hz / frame.bin_width - 1e-9));
  const auto last = static_cast<std::size_t>(std::floor(band.high_hz / frame.bin_width + 1e-9));
  if (first > last || last >= frame.magnitudes.size()) {
    throw SignalError("band_energy: band [" + std::to_string(band.low_hz) + ", " +
                      std::to_string(band.high_hz) +
                      "] Hz contains no bin centre; band is narrower than one bin");
  }
  double y = 0.0;
  for (std::size_t k = first; k <= last; ++k) y += frame.magnitudes[k];
  return y;
}

/// Cuts a contiguous stream into back-to-back frames (hop = frame length).
class Framer {
 public:
  explicit Framer(std::size_t frame_length) : frame_length_(frame_length) {
    if (frame_length_ == 0) throw SignalError("frame length must be positive");
  }

  [[nodiscard]] std::vector<SampleChunk> push(const SampleChunk& chunk) {
    if (next_index_ && chunk.start_index != *next_index_) {
      throw SignalError("framer: chunk is not contiguous with the previous chunk");
    }
    if (!next_index_) buffer_start_ = chunk.start_index;
    next_index_ = chunk.end_index();
    sample_rate_ = chunk.sample_rate;

    std::vector<SampleChunk> frames;
    buffer_.insert(buffer_.end(), chunk.samples.begin(), chunk.samples.end());
    std::size_t offset = 0;
    while (buffer_.size() - offset >= frame_length_) {
      SampleChunk f;
      f.sample_rate = sample_rate_;
      f.start_index = buffer_start_;
      f.samples.assign(buffer_.begin() + static_cast<std::ptrdiff_t>(offset),
                       buffer_.begin() + static_cast<std::ptrdiff_t>(offset + frame_length_));
      frames.push_back(std::move(f));
      offset += frame_length_;
      buffer_start_ += static_cast<std::int64_t>(frame_length_);
    }
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(offset));
    return frames;
  }

  [[nodiscard]] std::size_t pending() const noexcept { return buffer_.size(); }

 private:
  std::size_t frame_length_;
  std::vector<double> buffer_;
  std::int64_t buffer_start_ = 0;
  std::optional<std::int64_t> next_index_;
  double sample_rate_ = 0.0;
};

}  // namespace adloop::signal
