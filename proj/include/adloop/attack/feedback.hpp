#pragma once

#include <vector>

#include "adloop/signal/butterworth.hpp"
#include "adloop/signal/smoothing.hpp"
#include "adloop/signal/spectrum.hpp"
#include "adloop/signal/types.hpp"

namespace adloop::attack {

struct FeedbackConfig {
  signal::BandSpec band{};
  std::size_t frame_length = 4096;
  std::vector<double> weights = signal::default_wma_weights();
  signal::WindowKind window = signal::WindowKind::rectangular;
};

/// Age of the signal a feedback sample describes, relative to its time
/// stamp: half a frame plus the weighted-average lag of the smoother.
inline double feedback_lag(const FeedbackConfig& cfg, double sample_rate) {
  const double tc = static_cast<double>(cfg.frame_length) / sample_rate;
  double wsum = 0.0, lag = 0.0;
  for (std::size_t i = 0; i < cfg.weights.size(); ++i) {
    wsum += cfg.weights[i];
    lag += static_cast<double>(i) * cfg.weights[i];
  }
  return tc / 2.0 + (wsum > 0.0 ? tc * lag / wsum : 0.0);
}

struct FeedbackSample {
  double time = 0.0;  // end of the analysed window
  double raw = 0.0;
  double smoothed = 0.0;
};

/// Streaming feedback path: band-pass -> frame -> band energy -> WMA.
/// One sample per frame_length input samples; a sample only exists once
/// its whole window has been received.
class FeedbackExtractor {
 public:
  FeedbackExtractor(const FeedbackConfig& cfg, double sample_rate)
      : cfg_(cfg), filter_(cfg.band, sample_rate), framer_(cfg.frame_length),
        analyzer_(cfg.frame_length, cfg.window), wma_(cfg.weights) {
    series_.chunk_duration = static_cast<double>(cfg.frame_length) / sample_rate;
  }

  std::vector<FeedbackSample> push(const signal::SampleChunk& chunk) {
    std::vector<FeedbackSample> out;
    for (const auto& frame : framer_.push(filter_.process(chunk))) {
      const signal::SpectralFrame spec = analyzer_.analyze(frame);
      FeedbackSample s;
      s.time = spec.frame_end_time;
      s.raw = signal::band_energy(spec, cfg_.band);
      s.smoothed = wma_.push(s.raw);
      series_.raw.push_back(s.raw);
      series_.smoothed.push_back(s.smoothed);
      series_.frame_end_times.push_back(s.time);
      if (keep_spectra_) spectra_.push_back(band_slice(spec));
      out.push_back(s);
    }
    return out;
  }

  /// Keeps the in-band magnitudes of every frame (spectrogram data).
  void keep_spectra(bool on) noexcept { keep_spectra_ = on; }

  struct BandSpectrum {
    double time = 0.0;
    double first_bin_hz = 0.0;
    double bin_width = 0.0;
    std::vector<double> magnitudes;
  };

  [[nodiscard]] const signal::FeedbackSeries& series() const noexcept { return series_; }
  [[nodiscard]] const std::vector<BandSpectrum>& spectra() const noexcept { return spectra_; }
  [[nodiscard]] double chunk_duration() const noexcept { return series_.chunk_duration; }
  [[nodiscard]] const FeedbackConfig& config() const noexcept { return cfg_; }

 private:
  BandSpectrum band_slice(const signal::SpectralFrame& spec) const {
    BandSpectrum b;
    b.time = spec.frame_end_time;
    b.bin_width = spec.bin_width;
    for (std::size_t k = 0; k < spec.magnitudes.size(); ++k) {
      const double f = spec.bin_frequency(k);
      if (f >= cfg_.band.low_hz && f <= cfg_.band.high_hz) {
        if (b.magnitudes.empty()) b.first_bin_hz = f;
        b.magnitudes.push_back(spec.magnitudes[k]);
      }
    }
    return b;
  }

  FeedbackConfig cfg_;
  signal::BandpassFilter filter_;
  signal::Framer framer_;
  signal::SpectralAnalyzer analyzer_;
  signal::WeightedMovingAverage wma_;
  signal::FeedbackSeries series_;
  bool keep_spectra_ = false;
  std::vector<BandSpectrum> spectra_;
};

/// Offline form over a complete recording.
inline signal::FeedbackSeries extract_feedback(const signal::SampleChunk& stream,
                                               const FeedbackConfig& cfg) {
  FeedbackExtractor ex(cfg, stream.sample_rate);
  ex.push(stream);
  return ex.series();
}

}  // namespace adloop::attack
