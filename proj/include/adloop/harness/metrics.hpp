#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adloop/attack/loop.hpp"
#include "adloop/error.hpp"
#include "adloop/signal/spectrum.hpp"
#include "adloop/victim/victim.hpp"

namespace adloop::harness {

/// Pearson correlation; empty when either series is constant.
inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvariantError("pearson: size mismatch");
  const std::size_t n = x.size();
  if (n < 2) return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

struct DominantFrequency {
  double frequency = 0.0;
  double bin_width = 0.0;
};

/// Strongest non-DC bin of the mean-removed series.
inline DominantFrequency dominant_frequency(std::span<const double> x, double sample_rate) {
  if (x.size() < 4) throw InvariantError("dominant_frequency: need at least 4 samples");
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  signal::SampleChunk c;
  c.sample_rate = sample_rate;
  c.samples.reserve(x.size());
  for (double v : x) c.samples.push_back(v - mean);
  signal::SpectralAnalyzer an(x.size());
  const auto f = an.analyze(c);
  std::size_t best = 1;
  for (std::size_t k = 2; k < f.magnitudes.size(); ++k) {
    if (f.magnitudes[k] > f.magnitudes[best]) best = k;
  }
  return {f.bin_frequency(best), f.bin_width};
}

struct PhaseWindow {
  attack::PhaseGoal goal = attack::PhaseGoal::spin_up;
  double start = 0.0;
  double end = 0.0;
};

struct PhaseResult {
  PhaseWindow window;
  double conformance = 0.0;
  std::optional<bool> theta_monotone;  // up and down phases only
  std::size_t samples = 0;
};

struct MetricsOptions {
  int target_sign = 0;
  double trend_window = 1.25;
  double trend_tolerance = 10.0;
  double theta_tolerance = 0.5;
  std::optional<std::pair<double, double>> oscillation_window;
};

struct Metrics {
  std::optional<double> correlation;
  double directionality = 0.0;
  int target_sign = 0;
  double final_mean_speed = 0.0;
  double peak_speed = 0.0;
  double final_mean_fraction = 0.0;
  std::optional<DominantFrequency> dominant;
  double oscillation_mean = 0.0;
  double oscillation_peak = 0.0;
  std::vector<PhaseResult> phases;
  bool reliable = true;
  std::vector<std::string> notes;
};

namespace detail {

/// Centred moving average of `v` over `w` samples (shrinking at the edges).
inline std::vector<double> centred_mean(const std::vector<double>& v, std::size_t w) {
  std::vector<double> prefix(v.size() + 1, 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) prefix[i + 1] = prefix[i] + v[i];
  std::vector<double> out(v.size());
  const std::size_t h = w / 2;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::size_t a = i >= h ? i - h : 0;
    const std::size_t b = std::min(v.size(), i + h + 1);
    out[i] = (prefix[b] - prefix[a]) / static_cast<double>(b - a);
  }
  return out;
}

}  // namespace detail

/// Share of samples in each phase whose |speed| trend agrees with the goal,
/// and whether the cycle-averaged |heading| moves monotonically during
/// spin_up (non-decreasing) and slow_down (non-increasing) phases.
///
/// The trend at t is (S(t + w/2) - S(t - w/2)) / w where S is |speed|
/// averaged over w; w should be about one oscillation period so the ripple
/// cancels.
inline std::vector<PhaseResult> phase_conformance(const std::vector<victim::TraceRow>& trace,
                                                  const std::vector<PhaseWindow>& phases,
                                                  const MetricsOptions& opt) {
  std::vector<PhaseResult> out;
  if (trace.size() < 2) return out;
  const double dt = trace[1].time - trace[0].time;
  const auto w = static_cast<std::size_t>(std::max(2.0, std::round(opt.trend_window / dt)));
  std::vector<double> mag(trace.size()), theta(trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    mag[i] = std::abs(trace[i].speed);
    theta[i] = trace[i].heading;
  }
  const auto smooth = detail::centred_mean(mag, w);
  const std::size_t h = w / 2;

  for (const auto& ph : phases) {
    PhaseResult r;
    r.window = ph;
    std::size_t ok = 0;
    for (std::size_t i = h; i + h < trace.size(); ++i) {
      const double t = trace[i].time;
      if (t < ph.start || t >= ph.end) continue;
      const double slope = (smooth[i + h] - smooth[i - h]) / (2.0 * static_cast<double>(h) * dt);
      bool good = false;
      switch (ph.goal) {
        case attack::PhaseGoal::spin_up: good = slope >= -opt.trend_tolerance; break;
        case attack::PhaseGoal::hold: good = std::abs(slope) <= opt.trend_tolerance; break;
        case attack::PhaseGoal::slow_down: good = slope <= opt.trend_tolerance; break;
      }
      ok += good ? 1 : 0;
      ++r.samples;
    }
    r.conformance = r.samples ? static_cast<double>(ok) / static_cast<double>(r.samples) : 0.0;

    if (ph.goal != attack::PhaseGoal::hold) {
      std::vector<double> cycle_means;
      double sum = 0.0;
      std::size_t n = 0;
      double cycle_end = ph.start + opt.trend_window;
      for (const auto& row : trace) {
        if (row.time < ph.start) continue;
        if (row.time >= ph.end) break;
        if (row.time >= cycle_end) {
          if (n) cycle_means.push_back(std::abs(sum / static_cast<double>(n)));
          sum = 0.0;
          n = 0;
          cycle_end += opt.trend_window;
        }
        sum += row.heading;
        ++n;
      }
      bool mono = true;
      for (std::size_t i = 1; i < cycle_means.size(); ++i) {
        const double d = cycle_means[i] - cycle_means[i - 1];
        if (ph.goal == attack::PhaseGoal::spin_up ? d < -opt.theta_tolerance
                                                  : d > opt.theta_tolerance) {
          mono = false;
        }
      }
      r.theta_monotone = mono;
    }
    out.push_back(r);
  }
  return out;
}

/// Frame-aligned |rpm|: the mean over each feedback frame's window.
inline std::vector<double> frame_mean_speed(const std::vector<victim::TraceRow>& trace,
                                            const std::vector<double>& frame_end_times,
                                            double frame_duration) {
  std::vector<double> out;
  out.reserve(frame_end_times.size());
  std::size_t i = 0;
  const double dt = trace.size() > 1 ? trace[1].time - trace[0].time : 0.0;
  for (double te : frame_end_times) {
    const double ts = te - frame_duration;
    while (i < trace.size() && trace[i].time + dt <= ts) ++i;
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t j = i; j < trace.size() && trace[j].time + dt <= te + 1e-12; ++j) {
      s += std::abs(trace[j].speed);
      ++n;
    }
    out.push_back(n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

/// Procedure phases as recorded in the telemetry event column.
inline std::vector<PhaseWindow> phases_from_telemetry(const std::vector<attack::TelemetryRow>& rows,
                                                      double end_time) {
  std::vector<PhaseWindow> out;
  for (const auto& r : rows) {
    std::size_t pos = 0;
    while ((pos = r.event.find("phase:", pos)) != std::string::npos) {
      std::size_t stop = r.event.find(';', pos);
      const std::string goal = r.event.substr(pos + 6, stop == std::string::npos ? std::string::npos
                                                                                 : stop - pos - 6);
      if (!out.empty()) out.back().end = r.time;
      out.push_back({attack::parse_phase_goal(goal), r.time, end_time});
      pos += 6;
    }
  }
  return out;
}

inline Metrics compute_metrics(const std::vector<victim::TraceRow>& trace,
                               const std::vector<attack::TelemetryRow>& telemetry,
                               const MetricsOptions& opt, double frame_duration) {
  Metrics m;
  if (trace.empty()) throw InvariantError("compute_metrics: empty trace");
  const double dt = trace.size() > 1 ? trace[1].time - trace[0].time : 1e-3;
  const double t_end = trace.back().time + dt;
  if (t_end - trace.front().time < 2.0) {
    m.reliable = false;
    m.notes.emplace_back("trace shorter than 2 s; metrics unreliable");
  }

  std::vector<double> y0, times;
  for (const auto& r : telemetry) {
    if (r.time <= t_end + 1e-9) {
      y0.push_back(r.y_smoothed);
      times.push_back(r.time);
    }
  }
  const auto rpm = frame_mean_speed(trace, times, frame_duration);
  std::vector<double> a, b;
  for (std::size_t i = 0; i < rpm.size(); ++i) {
    if (std::isfinite(rpm[i])) {
      a.push_back(y0[i]);
      b.push_back(rpm[i]);
    }
  }
  m.correlation = pearson(a, b);
  if (!m.correlation) m.notes.emplace_back("correlation undefined (constant feedback or speed)");

  const double half = trace.front().time + (t_end - trace.front().time) / 2.0;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : trace) {
    m.peak_speed = std::max(m.peak_speed, std::abs(r.speed));
    if (r.time >= half) {
      sum += r.speed;
      ++n;
    }
  }
  m.final_mean_speed = n ? sum / static_cast<double>(n) : 0.0;
  m.target_sign = opt.target_sign != 0 ? opt.target_sign : (m.final_mean_speed >= 0.0 ? 1 : -1);
  std::size_t agree = 0;
  for (const auto& r : trace) {
    if (r.time >= half && r.speed * m.target_sign > 0.0) ++agree;
  }
  m.directionality = n ? static_cast<double>(agree) / static_cast<double>(n) : 0.0;
  m.final_mean_fraction = m.peak_speed > 0.0 ? std::abs(m.final_mean_speed) / m.peak_speed : 0.0;

  double w0 = trace.front().time, w1 = t_end;
  if (opt.oscillation_window) {
    w0 = opt.oscillation_window->first;
    w1 = opt.oscillation_window->second;
  }
  std::vector<double> seg;
  for (const auto& r : trace) {
    if (r.time >= w0 && r.time < w1) seg.push_back(r.speed);
  }
  if (seg.size() >= 4) {
    double s = 0.0, pk = 0.0;
    for (double v : seg) {
      s += v;
      pk = std::max(pk, std::abs(v));
    }
    m.oscillation_mean = s / static_cast<double>(seg.size());
    m.oscillation_peak = pk;
    if (pk > 0.0) m.dominant = dominant_frequency(seg, 1.0 / dt);
  }

  m.phases = phase_conformance(trace, phases_from_telemetry(telemetry, t_end), opt);
  return m;
}

}  // namespace adloop::harness
