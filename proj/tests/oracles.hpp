#pragma once

// Reference computations written directly from the defining formulas. They
// share no code with the library beyond plain value types.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <vector>

namespace oracle {

constexpr double kPi = std::numbers::pi;

/// Naive single-sided amplitude DFT, same scaling as the analyzer:
/// 2/N for interior bins, 1/N at DC and Nyquist.
inline std::vector<double> dft_magnitudes(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> cosv(n), sinv(n);
  for (std::size_t i = 0; i < n; ++i) {
    cosv[i] = std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n));
    sinv[i] = std::sin(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n));
  }
  std::vector<double> out(n / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    double re = 0.0, im = 0.0;
    std::size_t idx = 0;
    for (std::size_t i = 0; i < n; ++i) {
      re += x[i] * cosv[idx];
      im -= x[i] * sinv[idx];
      idx += k;
      if (idx >= n) idx -= n;
    }
    const double scale = (k == 0 || (n % 2 == 0 && k == n / 2)) ? 1.0 : 2.0;
    out[k] = scale * std::hypot(re, im) / static_cast<double>(n);
  }
  return out;
}

inline std::size_t argmax_from(const std::vector<double>& v, std::size_t first) {
  return static_cast<std::size_t>(std::max_element(v.begin() + static_cast<std::ptrdiff_t>(first), v.end()) -
                                  v.begin());
}

/// |H| of a bilinear-transformed Butterworth band-pass with pre-warped
/// edges: 1 / sqrt(1 + ((W^2 - W1 W2) / (W (W2 - W1)))^(2N)), W = 2 fs tan(pi f / fs).
inline double butterworth_bandpass_gain(double f, double low, double high, int order, double fs) {
  const double w = 2.0 * fs * std::tan(kPi * f / fs);
  const double w1 = 2.0 * fs * std::tan(kPi * low / fs);
  const double w2 = 2.0 * fs * std::tan(kPi * high / fs);
  const double x = (w * w - w1 * w2) / (w * (w2 - w1));
  return 1.0 / std::sqrt(1.0 + std::pow(x * x, order));
}

/// Per-sample carrier phase accumulator. Breakpoint times and frequencies
/// define a piecewise-constant f(t); phase(t) = 2 pi int_0^t f, tracked in
/// cycles and reduced mod 1.
class PhaseAccumulator {
 public:
  struct Point {
    double time;
    double freq;
  };

  explicit PhaseAccumulator(std::vector<Point> points) : pts_(std::move(points)) {}

  /// Phase in radians in [0, 2 pi) at t; calls must have non-decreasing t.
  double advance_to(long double t) {
    while (t > now_) {
      const long double seg_end =
          next_ < pts_.size() ? std::min<long double>(t, pts_[next_].time) : t;
      cycles_ += static_cast<long double>(freq()) * (seg_end - now_);
      cycles_ -= std::floor(cycles_);
      now_ = seg_end;
      if (next_ < pts_.size() && now_ >= pts_[next_].time) ++next_;
    }
    return static_cast<double>(2.0L * std::numbers::pi_v<long double> * cycles_);
  }

 private:
  double freq() const { return pts_[next_ == 0 ? 0 : next_ - 1].freq; }

  std::vector<Point> pts_;
  std::size_t next_ = 1;
  long double now_ = 0.0L;
  long double cycles_ = 0.0L;
};

/// Falling crossings of a fixed-fraction threshold of the running peak, as
/// the switching rule defines them: peak K restarts at each crossing and
/// decays by `decay` per sample, a crossing needs a rise since the last one.
inline std::vector<std::size_t> falling_threshold_crossings(const std::vector<double>& y,
                                                            double alpha, double decay) {
  std::vector<std::size_t> out;
  if (y.empty()) return out;
  double k = y[0];
  double th = alpha * k;
  bool armed = false;
  for (std::size_t i = 1; i < y.size(); ++i) {
    k = std::max(y[i], k * (1.0 - decay));
    if (y[i] > y[i - 1]) armed = true;
    const double th_prev = th;
    th = alpha * k;
    if (armed && y[i - 1] >= th_prev && y[i] < th_prev) {
      out.push_back(i);
      armed = false;
      k = y[i];
      th = alpha * k;
    }
  }
  return out;
}

/// Aliased perturbation in its closed form for carrier f = n F + eps and
/// sampling instants t_i = i / F + S_i (S_i = accumulated drift):
/// A0 sin(2 pi eps t_i + 2 pi n F S_i + phi0).
inline double aliased_sample(double a0, long double eps, long double t_i, int n, double f_s0,
                             long double drift_sum, double phi0) {
  const long double c = eps * t_i +
                        static_cast<long double>(n) * f_s0 * drift_sum;
  const long double frac = c - std::floor(c);
  return a0 * std::sin(static_cast<double>(2.0L * std::numbers::pi_v<long double> * frac) + phi0);
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

/// Step sizes of successive rounds: s' = max(gamma s, floor), until the floor.
inline std::vector<double> step_sequence(double initial, double gamma, double floor_step) {
  std::vector<double> s{initial};
  while (s.back() > floor_step) s.push_back(std::max(gamma * s.back(), floor_step));
  return s;
}

}  // namespace oracle
