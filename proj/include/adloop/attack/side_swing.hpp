#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adloop/attack/commands.hpp"
#include "adloop/attack/feedback.hpp"
#include "adloop/error.hpp"

namespace adloop::attack {

struct SideSwingConfig {
  std::size_t window_N = 100;
  double high_amplitude = 1.0;
  double low_amplitude = 0.2;
  double loop_delay = 4096.0 / 44100.0;  // delta_loop, s
  int probe_cycles = 3;
  double probe_margin = 0.1;      // fractional fall in feedback that counts as adverse
  double sync_gain = 0.3;         // reference-time correction per accepted crossing
  double period_gain = 0.05;      // period correction per accepted crossing
  double expected_period = 0.0;   // attacker's nominal 1/|eps|; 0 keeps the raw estimate
  double ramp_time = 6.0;         // s for the asymmetry to go between 0 and 1
  double hysteresis = 0.1;        // crossing hysteresis, fraction of the window range
  double feedback_lag = 0.0;      // s the feedback trails the sound; < 0 derives it in the loop

  void validate() const {
    if (window_N < 10) throw ConfigError("side_swing.window_N must be at least 10");
    if (!(high_amplitude > low_amplitude) || low_amplitude < 0.0) {
      throw ConfigError("side_swing: need high_amplitude > low_amplitude >= 0");
    }
    if (loop_delay < 0.0) throw ConfigError("side_swing.loop_delay must be non-negative");
    if (probe_cycles < 0) throw ConfigError("side_swing.probe_cycles must be non-negative");
    if (probe_margin < 0.0 || probe_margin >= 1.0) {
      throw ConfigError("side_swing.probe_margin must lie in [0, 1)");
    }
    if (sync_gain < 0.0 || sync_gain > 1.0 || period_gain < 0.0 || period_gain > 1.0) {
      throw ConfigError("side_swing: sync_gain and period_gain must lie in [0, 1]");
    }
    if (expected_period < 0.0) throw ConfigError("side_swing.expected_period must be >= 0");
    if (!(ramp_time > 0.0)) throw ConfigError("side_swing.ramp_time must be positive");
    if (hysteresis < 0.0 || hysteresis >= 0.5) {
      throw ConfigError("side_swing.hysteresis must lie in [0, 0.5)");
    }
  }
};

enum class CrossingDirection { rising, falling };
enum class SwingTarget { amplify, oppose };

struct Crossing {
  double time = 0.0;
  CrossingDirection direction = CrossingDirection::rising;
};

/// Level crossings with a Schmitt trigger of +-h around `level`; each
/// crossing time is interpolated where the series passes `level` itself.
inline std::vector<Crossing> find_crossings(std::span<const double> t, std::span<const double> y,
                                            double level, double h) {
  if (t.size() != y.size()) throw InvariantError("find_crossings: size mismatch");
  std::vector<Crossing> out;
  int state = 0;  // -1 below, +1 above, 0 unknown
  std::size_t last_side_change = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const int now = y[i] > level + h ? 1 : (y[i] < level - h ? -1 : 0);
    if (now == 0) continue;
    if (state != 0 && now != state) {
      // Find the sample pair that straddles the level, starting after the
      // last confirmed state.
      std::size_t j = i;
      while (j > last_side_change + 1 &&
             !((y[j - 1] - level) * (y[j] - level) <= 0.0 && y[j - 1] != y[j])) {
        --j;
      }
      double tc = t[i];
      if (j >= 1 && y[j - 1] != y[j]) {
        const double f = (level - y[j - 1]) / (y[j] - y[j - 1]);
        tc = t[j - 1] + std::clamp(f, 0.0, 1.0) * (t[j] - t[j - 1]);
      }
      out.push_back({tc, now > 0 ? CrossingDirection::rising : CrossingDirection::falling});
    }
    if (now != state) last_side_change = i;
    state = now;
  }
  return out;
}

struct PeriodEstimate {
  double period = 0.0;          // p_0, s
  double last_crossing = 0.0;   // T_0
  std::optional<double> last_rising;
  CrossingDirection direction = CrossingDirection::rising;
  double level = 0.0;           // window-mean threshold
  std::size_t crossings = 0;
};

/// p_0 from the last `window_N` samples: spacing of same-direction
/// crossings of the window mean, robust to missed crossings. Empty when
/// fewer than two same-direction crossings exist.
inline std::optional<PeriodEstimate> estimate_period(std::span<const double> times,
                                                     std::span<const double> values,
                                                     std::size_t window_N,
                                                     double hysteresis = 0.1) {
  if (times.size() != values.size()) throw InvariantError("estimate_period: size mismatch");
  if (window_N < 2) throw InvariantError("estimate_period: window_N must be at least 2");
  if (values.size() < window_N) return std::nullopt;
  const auto t = times.subspan(times.size() - window_N);
  const auto y = values.subspan(values.size() - window_N);
  const double level = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(window_N);
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  const auto cs = find_crossings(t, y, level, hysteresis * (*hi - *lo));

  // Spacings between same-direction crossings. A crossing lost to noise
  // leaves a gap of about two periods; each gap counts as the whole number
  // of median spacings it spans.
  std::vector<double> gaps;
  for (const auto dir : {CrossingDirection::rising, CrossingDirection::falling}) {
    std::optional<double> prev;
    for (const auto& c : cs) {
      if (c.direction != dir) continue;
      if (prev) gaps.push_back(c.time - *prev);
      prev = c.time;
    }
  }
  if (gaps.empty()) return std::nullopt;
  std::vector<double> sorted = gaps;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2),
                   sorted.end());
  const double median = sorted[sorted.size() / 2];
  double sum = 0.0, n = 0.0;
  for (double g : gaps) {
    sum += g;
    n += std::max(1.0, std::round(g / median));
  }
  PeriodEstimate e;
  e.period = sum / n;
  e.last_crossing = cs.back().time;
  for (auto it = cs.rbegin(); it != cs.rend(); ++it) {
    if (it->direction == CrossingDirection::rising) {
      e.last_rising = it->time;
      break;
    }
  }
  e.direction = cs.back().direction;
  e.level = level;
  e.crossings = cs.size();
  return e;
}

inline std::optional<PeriodEstimate> estimate_period(const signal::FeedbackSeries& fb,
                                                     std::size_t window_N,
                                                     double hysteresis = 0.1) {
  return estimate_period(fb.frame_end_times, fb.smoothed, window_N, hysteresis);
}

/// Scheduler tick for command times (1 ns).
inline double quantize_time(double t) { return std::round(t * 1e9) / 1e9; }

/// Amplitude toggles at T_0 + k p_0/2 - T_offset, T_offset = p_0/4 + delta_loop
/// (plus the feedback lag when one is configured), for k = 1..count.
/// High amplitude falls on odd k when the reference
/// crossing was rising and the target is to amplify the swing (or falling
/// and oppose); otherwise on even k.
inline std::vector<AttackCommand> side_swing_schedule(double t0, double p0,
                                                      const SideSwingConfig& cfg,
                                                      SwingTarget target,
                                                      CrossingDirection crossing =
                                                          CrossingDirection::rising,
                                                      std::optional<double> now = std::nullopt,
                                                      std::size_t count = 8,
                                                      std::optional<double> low_amplitude =
                                                          std::nullopt) {
  if (!(p0 > 0.0) || !std::isfinite(p0)) throw InvariantError("side_swing_schedule: invalid p_0");
  if (now && *now - t0 > p0) {
    throw InvariantError("side_swing_schedule: stale T_0 (" + std::to_string(*now - t0) +
                         " s old, period " + std::to_string(p0) + " s); re-synchronize first");
  }
  const double low = low_amplitude.value_or(cfg.low_amplitude);
  const double offset = p0 / 4.0 + cfg.loop_delay + std::max(0.0, cfg.feedback_lag);
  const bool odd_high = (crossing == CrossingDirection::rising) == (target == SwingTarget::amplify);
  std::vector<AttackCommand> out;
  out.reserve(count);
  for (std::size_t k = 1; k <= count; ++k) {
    AttackCommand c;
    c.kind = CommandKind::amplitude_swing;
    c.issue_time = quantize_time(t0 + static_cast<double>(k) * p0 / 2.0 - offset);
    c.new_amplitude = ((k % 2 == 1) == odd_high) ? cfg.high_amplitude : low;
    out.push_back(c);
  }
  return out;
}

enum class PhaseGoal { spin_up, hold, slow_down };

inline const char* to_string(PhaseGoal g) {
  switch (g) {
    case PhaseGoal::spin_up: return "spin_up";
    case PhaseGoal::hold: return "hold";
    case PhaseGoal::slow_down: return "slow_down";
  }
  return "?";
}

inline PhaseGoal parse_phase_goal(const std::string& s) {
  if (s == "spin_up" || s == "up") return PhaseGoal::spin_up;
  if (s == "hold") return PhaseGoal::hold;
  if (s == "slow_down" || s == "down") return PhaseGoal::slow_down;
  throw ConfigError("unknown procedure goal '" + s + "' (expected spin_up, hold or slow_down)");
}

struct ProcedurePhase {
  PhaseGoal goal = PhaseGoal::spin_up;
  double duration = 0.0;
};

struct LoopEvent {
  double time = 0.0;
  std::string text;
};

/// Closed-loop Side-Swing driver.
///
/// Locks onto the feedback oscillation once a period estimate exists. The
/// feedback of |heading| oscillates at twice the heading rate, so when the
/// estimate is closer to half the expected period the lock folds it.
/// From then on a quadrature demodulator over the last two periods
/// corrects the reference time T_ref and the period. Toggles come from
/// side_swing_schedule anchored at the latest projected reference.
///
/// The swing asymmetry a in [0, 1] sets the low amplitude to
/// high - a (high - low): spin_up ramps a towards 1, hold keeps it,
/// slow_down ramps it back to 0 (symmetric injection, no net drift).
/// During the first spin_up the controller probes the toggle phase and
/// shifts it by half a period if the feedback has fallen by more than
/// probe_margin.
class SideSwingController {
 public:
  SideSwingController(const SideSwingConfig& cfg, std::vector<ProcedurePhase> phases,
                      double start_time, double tick)
      : cfg_((cfg.validate(), cfg)), phases_(std::move(phases)), start_(start_time), tick_(tick) {
    if (!(tick > 0.0)) throw ConfigError("side-swing controller: tick must be positive");
    if (phases_.empty()) throw ConfigError("side-swing controller: no procedure phases");
    for (const auto& p : phases_) {
      if (!(p.duration > 0.0)) throw ConfigError("procedure phase durations must be positive");
    }
  }

  std::vector<AttackCommand> on_sample(const FeedbackSample& s) {
    t_.push_back(s.time);
    y_.push_back(s.smoothed);
    std::vector<AttackCommand> out;
    if (s.time < start_) return out;

    const auto phase = phase_index(s.time);
    if (phase != current_phase_) enter_phase(phase, s.time);

    if (!locked_ && !try_lock(s.time)) return out;
    if (fold_ > 1.0) track(s.time);
    update_asymmetry(s.time);
    probe(s.time);
    schedule(s.time, out);
    return out;
  }

  [[nodiscard]] bool locked() const noexcept { return locked_; }
  [[nodiscard]] double period() const noexcept { return p0_; }
  [[nodiscard]] double reference_time() const noexcept { return t_ref_; }
  [[nodiscard]] double asymmetry() const noexcept { return asym_; }
  [[nodiscard]] double amplitude() const noexcept { return amplitude_; }
  [[nodiscard]] const std::vector<LoopEvent>& events() const noexcept { return events_; }
  [[nodiscard]] const std::vector<std::pair<double, double>>& period_estimates() const noexcept {
    return periods_;
  }
  [[nodiscard]] std::optional<std::size_t> current_phase() const noexcept {
    return current_phase_ == kNone ? std::nullopt : std::optional<std::size_t>(current_phase_);
  }
  [[nodiscard]] const std::vector<ProcedurePhase>& phases() const noexcept { return phases_; }
  [[nodiscard]] double phase_start(std::size_t i) const {
    double t = start_;
    for (std::size_t j = 0; j < i; ++j) t += phases_.at(j).duration;
    return t;
  }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  // |sin| crosses its mean 2/pi at asin(2/pi) after each zero: the share
  // of a carrier cycle between a zero of theta and the next rising
  // crossing of hump-shaped feedback.
  static constexpr double kHumpCrossing = 0.6901071 / (2.0 * std::numbers::pi);

  std::size_t phase_index(double t) const {
    double end = start_;
    for (std::size_t i = 0; i < phases_.size(); ++i) {
      end += phases_[i].duration;
      if (t < end) return i;
    }
    return phases_.size() - 1;  // last phase persists
  }

  void enter_phase(std::size_t i, double t) {
    current_phase_ = i;
    phase_t0_ = t;
    asym_at_entry_ = asym_;
    log(t, std::string("phase:") + to_string(phases_[i].goal));
  }

  bool try_lock(double t) {
    auto est = estimate_period(t_, y_, cfg_.window_N, cfg_.hysteresis);
    if (!est) {
      if (!reported_unavailable_) log(t, "period_unavailable");
      reported_unavailable_ = true;
      return false;
    }
    if (!est->last_rising) return false;
    py_ = est->period;
    fold_ = 1.0;
    if (cfg_.expected_period > 0.0) {
      const double e = cfg_.expected_period;
      if (std::abs(std::log(2.0 * py_ / e)) < std::abs(std::log(py_ / e))) {
        fold_ = 2.0;
        log(t, "period_folded");
      }
    }
    py_nominal_ = py_;
    p0_ = fold_ * py_;
    t_ref_ = *est->last_rising;
    if (fold_ > 1.0) t_ref_ -= cfg_.feedback_lag + kHumpCrossing * p0_;
    locked_ = true;
    periods_.emplace_back(t, p0_);
    log(t, "lock p0=" + fmt(p0_));
    probe_start_ = t;
    probe_baseline_ = cycle_mean(t);
    return true;
  }

  // Phase tracking for a folded period, where T_ref is the true time of a
  // zero of theta's oscillation. The feedback follows |theta|. While the
  // swing is symmetric |theta| peaks twice per cycle and its phase shows up
  // in the second harmonic of 1/p_0; once theta is biased the fundamental
  // carries it, up to a sign that squaring removes. Both give twice the
  // phase of theta, so they add coherently. T_ref and p_y are nudged
  // towards the estimate and never jump, which keeps the toggle parity.
  void track(double t) {
    const auto m = static_cast<std::size_t>(std::ceil(2.0 * p0_ / tick_));
    if (y_.size() < m) return;
    const double w = 2.0 * std::numbers::pi / p0_;
    double mean = 0.0;
    for (std::size_t i = y_.size() - m; i < y_.size(); ++i) mean += y_[i];
    mean /= static_cast<double>(m);
    std::complex<double> z1, z2;
    for (std::size_t i = y_.size() - m; i < y_.size(); ++i) {
      const double ts = t_[i] - cfg_.feedback_lag - t_ref_;
      const double v = y_[i] - mean;
      z1 += v * std::polar(1.0, -w * ts);
      z2 += v * std::polar(1.0, -2.0 * w * ts);
    }
    const double n = static_cast<double>(m);
    // |sin x| = 2/pi - (4 / 3pi) cos 2x - ..., so -z2 carries exp(-2i phi).
    std::complex<double> u = -z2 * (2.0 / n) * (3.0 * std::numbers::pi / 4.0);
    if (std::abs(z1) > 0.0) u += -(z1 * z1) / std::abs(z1) * (2.0 / n);
    if (std::abs(u) == 0.0) return;
    // theta ~ sin(w (t - T_ref) - phi): its zero lies phi / w after T_ref.
    const double err = -std::arg(u) / 2.0 / w;
    const double per_sample = tick_ / p0_;
    t_ref_ += cfg_.sync_gain * per_sample * err;
    py_ = std::clamp(py_ + cfg_.period_gain * per_sample * err, 0.5 * py_nominal_,
                     2.0 * py_nominal_);
    p0_ = fold_ * py_;
    if (++track_count_ % 16 == 0) periods_.emplace_back(t, p0_);
  }

  void update_asymmetry(double t) {
    const double ramp = (t - phase_t0_) / cfg_.ramp_time;
    switch (phases_[current_phase_].goal) {
      case PhaseGoal::spin_up: asym_ = std::min(1.0, asym_at_entry_ + ramp); break;
      case PhaseGoal::hold: break;
      case PhaseGoal::slow_down: asym_ = std::max(0.0, asym_at_entry_ - ramp); break;
    }
  }

  void probe(double t) {
    if (probed_ || cfg_.probe_cycles == 0) return;
    if (phases_[current_phase_].goal != PhaseGoal::spin_up) return;
    if (t - probe_start_ < cfg_.probe_cycles * p0_) return;
    probed_ = true;
    // Lowering the low amplitude also lowers the mean drive, so the
    // feedback dips a little whichever phase is right.
    const double now = cycle_mean(t);
    if (now < (1.0 - cfg_.probe_margin) * probe_baseline_) {
      t_ref_ += p0_ / 2.0;
      if (last_index_) --*last_index_;  // same toggles, one half period later in the count
      log(t, "probe_flip");
    } else {
      log(t, "probe_keep");
    }
  }

  // Toggles are numbered in half periods from T_0, and each number is
  // issued once: small corrections to T_0 move a toggle in time but never
  // renumber it, so none is lost or repeated at a horizon boundary.
  void schedule(double t, std::vector<AttackCommand>& out) {
    const double earliest = t + cfg_.loop_delay;
    const double horizon = earliest + tick_;
    // The crossing time T_0 the schedule expects, as seen in the feedback.
    const double t0 = fold_ > 1.0 ? t_ref_ + cfg_.feedback_lag + cfg_.loop_delay : t_ref_;
    const auto cycle = static_cast<long long>(std::floor((t - t0) / p0_));
    const double anchor = t0 + static_cast<double>(cycle) * p0_;
    const double low = cfg_.high_amplitude - asym_ * (cfg_.high_amplitude - cfg_.low_amplitude);
    const double offset = p0_ / 4.0 + cfg_.loop_delay + std::max(0.0, cfg_.feedback_lag);
    const auto count =
        static_cast<std::size_t>(std::ceil(2.0 * (horizon - anchor + offset) / p0_)) + 1;
    const auto cmds = side_swing_schedule(anchor, p0_, cfg_, SwingTarget::amplify,
                                          CrossingDirection::rising, t, count, low);
    for (std::size_t k = 0; k < cmds.size(); ++k) {
      const AttackCommand& c = cmds[k];
      const long long index = 2 * cycle + static_cast<long long>(k) + 1;
      if (c.issue_time >= horizon) break;
      if (last_index_ ? index <= *last_index_ : c.issue_time < earliest) continue;
      last_index_ = index;
      AttackCommand cmd = c;
      cmd.issue_time = std::max(c.issue_time, earliest);
      if (!out.empty() && cmd.issue_time < out.back().issue_time) continue;
      if (*cmd.new_amplitude != amplitude_) {
        amplitude_ = *cmd.new_amplitude;
        out.push_back(cmd);
      }
    }
  }

  double cycle_mean(double t) const {
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t i = t_.size(); i-- > 0;) {
      if (t_[i] <= t - p0_) break;
      s += y_[i];
      ++n;
    }
    return n ? s / static_cast<double>(n) : 0.0;
  }

  void log(double t, std::string text) { events_.push_back({t, std::move(text)}); }

  static std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
  }

  SideSwingConfig cfg_;
  std::vector<ProcedurePhase> phases_;
  double start_;
  double tick_;
  std::vector<double> t_, y_;

  std::size_t current_phase_ = kNone;
  double phase_t0_ = 0.0;
  double asym_ = 0.0;
  double asym_at_entry_ = 0.0;
  double amplitude_ = -1.0;

  bool locked_ = false;
  bool reported_unavailable_ = false;
  double p0_ = 0.0;     // toggle period
  double py_ = 0.0;     // feedback period
  double py_nominal_ = 0.0;
  double fold_ = 1.0;
  std::size_t track_count_ = 0;
  double t_ref_ = 0.0;
  std::optional<long long> last_index_;

  bool probed_ = false;
  double probe_start_ = 0.0;
  double probe_baseline_ = 0.0;

  std::vector<LoopEvent> events_;
  std::vector<std::pair<double, double>> periods_;
};

}  // namespace adloop::attack
