#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "adloop/attack/commands.hpp"
#include "adloop/attack/feedback.hpp"
#include "adloop/error.hpp"

namespace adloop::attack {

/// T_h = max(0, alpha K - beta K^2).
inline double update_threshold(double k, double alpha, double beta) {
  if (!(k >= 0.0)) throw InvariantError("update_threshold: K must be non-negative");
  if (!(alpha > 0.0) || beta < 0.0) {
    throw InvariantError("update_threshold: need alpha > 0 and beta >= 0");
  }
  return std::max(0.0, alpha * k - beta * k * k);
}

struct SwitchingConfig {
  double alpha = 0.95;
  double beta = 0.0;
  double initial_step = 1.5;  // Hz between the two carriers
  double min_step = 0.85;
  double gamma = 0.9;         // step decay per round
  double base_carrier = 18999.25;
  double amplitude = 1.0;
  double peak_decay = 0.01;   // K forgets this fraction per feedback sample
  double drift_gain = 0.05;   // 0 disables centre tracking

  void validate() const {
    if (!(alpha > 0.0) || !(alpha <= 1.0) || beta < 0.0) {
      throw ConfigError("switching: need 0 < alpha <= 1 and beta >= 0");
    }
    if (!(min_step > 0.0) || !(initial_step >= min_step)) {
      throw ConfigError("switching: need 0 < min_step <= initial_step");
    }
    if (!(gamma > 0.8) || !(gamma < 1.0)) throw ConfigError("switching: gamma must lie in (0.8, 1)");
    if (!(base_carrier > 0.0) || !(amplitude >= 0.0)) {
      throw ConfigError("switching: base_carrier must be positive, amplitude non-negative");
    }
    if (peak_decay < 0.0 || peak_decay >= 1.0) throw ConfigError("switching: peak_decay in [0, 1)");
    if (drift_gain < 0.0 || drift_gain > 1.0) throw ConfigError("switching: drift_gain in [0, 1]");
  }
};

struct SwitchEvent {
  double time = 0.0;        // feedback sample that triggered it
  double issue_time = 0.0;  // when the new carrier takes effect
  double old_frequency = 0.0;
  double new_frequency = 0.0;
  double step = 0.0;        // step in force after this switch
  double y_before = 0.0;
  double y_after = 0.0;
  double threshold = 0.0;
};

/// Carrier toggling on falling threshold crossings of the feedback.
///
/// The two carriers sit at centre -+ step/2 around the aliasing point, so
/// the aliased rate flips sign at each switch. A switch needs the feedback
/// to have risen since the previous one; after a switch K restarts from the
/// current value. Every return to the upper carrier closes a round: the
/// step shrinks by gamma (floored at min_step) and, if enabled, the centre
/// moves by gain * step * (1 - I_new / I_old), where I_old and I_new are the
/// last two inter-switch intervals, limited to half a step per round.
class SwitchingController {
 public:
  explicit SwitchingController(const SwitchingConfig& cfg)
      : cfg_((cfg.validate(), cfg)), step_(cfg.initial_step),
        center_(cfg.base_carrier + cfg.initial_step / 2.0) {
    steps_.push_back(step_);
  }

  /// Feeds one smoothed feedback sample; returns a command if it switches.
  /// `current_frequency` is the carrier in force before the controller took
  /// over and is only used for the first switch's bookkeeping.
  std::optional<AttackCommand> on_sample(const FeedbackSample& s, double issue_time,
                                         double current_frequency) {
    const double y = s.smoothed;
    if (!started_) {
      started_ = true;
      k_ = y;
      prev_ = y;
      frequency_ = current_frequency;
      threshold_ = update_threshold(k_, cfg_.alpha, cfg_.beta);
      return std::nullopt;
    }
    k_ = std::max(y, k_ * (1.0 - cfg_.peak_decay));
    if (y > prev_) armed_ = true;
    const double th_prev = threshold_;
    threshold_ = update_threshold(k_, cfg_.alpha, cfg_.beta);

    std::optional<AttackCommand> cmd;
    if (armed_ && prev_ >= th_prev && y < th_prev) {
      cmd = make_switch(s, issue_time, th_prev);
    }
    prev_ = y;
    return cmd;
  }

  [[nodiscard]] double threshold() const noexcept { return threshold_; }
  [[nodiscard]] double peak() const noexcept { return k_; }
  [[nodiscard]] double step() const noexcept { return step_; }
  [[nodiscard]] double center() const noexcept { return center_; }
  [[nodiscard]] double frequency() const noexcept { return frequency_; }
  [[nodiscard]] const std::vector<SwitchEvent>& events() const noexcept { return events_; }
  [[nodiscard]] const std::vector<double>& step_history() const noexcept { return steps_; }
  [[nodiscard]] const SwitchingConfig& config() const noexcept { return cfg_; }

 private:
  AttackCommand make_switch(const FeedbackSample& s, double issue_time, double th) {
    const bool to_high = !high_ && have_switched_;
    if (to_high) close_round(issue_time);
    const double next = to_high ? center_ + step_ / 2.0 : center_ - step_ / 2.0;

    SwitchEvent e;
    e.time = s.time;
    e.issue_time = issue_time;
    e.old_frequency = frequency_;
    e.new_frequency = next;
    e.step = step_;
    e.y_before = prev_;
    e.y_after = s.smoothed;
    e.threshold = th;
    events_.push_back(e);

    if (have_switched_ && high_) dwell_high_ = issue_time - last_issue_;
    last_issue_ = issue_time;
    have_switched_ = true;
    high_ = to_high;
    frequency_ = next;
    armed_ = false;
    k_ = s.smoothed;
    threshold_ = update_threshold(k_, cfg_.alpha, cfg_.beta);

    AttackCommand c;
    c.issue_time = issue_time;
    c.new_frequency = next;
    c.new_amplitude = cfg_.amplitude;
    c.kind = CommandKind::frequency_switch;
    return c;
  }

  void close_round(double issue_time) {
    const double i_new = issue_time - last_issue_;
    const double i_old = dwell_high_;
    if (cfg_.drift_gain != 0.0 && i_old > 0.0 && i_new > 0.0) {
      const double lim = step_ / 2.0;
      const double shift = std::clamp(cfg_.drift_gain * step_ * (1.0 - i_new / i_old), -lim, lim);
      center_ += shift;
    }
    step_ = std::max(cfg_.gamma * step_, cfg_.min_step);
    steps_.push_back(step_);
  }

  SwitchingConfig cfg_;
  double step_;
  double center_;
  double frequency_ = 0.0;
  double k_ = 0.0;
  double prev_ = 0.0;
  double threshold_ = 0.0;
  bool started_ = false;
  bool armed_ = false;
  bool high_ = true;
  bool have_switched_ = false;
  double last_issue_ = 0.0;
  double dwell_high_ = 0.0;
  std::vector<SwitchEvent> events_;
  std::vector<double> steps_;
};

}  // namespace adloop::attack
