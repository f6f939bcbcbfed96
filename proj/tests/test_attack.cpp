#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "adloop/attack/feedback.hpp"
#include "adloop/attack/loop.hpp"
#include "adloop/attack/side_swing.hpp"
#include "adloop/attack/switching.hpp"
#include "oracles.hpp"

using namespace adloop;
using namespace adloop::attack;

namespace {

constexpr double kTc = 4096.0 / 44100.0;

std::vector<FeedbackSample> series(const std::vector<double>& y) {
  std::vector<FeedbackSample> out;
  for (std::size_t i = 0; i < y.size(); ++i) {
    out.push_back({static_cast<double>(i + 1) * kTc, y[i], y[i]});
  }
  return out;
}

std::vector<double> abs_sine(double period, std::size_t n, double offset = 0.1) {
  std::vector<double> y;
  for (std::size_t i = 0; i < n; ++i) {
    y.push_back(std::abs(std::sin(oracle::kPi * static_cast<double>(i + 1) * kTc / period)) + offset);
  }
  return y;
}

/// Acoustic source for loop tests: an amplitude-modulated tone in band.
class ToneVictim final : public VictimPort {
 public:
  [[nodiscard]] double acoustic_rate() const override { return 44100.0; }
  signal::SampleChunk next_acoustic_block() override {
    signal::SampleChunk c;
    c.sample_rate = 44100.0;
    c.start_index = next_;
    for (int i = 0; i < 441; ++i, ++next_) {
      const double t = static_cast<double>(next_) / 44100.0;
      c.samples.push_back((1.2 + std::sin(2.0 * oracle::kPi * 0.5 * t)) *
                          std::sin(2.0 * oracle::kPi * 15000.0 * t));
    }
    return c;
  }
  void submit(const AttackCommand& cmd) override { received.push_back(cmd); }

  std::vector<AttackCommand> received;

 private:
  std::int64_t next_ = 0;
};

}  // namespace

TEST(Threshold, HandComputedValues) {
  EXPECT_EQ(update_threshold(100.0, 0.95, 0.0), 95.0);
  EXPECT_EQ(update_threshold(100.0, 0.95, 1e-4), 94.0);
  EXPECT_EQ(update_threshold(0.0, 0.95, 0.0), 0.0);
  EXPECT_EQ(update_threshold(1e6, 0.95, 1e-4), 0.0);  // floored
  EXPECT_THROW((void)update_threshold(-1.0, 0.95, 0.0), InvariantError);
}

TEST(Switching, ConfigInvariants) {
  SwitchingConfig c;
  EXPECT_NO_THROW(c.validate());
  c.gamma = 0.8;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SwitchingConfig{};
  c.min_step = 2.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SwitchingConfig{};
  c.alpha = 1.2;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Switching, AbsSineMatchesCrossingOracle) {
  SwitchingConfig cfg;
  cfg.peak_decay = 0.0;
  SwitchingController ctl(cfg);
  const double period = 1.25;  // one |sin| hump per period
  const auto y = abs_sine(period, 400);
  const auto want = oracle::falling_threshold_crossings(y, cfg.alpha, cfg.peak_decay);
  std::vector<std::size_t> got;
  const auto s = series(y);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (ctl.on_sample(s[i], s[i].time + kTc, 19000.8)) got.push_back(i);
  }
  ASSERT_GE(got.size(), 25u);  // about 30 humps; a low sampled peak may be skipped
  EXPECT_EQ(got, want);

  // Continuous crossing of 0.95 K on the falling side of each hump, with K
  // the largest sample seen since the previous switch; the detecting sample
  // is the first one after it.
  for (std::size_t j = 1; j < got.size(); ++j) {
    double k = 0.0;
    for (std::size_t i = got[j - 1]; i < got[j]; ++i) k = std::max(k, y[i]);
    const double theta = oracle::kPi - std::asin(cfg.alpha * k - 0.1);
    const double t = s[got[j]].time;
    const double analytic = (std::floor(t / period) + theta / oracle::kPi) * period;
    EXPECT_LE(analytic, t + 1e-12) << "switch " << j;
    EXPECT_GT(analytic, t - kTc) << "switch " << j;
  }
}

TEST(Switching, RisingFeedbackNeverSwitches) {
  SwitchingController ctl(SwitchingConfig{});
  std::vector<double> y;
  for (int i = 0; i < 300; ++i) y.push_back(0.01 * i);
  for (const auto& s : series(y)) EXPECT_FALSE(ctl.on_sample(s, s.time + kTc, 19000.8));
  EXPECT_TRUE(ctl.events().empty());
}

TEST(Switching, EventsObeyThresholdLaw) {
  SwitchingConfig cfg;
  SwitchingController ctl(cfg);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> noise(0.0, 0.01);
  auto y = abs_sine(1.3, 600);
  for (double& v : y) v += noise(rng);
  for (const auto& s : series(y)) (void)ctl.on_sample(s, s.time + kTc, 19000.8);
  ASSERT_FALSE(ctl.events().empty());
  for (const auto& e : ctl.events()) {
    EXPECT_GE(e.y_before, e.threshold);
    EXPECT_LT(e.y_after, e.threshold);
    EXPECT_GE(e.issue_time, e.time + kTc - 1e-12);
  }
}

TEST(Switching, StepDecaysToFloor) {
  SwitchingConfig cfg;
  cfg.drift_gain = 0.0;
  SwitchingController ctl(cfg);
  for (const auto& s : series(abs_sine(1.25, 800))) (void)ctl.on_sample(s, s.time + kTc, 19000.8);
  const auto want = oracle::step_sequence(1.5, 0.9, 0.85);
  const std::vector<double> decimal{1.5, 1.35, 1.215, 1.0935, 0.98415, 0.885735, 0.85};
  const auto& got = ctl.step_history();
  ASSERT_GE(got.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    EXPECT_EQ(got[i], want[i]) << "round " << i;
    EXPECT_NEAR(got[i], decimal[i], 1e-12);
  }
  for (std::size_t i = want.size(); i < got.size(); ++i) EXPECT_EQ(got[i], 0.85);
}

TEST(Switching, CarriersStraddleTheCentre) {
  SwitchingConfig cfg;
  cfg.drift_gain = 0.0;
  SwitchingController ctl(cfg);
  for (const auto& s : series(abs_sine(1.25, 200))) (void)ctl.on_sample(s, s.time + kTc, 19000.8);
  const double centre = cfg.base_carrier + cfg.initial_step / 2.0;
  ASSERT_GE(ctl.events().size(), 4u);
  for (const auto& e : ctl.events()) {
    EXPECT_NEAR(std::abs(e.new_frequency - centre), e.step / 2.0, 1e-9);
  }
  EXPECT_EQ(ctl.center(), centre);
  EXPECT_LT(ctl.events()[0].new_frequency, centre);  // first switch goes low
}

TEST(Switching, DriftCompensationFollowsIntervalRatio) {
  SwitchingConfig cfg;
  cfg.drift_gain = 0.5;
  cfg.peak_decay = 0.0;
  SwitchingController ctl(cfg);
  // Humps alternate between long and short, so each round sees I_new < I_old.
  std::vector<double> y;
  for (int round = 0; round < 6; ++round) {
    for (double period : {1.6, 1.0}) {
      const auto n = static_cast<std::size_t>(period / 2.0 / kTc);
      for (std::size_t i = 0; i < n; ++i) {
        y.push_back(std::abs(std::sin(oracle::kPi * static_cast<double>(i) / static_cast<double>(n))) + 0.1);
      }
    }
  }
  double centre = cfg.base_carrier + cfg.initial_step / 2.0;
  double last_issue = 0.0, dwell_high = 0.0;
  bool high = true, switched = false;
  double step = cfg.initial_step;
  for (const auto& s : series(y)) {
    if (!ctl.on_sample(s, s.time + kTc, 19000.8)) continue;
    const double issue = s.time + kTc;
    const bool to_high = !high && switched;
    if (to_high) {
      const double i_new = issue - last_issue;
      if (dwell_high > 0.0) {
        centre += std::clamp(0.5 * step * (1.0 - i_new / dwell_high), -step / 2.0, step / 2.0);
      }
      step = std::max(0.9 * step, 0.85);
    }
    if (switched && high) dwell_high = issue - last_issue;
    last_issue = issue;
    switched = true;
    high = to_high;
    EXPECT_NEAR(ctl.center(), centre, 1e-9);
  }
  EXPECT_NE(ctl.center(), cfg.base_carrier + cfg.initial_step / 2.0);
}

TEST(Crossings, SineZeroCrossings) {
  std::vector<double> t, y;
  for (int i = 0; i < 200; ++i) {
    t.push_back(i * kTc);
    y.push_back(std::sin(2.0 * oracle::kPi * t.back() / 1.2 + 0.3));
  }
  const auto cs = find_crossings(t, y, 0.0, 0.1);
  ASSERT_GE(cs.size(), 20u);
  for (const auto& c : cs) {
    // Analytic zeros: 2 pi t / 1.2 + 0.3 = m pi.
    const double m = std::round((2.0 * c.time / 1.2 + 0.3 / oracle::kPi));
    const double zero = (m * oracle::kPi - 0.3) * 1.2 / (2.0 * oracle::kPi);
    EXPECT_NEAR(c.time, zero, 0.01);
    EXPECT_EQ(c.direction, static_cast<int>(m) % 2 == 0 ? CrossingDirection::rising
                                                        : CrossingDirection::falling);
  }
}

TEST(Period, SinusoidWithinOneUpdate) {
  std::vector<double> t, y;
  for (int i = 0; i < 150; ++i) {
    t.push_back((i + 1) * kTc);
    y.push_back(1.0 + 0.5 * std::sin(2.0 * oracle::kPi * t.back() / 1.2));
  }
  const auto e = estimate_period(t, y, 100);
  ASSERT_TRUE(e.has_value());
  EXPECT_NEAR(e->period, 1.2, kTc);
}

TEST(Period, ConstantSeriesIsUnavailable) {
  std::vector<double> t, y(150, 0.7);
  for (int i = 0; i < 150; ++i) t.push_back(i * kTc);
  EXPECT_FALSE(estimate_period(t, y, 100).has_value());
  EXPECT_FALSE(estimate_period(t, std::vector<double>(150, 0.7), 160).has_value());
}

TEST(Period, TwoSinusoidsDominantPeriod) {
  std::vector<double> t, y;
  for (int i = 0; i < 150; ++i) {
    t.push_back(i * kTc);
    y.push_back(std::sin(2.0 * oracle::kPi * t.back() / 2.0) + 0.3 * std::sin(2.0 * oracle::kPi * t.back() / 0.7));
  }
  const auto e = estimate_period(t, y, 100);
  ASSERT_TRUE(e.has_value());
  EXPECT_NEAR(e->period, 2.0, 2.0 * kTc);
}

TEST(Period, MissedCrossingDoesNotInflatePeriod) {
  std::vector<double> t, y;
  for (int i = 0; i < 150; ++i) {
    t.push_back(i * kTc);
    const double v = std::sin(2.0 * oracle::kPi * t.back() / 1.25);
    // Flatten one trough so its crossings vanish.
    y.push_back(t.back() > 5.3 && t.back() < 6.6 ? std::max(v, 0.4) : v);
  }
  const auto e = estimate_period(t, y, 100);
  ASSERT_TRUE(e.has_value());
  EXPECT_NEAR(e->period, 1.25, kTc);
}

TEST(Schedule, HandComputedToggleTimes) {
  SideSwingConfig cfg;
  cfg.loop_delay = 0.0;
  const auto cmds = side_swing_schedule(10.0, 1.2, cfg, SwingTarget::amplify);
  const std::vector<double> want{10.3, 10.9, 11.5, 12.1, 12.7, 13.3, 13.9, 14.5};
  ASSERT_EQ(cmds.size(), want.size());
  for (std::size_t k = 0; k < want.size(); ++k) {
    EXPECT_EQ(cmds[k].issue_time, want[k]) << "k = " << k + 1;
    EXPECT_EQ(cmds[k].kind, CommandKind::amplitude_swing);
    ASSERT_TRUE(cmds[k].new_amplitude.has_value());
    EXPECT_FALSE(cmds[k].new_frequency.has_value());
  }
}

TEST(Schedule, SpacingIsHalfPeriodAndAmplitudesAlternate) {
  SideSwingConfig cfg;
  const double p0 = 1.2345678;
  const auto cmds = side_swing_schedule(100.0, p0, cfg, SwingTarget::amplify, CrossingDirection::rising,
                                        std::nullopt, 20);
  for (std::size_t k = 1; k < cmds.size(); ++k) {
    EXPECT_NEAR(cmds[k].issue_time - cmds[k - 1].issue_time, p0 / 2.0, 1e-9);
    EXPECT_NE(*cmds[k].new_amplitude, *cmds[k - 1].new_amplitude);
  }
  EXPECT_NEAR(cmds[0].issue_time, 100.0 + p0 / 2.0 - (p0 / 4.0 + cfg.loop_delay), 1e-9);
}

TEST(Schedule, ParityFollowsCrossingAndTarget) {
  SideSwingConfig cfg;
  const auto first = [&](CrossingDirection d, SwingTarget g) {
    return *side_swing_schedule(10.0, 1.2, cfg, g, d).front().new_amplitude;
  };
  const double hi = cfg.high_amplitude, lo = cfg.low_amplitude;
  EXPECT_EQ(first(CrossingDirection::rising, SwingTarget::amplify), hi);
  EXPECT_EQ(first(CrossingDirection::falling, SwingTarget::amplify), lo);
  EXPECT_EQ(first(CrossingDirection::rising, SwingTarget::oppose), lo);
  EXPECT_EQ(first(CrossingDirection::falling, SwingTarget::oppose), hi);
}

TEST(Schedule, FeedbackLagJoinsTheOffset) {
  SideSwingConfig cfg;
  cfg.loop_delay = 0.0;
  cfg.feedback_lag = 0.2;
  const auto cmds = side_swing_schedule(10.0, 1.2, cfg, SwingTarget::amplify);
  EXPECT_EQ(cmds[0].issue_time, 10.1);
}

TEST(Schedule, EqualAmplitudesDegenerate) {
  SideSwingConfig cfg;
  const auto cmds = side_swing_schedule(10.0, 1.2, cfg, SwingTarget::amplify, CrossingDirection::rising,
                                        std::nullopt, 8, cfg.high_amplitude);
  for (const auto& c : cmds) EXPECT_EQ(*c.new_amplitude, cfg.high_amplitude);
}

TEST(Schedule, StaleReferenceRejected) {
  SideSwingConfig cfg;
  EXPECT_THROW(side_swing_schedule(10.0, 1.2, cfg, SwingTarget::amplify, CrossingDirection::rising, 11.5),
               InvariantError);
  EXPECT_NO_THROW(side_swing_schedule(10.0, 1.2, cfg, SwingTarget::amplify, CrossingDirection::rising, 11.0));
  EXPECT_THROW(side_swing_schedule(10.0, 0.0, cfg, SwingTarget::amplify), InvariantError);
}

TEST(SideSwing, WaitsForAPeriodEstimate) {
  SideSwingConfig cfg;
  SideSwingController ctl(cfg, {{PhaseGoal::spin_up, 30.0}}, 0.0, kTc);
  for (const auto& s : series(std::vector<double>(50, 0.3))) EXPECT_TRUE(ctl.on_sample(s).empty());
  EXPECT_FALSE(ctl.locked());
  ASSERT_FALSE(ctl.events().empty());
  bool unavailable = false;
  for (const auto& e : ctl.events()) unavailable |= e.text == "period_unavailable";
  EXPECT_TRUE(unavailable);
}

TEST(SideSwing, LocksAndTogglesAtHalfPeriods) {
  SideSwingConfig cfg;
  cfg.expected_period = 1.25;
  SideSwingController ctl(cfg, {{PhaseGoal::spin_up, 60.0}}, 0.0, kTc);
  std::vector<AttackCommand> cmds;
  for (const auto& s : series(abs_sine(1.25, 500, 0.2))) {
    for (const auto& c : ctl.on_sample(s)) {
      EXPECT_GE(c.issue_time, s.time + cfg.loop_delay - 1e-9);
      cmds.push_back(c);
    }
  }
  ASSERT_TRUE(ctl.locked());
  EXPECT_NEAR(ctl.period(), 1.25, kTc);
  ASSERT_GT(cmds.size(), 20u);
  for (std::size_t k = 1; k < cmds.size(); ++k) {
    EXPECT_GE(cmds[k].issue_time, cmds[k - 1].issue_time);
    EXPECT_NE(*cmds[k].new_amplitude, *cmds[k - 1].new_amplitude);
  }
  // Once the asymmetry is saturated the toggles sit p0/2 apart.
  const double late = cmds.back().issue_time - cmds[cmds.size() - 5].issue_time;
  EXPECT_NEAR(late, 2.0 * ctl.period(), 2.0 * kTc);
}

TEST(Feedback, SilenceIsFlatBaseline) {
  signal::SampleChunk quiet;
  quiet.sample_rate = 44100.0;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 0.01);
  for (int i = 0; i < 44100 * 5; ++i) quiet.samples.push_back(g(rng));
  const auto fb = extract_feedback(quiet, FeedbackConfig{});
  ASSERT_EQ(fb.size(), 44100u * 5 / 4096);
  EXPECT_DOUBLE_EQ(fb.chunk_duration, kTc);
  double lo = 1e9, hi = 0.0;
  for (std::size_t i = 2; i < fb.size(); ++i) {
    lo = std::min(lo, fb.smoothed[i]);
    hi = std::max(hi, fb.smoothed[i]);
  }
  EXPECT_LT((hi - lo) / lo, 0.1);
}

TEST(Feedback, ModulationPeriodRecovered) {
  ToneVictim src;
  signal::SampleChunk all;
  all.sample_rate = 44100.0;
  for (int b = 0; b < 2000; ++b) {
    const auto c = src.next_acoustic_block();
    all.samples.insert(all.samples.end(), c.samples.begin(), c.samples.end());
  }
  const auto fb = extract_feedback(all, FeedbackConfig{});
  std::vector<double> y(fb.smoothed.begin() + 4, fb.smoothed.end());
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  for (double& v : y) v -= mean;
  const auto mags = oracle::dft_magnitudes(y);
  const std::size_t k = oracle::argmax_from(mags, 1);
  const double period = static_cast<double>(y.size()) * kTc / static_cast<double>(k);
  EXPECT_NEAR(period, 2.0, kTc);
}

TEST(Feedback, LagOfDefaultPath) {
  EXPECT_NEAR(feedback_lag(FeedbackConfig{}, 44100.0), kTc / 2.0 + kTc * (5.0 + 8.0 + 9.0) / 18.0, 1e-15);
}

TEST(Loop, ConfigValidation) {
  LoopConfig c;
  EXPECT_NO_THROW(c.validate(44100.0));
  c.loop_delay = 0.05;
  EXPECT_THROW(c.validate(44100.0), ConfigError);
  c = LoopConfig{};
  c.mode = LoopMode::procedure;
  EXPECT_THROW(c.validate(44100.0), ConfigError);
  c.procedure = {{PhaseGoal::spin_up, 20.0}};
  c.duration = 30.0;
  EXPECT_THROW(c.validate(44100.0), ConfigError);  // 19 + 20 > 30
  EXPECT_THROW(parse_loop_mode("chaos"), ConfigError);
}

TEST(Loop, RunsAgainstAnyTwoChannelPort) {
  ToneVictim port;
  LoopConfig cfg;
  cfg.mode = LoopMode::switching;
  cfg.duration = 30.0;
  cfg.injection_start = 1.0;
  cfg.control_start = 2.0;
  const auto tel = run_attack_loop(port, cfg);
  EXPECT_EQ(tel.rows.size(), tel.feedback.size());
  ASSERT_FALSE(tel.switch_events.empty());
  EXPECT_EQ(port.received.size(), tel.commands.size());
  for (const auto& e : tel.switch_events) EXPECT_GE(e.issue_time, e.time + cfg.loop_delay - 1e-12);
  for (std::size_t i = 1; i < tel.commands.size(); ++i) {
    EXPECT_GE(tel.commands[i].issue_time, tel.commands[i - 1].issue_time);
  }
  for (std::size_t i = 1; i < tel.step_history.size(); ++i) {
    EXPECT_LE(tel.step_history[i], tel.step_history[i - 1]);
    EXPECT_GE(tel.step_history[i], cfg.switching.min_step);
  }
}

TEST(Loop, ObserveModeInjectsNothing) {
  ToneVictim port;
  LoopConfig cfg;
  cfg.duration = 5.0;
  const auto tel = run_attack_loop(port, cfg);
  EXPECT_TRUE(port.received.empty());
  EXPECT_TRUE(tel.commands.empty());
  EXPECT_EQ(tel.feedback.size(), static_cast<std::size_t>(5.0 * 44100.0 / 4096.0));
}
