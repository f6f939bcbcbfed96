#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "adloop/attack/loop.hpp"
#include "adloop/error.hpp"
#include "adloop/harness/metrics.hpp"
#include "adloop/victim/victim.hpp"

namespace adloop::harness {

using nlohmann::json;

using MetricsConfig = MetricsOptions;

struct OutputConfig {
  bool wav = false;
  bool spectrogram = false;
};

struct Scenario {
  std::string name = "custom";
  std::string description;
  std::uint64_t seed = 1;
  double duration = 30.0;
  victim::VictimConfig victim{};
  attack::LoopConfig attack{};
  MetricsConfig metrics{};
  OutputConfig outputs{};

  /// Checks cross-section consistency; sections validate themselves.
  void validate() const {
    if (name.empty()) throw ConfigError("scenario.name must not be empty");
    if (!(duration > 0.0)) throw ConfigError("scenario.duration must be positive");
    try {
      victim.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("scenario.victim: ") + e.what());
    }
    try {
      attack.validate(victim.plant.acoustic_rate);
    } catch (const Error& e) {
      throw ConfigError(std::string("scenario.attack: ") + e.what());
    }
    if (metrics.target_sign < -1 || metrics.target_sign > 1) {
      throw ConfigError("scenario.metrics.target_sign must be -1, 0 or 1");
    }
    if (!(metrics.trend_window > 0.0) || !(metrics.trend_tolerance >= 0.0) ||
        !(metrics.theta_tolerance >= 0.0)) {
      throw ConfigError("scenario.metrics: trend_window must be positive, tolerances >= 0");
    }
    if (metrics.oscillation_window &&
        !(metrics.oscillation_window->second > metrics.oscillation_window->first)) {
      throw ConfigError("scenario.metrics.oscillation_window must be [start, end] with end > start");
    }
  }
};

namespace detail {

/// Reads one JSON object, remembering which keys were consumed so that
/// leftovers can be rejected with their full path.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path_ + "." + key + ": expected " + type_name<T>() + ", got " +
                        it->dump());
    }
  }

  [[nodiscard]] const json* child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  [[nodiscard]] std::string path(const char* key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(path_ + "." + k + ": unknown key");
    }
  }

 private:
  template <class T>
  static const char* type_name() {
    if constexpr (std::is_same_v<T, bool>) return "a boolean";
    else if constexpr (std::is_integral_v<T>) return "an integer";
    else if constexpr (std::is_floating_point_v<T>) return "a number";
    else if constexpr (std::is_same_v<T, std::string>) return "a string";
    else return "a list of numbers";
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
void guarded(const std::string& path, F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind("scenario", 0) == 0) throw;
    throw ConfigError(path + ": " + msg);
  } catch (const SignalError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline void read_band(const json& j, const std::string& path, signal::BandSpec& b) {
  Section s(j, path);
  s.get("low_hz", b.low_hz);
  s.get("high_hz", b.high_hz);
  s.get("order", b.order);
  s.finish();
}

inline json write_band(const signal::BandSpec& b) {
  return {{"low_hz", b.low_hz}, {"high_hz", b.high_hz}, {"order", b.order}};
}

inline json resolve_reference(const json& j, const std::filesystem::path& base,
                              const std::string& path) {
  if (!j.is_string()) return j;
  const std::filesystem::path p = base / j.get<std::string>();
  std::ifstream in(p);
  if (!in) throw ConfigError(path + ": cannot open referenced file " + p.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + p.string() + ": " + e.what());
  }
}

inline void read_victim(const json& j, const std::string& path, victim::VictimConfig& v) {
  Section s(j, path);
  s.get("gyro_rate", v.gyro_rate);
  if (const json* p = s.child("plant")) {
    Section ps(*p, path + ".plant");
    auto& pl = v.plant;
    ps.get("controller_gain", pl.controller_gain);
    ps.get("motor_time_constant", pl.motor_time_constant);
    ps.get("max_speed", pl.max_speed);
    ps.get("torque", pl.torque);
    ps.get("yaw_coupling", pl.yaw_coupling);
    if (const json* b = ps.child("emanation_band")) read_band(*b, ps.path("emanation_band"), pl.emanation_band);
    ps.get("emanation_power_ratio", pl.emanation_power_ratio);
    ps.get("noise_floor", pl.noise_floor);
    ps.get("acoustic_rate", pl.acoustic_rate);
    ps.get("tone_count", pl.tone_count);
    ps.get("tone_weight_exponent", pl.tone_weight_exponent);
    ps.get("tone_grid_hz", pl.tone_grid_hz);
    ps.get("tone_shift_bins", pl.tone_shift_bins);
    ps.get("tone_width_bins", pl.tone_width_bins);
    ps.get("emission_block_steps", pl.emission_block_steps);
    ps.finish();
  }
  if (const json* d = s.child("drift")) {
    Section ds(*d, path + ".drift");
    ds.get("jitter_sigma_s", v.drift.jitter_sigma_s);
    ds.get("bias_walk_sigma_s", v.drift.bias_walk_sigma_s);
    ds.get("initial_bias_s", v.drift.initial_bias_s);
    ds.get("max_bias_s", v.drift.max_bias_s);
    ds.get("seed", v.drift.seed);
    ds.finish();
  }
  if (const json* t = s.child("transduction")) {
    Section ts(*t, path + ".transduction");
    ts.get("resonant_center_hz", v.transduction.resonant_center_hz);
    ts.get("half_width_hz", v.transduction.half_width_hz);
    ts.get("cutoff_hz", v.transduction.cutoff_hz);
    ts.get("peak_gain_dps", v.transduction.peak_gain_dps);
    ts.finish();
  }
  if (const json* c = s.child("command_profile")) {
    if (!c->is_array()) throw ConfigError(path + ".command_profile: expected a list");
    v.command_profile.clear();
    for (std::size_t i = 0; i < c->size(); ++i) {
      const std::string ip = path + ".command_profile[" + std::to_string(i) + "]";
      victim::CommandPoint pt;
      Section cs((*c)[i], ip);
      cs.get("time", pt.time);
      cs.get("command", pt.command);
      cs.finish();
      v.command_profile.push_back(pt);
    }
  }
  s.finish();
}

inline json write_victim(const victim::VictimConfig& v) {
  const auto& pl = v.plant;
  json profile = json::array();
  for (const auto& p : v.command_profile) profile.push_back({{"time", p.time}, {"command", p.command}});
  return {
      {"gyro_rate", v.gyro_rate},
      {"plant",
       {{"controller_gain", pl.controller_gain},
        {"motor_time_constant", pl.motor_time_constant},
        {"max_speed", pl.max_speed},
        {"torque", pl.torque},
        {"yaw_coupling", pl.yaw_coupling},
        {"emanation_band", write_band(pl.emanation_band)},
        {"emanation_power_ratio", pl.emanation_power_ratio},
        {"noise_floor", pl.noise_floor},
        {"acoustic_rate", pl.acoustic_rate},
        {"tone_count", pl.tone_count},
        {"tone_weight_exponent", pl.tone_weight_exponent},
        {"tone_grid_hz", pl.tone_grid_hz},
        {"tone_shift_bins", pl.tone_shift_bins},
        {"tone_width_bins", pl.tone_width_bins},
        {"emission_block_steps", pl.emission_block_steps}}},
      {"drift",
       {{"jitter_sigma_s", v.drift.jitter_sigma_s},
        {"bias_walk_sigma_s", v.drift.bias_walk_sigma_s},
        {"initial_bias_s", v.drift.initial_bias_s},
        {"max_bias_s", v.drift.max_bias_s},
        {"seed", v.drift.seed}}},
      {"transduction",
       {{"resonant_center_hz", v.transduction.resonant_center_hz},
        {"half_width_hz", v.transduction.half_width_hz},
        {"cutoff_hz", v.transduction.cutoff_hz},
        {"peak_gain_dps", v.transduction.peak_gain_dps}}},
      {"command_profile", profile}};
}

inline void read_attack(const json& j, const std::string& path, attack::LoopConfig& a) {
  Section s(j, path);
  std::string mode = attack::to_string(a.mode);
  s.get("mode", mode);
  guarded(path + ".mode", [&] { a.mode = attack::parse_loop_mode(mode); });
  std::string exec = attack::to_string(a.execution);
  s.get("execution", exec);
  guarded(path + ".execution", [&] { a.execution = attack::parse_execution_mode(exec); });
  s.get("injection_start", a.injection_start);
  s.get("control_start", a.control_start);
  s.get("oscillate_carrier", a.oscillate_carrier);
  s.get("oscillate_amplitude", a.oscillate_amplitude);
  s.get("loop_delay", a.loop_delay);
  s.get("realtime", a.realtime);
  s.get("queue_capacity", a.queue_capacity);

  if (const json* f = s.child("feedback")) {
    Section fs(*f, path + ".feedback");
    if (const json* b = fs.child("band")) read_band(*b, fs.path("band"), a.feedback.band);
    fs.get("frame_length", a.feedback.frame_length);
    fs.get("weights", a.feedback.weights);
    std::string window = signal::to_string(a.feedback.window);
    fs.get("window", window);
    guarded(fs.path("window"), [&] { a.feedback.window = signal::parse_window_kind(window); });
    fs.finish();
    if (a.feedback.weights.empty()) throw ConfigError(fs.path("weights") + ": must not be empty");
  }
  if (const json* w = s.child("switching")) {
    Section ws(*w, path + ".switching");
    auto& c = a.switching;
    ws.get("alpha_th", c.alpha);
    ws.get("beta_th", c.beta);
    ws.get("initial_step", c.initial_step);
    ws.get("min_step", c.min_step);
    ws.get("gamma", c.gamma);
    ws.get("base_carrier", c.base_carrier);
    ws.get("amplitude", c.amplitude);
    ws.get("peak_decay", c.peak_decay);
    ws.get("drift_gain", c.drift_gain);
    ws.finish();
    guarded(path + ".switching", [&] { c.validate(); });
  }
  if (const json* w = s.child("side_swing")) {
    Section ws(*w, path + ".side_swing");
    auto& c = a.side_swing;
    ws.get("high_amplitude", c.high_amplitude);
    ws.get("low_amplitude", c.low_amplitude);
    ws.get("window_N", c.window_N);
    ws.get("probe_cycles", c.probe_cycles);
    ws.get("probe_margin", c.probe_margin);
    ws.get("sync_gain", c.sync_gain);
    ws.get("period_gain", c.period_gain);
    ws.get("expected_period", c.expected_period);
    ws.get("ramp_time", c.ramp_time);
    ws.get("hysteresis", c.hysteresis);
    ws.get("feedback_lag", c.feedback_lag);
    ws.finish();
    guarded(path + ".side_swing", [&] { c.validate(); });
  }
  s.finish();
}

inline json write_attack(const attack::LoopConfig& a) {
  const auto& w = a.switching;
  const auto& ss = a.side_swing;
  return {{"mode", attack::to_string(a.mode)},
          {"execution", attack::to_string(a.execution)},
          {"injection_start", a.injection_start},
          {"control_start", a.control_start},
          {"oscillate_carrier", a.oscillate_carrier},
          {"oscillate_amplitude", a.oscillate_amplitude},
          {"loop_delay", a.loop_delay},
          {"realtime", a.realtime},
          {"queue_capacity", a.queue_capacity},
          {"feedback",
           {{"band", write_band(a.feedback.band)},
            {"frame_length", a.feedback.frame_length},
            {"weights", a.feedback.weights},
            {"window", signal::to_string(a.feedback.window)}}},
          {"switching",
           {{"alpha_th", w.alpha},
            {"beta_th", w.beta},
            {"initial_step", w.initial_step},
            {"min_step", w.min_step},
            {"gamma", w.gamma},
            {"base_carrier", w.base_carrier},
            {"amplitude", w.amplitude},
            {"peak_decay", w.peak_decay},
            {"drift_gain", w.drift_gain}}},
          {"side_swing",
           {{"high_amplitude", ss.high_amplitude},
            {"low_amplitude", ss.low_amplitude},
            {"window_N", ss.window_N},
            {"probe_cycles", ss.probe_cycles},
            {"probe_margin", ss.probe_margin},
            {"sync_gain", ss.sync_gain},
            {"period_gain", ss.period_gain},
            {"expected_period", ss.expected_period},
            {"ramp_time", ss.ramp_time},
            {"hysteresis", ss.hysteresis},
            {"feedback_lag", ss.feedback_lag}}}};
}

}  // namespace detail

/// Builds a scenario from JSON. Missing keys keep their defaults; unknown
/// keys, wrong types and invalid values raise ConfigError naming the field.
/// String values for "victim" or "attack" name JSON files relative to `base`.
inline Scenario scenario_from_json(const json& j, const std::filesystem::path& base = {}) {
  Scenario sc;
  detail::Section s(j, "scenario");
  s.get("name", sc.name);
  s.get("description", sc.description);
  s.get("seed", sc.seed);
  s.get("duration", sc.duration);
  if (const json* v = s.child("victim")) {
    detail::read_victim(detail::resolve_reference(*v, base, "scenario.victim"), "scenario.victim",
                        sc.victim);
  }
  if (const json* a = s.child("attack")) {
    detail::read_attack(detail::resolve_reference(*a, base, "scenario.attack"), "scenario.attack",
                        sc.attack);
  }
  if (const json* p = s.child("procedure")) {
    if (!p->is_array()) throw ConfigError("scenario.procedure: expected a list");
    sc.attack.procedure.clear();
    for (std::size_t i = 0; i < p->size(); ++i) {
      const std::string ip = "scenario.procedure[" + std::to_string(i) + "]";
      detail::Section ps((*p)[i], ip);
      std::string goal;
      attack::ProcedurePhase ph;
      ps.get("goal", goal);
      ps.get("duration", ph.duration);
      ps.finish();
      detail::guarded(ip + ".goal", [&] { ph.goal = attack::parse_phase_goal(goal); });
      sc.attack.procedure.push_back(ph);
    }
  }
  if (const json* m = s.child("metrics")) {
    detail::Section ms(*m, "scenario.metrics");
    ms.get("target_sign", sc.metrics.target_sign);
    ms.get("trend_window", sc.metrics.trend_window);
    ms.get("trend_tolerance", sc.metrics.trend_tolerance);
    ms.get("theta_tolerance", sc.metrics.theta_tolerance);
    std::vector<double> win;
    ms.get("oscillation_window", win);
    if (!win.empty()) {
      if (win.size() != 2) throw ConfigError("scenario.metrics.oscillation_window: expected [start, end]");
      sc.metrics.oscillation_window = std::make_pair(win[0], win[1]);
    }
    ms.finish();
  }
  if (const json* o = s.child("outputs")) {
    detail::Section os(*o, "scenario.outputs");
    os.get("wav", sc.outputs.wav);
    os.get("spectrogram", sc.outputs.spectrogram);
    os.finish();
  }
  s.finish();
  sc.attack.duration = sc.duration;
  sc.validate();
  return sc;
}

inline Scenario load_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return scenario_from_json(j, path.parent_path());
}

/// The fully resolved scenario, every default spelled out.
inline json scenario_to_json(const Scenario& sc) {
  json procedure = json::array();
  for (const auto& p : sc.attack.procedure) {
    procedure.push_back({{"goal", attack::to_string(p.goal)}, {"duration", p.duration}});
  }
  json metrics = {{"target_sign", sc.metrics.target_sign},
                  {"trend_window", sc.metrics.trend_window},
                  {"trend_tolerance", sc.metrics.trend_tolerance},
                  {"theta_tolerance", sc.metrics.theta_tolerance}};
  if (sc.metrics.oscillation_window) {
    metrics["oscillation_window"] = {sc.metrics.oscillation_window->first,
                                     sc.metrics.oscillation_window->second};
  }
  return {{"name", sc.name},
          {"description", sc.description},
          {"seed", sc.seed},
          {"duration", sc.duration},
          {"victim", detail::write_victim(sc.victim)},
          {"attack", detail::write_attack(sc.attack)},
          {"procedure", procedure},
          {"metrics", metrics},
          {"outputs", {{"wav", sc.outputs.wav}, {"spectrogram", sc.outputs.spectrogram}}}};
}

}  // namespace adloop::harness
