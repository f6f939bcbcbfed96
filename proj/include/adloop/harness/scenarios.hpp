#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "adloop/error.hpp"
#include "adloop/harness/config.hpp"

namespace adloop::harness {

struct BuiltinScenario {
  const char* name;
  const char* summary;
  const char* json;
};

/// Bundled scenarios. Each is a partial configuration; everything omitted
/// takes the library default. The same text ships under scenarios/.
inline const std::vector<BuiltinScenario>& builtin_scenarios() {
  static const std::vector<BuiltinScenario> list{
      {"baseline-silent", "no injection; the victim stays put and the feedback is the noise floor",
       R"({
  "name": "baseline-silent",
  "description": "Observe only. No carrier is injected.",
  "seed": 1,
  "duration": 10,
  "attack": {"mode": "observe"}
})"},
      {"fig6-ramp-correlation",
       "scripted motor ramp up, hold and down; feedback should track |rpm|",
       R"({
  "name": "fig6-ramp-correlation",
  "description": "Motor command ramps 0 -> 1 -> 0 while the attacker only listens.",
  "seed": 1,
  "duration": 20,
  "victim": {
    "command_profile": [
      {"time": 1.0, "command": 0.0},
      {"time": 7.0, "command": 1.0},
      {"time": 11.0, "command": 1.0},
      {"time": 17.0, "command": 0.0}
    ]
  },
  "attack": {"mode": "observe"}
})"},
      {"fig8-switching",
       "silence, then a fixed 19000.8 Hz carrier, then automatic Switching from 19 s",
       R"({
  "name": "fig8-switching",
  "description": "Oscillation phase 5-19 s at eps = 0.8 Hz, Switching afterwards.",
  "seed": 1,
  "duration": 60,
  "attack": {
    "mode": "switching",
    "injection_start": 5.0,
    "control_start": 19.0,
    "oscillate_carrier": 19000.8,
    "switching": {"alpha_th": 0.995, "base_carrier": 18999.25}
  },
  "metrics": {"oscillation_window": [5.0, 19.0]}
})"},
      {"fig9-sideswing-procedure",
       "Side-Swing amplitude toggling through spin_up, hold, slow_down, spin_up",
       R"({
  "name": "fig9-sideswing-procedure",
  "description": "Oscillation from 2 s, programmed Side-Swing procedure from 12 s.",
  "seed": 1,
  "duration": 50,
  "attack": {
    "mode": "procedure",
    "injection_start": 2.0,
    "control_start": 12.0,
    "oscillate_carrier": 19000.8,
    "side_swing": {"expected_period": 1.25, "feedback_lag": -1}
  },
  "procedure": [
    {"goal": "spin_up", "duration": 10},
    {"goal": "hold", "duration": 8},
    {"goal": "slow_down", "duration": 10},
    {"goal": "spin_up", "duration": 10}
  ]
})"},
      {"drift-stress", "Switching with sampling-interval drift well above the default",
       R"({
  "name": "drift-stress",
  "description": "fig8-switching with heavier timing jitter and a faster-wandering interval bias.",
  "seed": 1,
  "duration": 60,
  "victim": {
    "drift": {"jitter_sigma_s": 3e-6, "bias_walk_sigma_s": 5e-11, "max_bias_s": 3e-7}
  },
  "attack": {
    "mode": "switching",
    "injection_start": 5.0,
    "control_start": 19.0,
    "oscillate_carrier": 19000.8,
    "switching": {"alpha_th": 0.995, "base_carrier": 18999.25, "drift_gain": 0.1}
  },
  "metrics": {"oscillation_window": [5.0, 19.0]}
})"},
  };
  return list;
}

inline const BuiltinScenario* find_builtin(const std::string& name) {
  for (const auto& b : builtin_scenarios()) {
    if (name == b.name) return &b;
  }
  return nullptr;
}

inline Scenario builtin_scenario(const std::string& name) {
  const auto* b = find_builtin(name);
  if (!b) throw ConfigError("unknown builtin scenario '" + name + "'");
  return scenario_from_json(nlohmann::json::parse(b->json));
}

/// A builtin name or a path to a scenario file.
inline Scenario resolve_scenario(const std::string& ref) {
  if (find_builtin(ref)) return builtin_scenario(ref);
  if (std::filesystem::exists(ref)) return load_scenario_file(ref);
  throw ConfigError("'" + ref + "' is neither a builtin scenario nor a readable file "
                    "(see list-scenarios)");
}

}  // namespace adloop::harness
