#pragma once

#include <optional>
#include <string>

#include "adloop/error.hpp"

namespace adloop::attack {

enum class CommandKind { frequency_switch, amplitude_swing };

inline const char* to_string(CommandKind k) {
  return k == CommandKind::frequency_switch ? "frequency_switch" : "amplitude_swing";
}

inline CommandKind parse_command_kind(const std::string& s) {
  if (s == "frequency_switch") return CommandKind::frequency_switch;
  if (s == "amplitude_swing") return CommandKind::amplitude_swing;
  throw ConfigError("unknown command kind '" + s + "'");
}

/// A change to the injected carrier taking effect at issue_time.
struct AttackCommand {
  double issue_time = 0.0;
  std::optional<double> new_frequency;
  std::optional<double> new_amplitude;
  CommandKind kind = CommandKind::frequency_switch;

  void validate() const {
    if (!new_frequency && !new_amplitude) {
      throw InvariantError("attack command sets neither frequency nor amplitude");
    }
  }
};

}  // namespace adloop::attack
