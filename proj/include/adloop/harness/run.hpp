#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "adloop/attack/feedback.hpp"
#include "adloop/attack/loop.hpp"
#include "adloop/error.hpp"
#include "adloop/harness/config.hpp"
#include "adloop/harness/csv.hpp"
#include "adloop/harness/metrics.hpp"
#include "adloop/signal/wav.hpp"
#include "adloop/victim/victim.hpp"

namespace adloop::harness {

/// Exposes a simulated victim through the two black-box channels only.
class SimulatedVictimPort final : public attack::VictimPort {
 public:
  SimulatedVictimPort(victim::VictimSimulator& sim, bool record_audio)
      : sim_(sim), record_(record_audio) {
    audio_.sample_rate = sim.config().plant.acoustic_rate;
  }

  [[nodiscard]] double acoustic_rate() const override { return audio_.sample_rate; }

  signal::SampleChunk next_acoustic_block() override {
    auto chunk = sim_.advance_block();
    if (record_) audio_.samples.insert(audio_.samples.end(), chunk.samples.begin(), chunk.samples.end());
    return chunk;
  }

  void submit(const attack::AttackCommand& cmd) override {
    cmd.validate();
    sim_.set_injection(cmd.issue_time, cmd.new_frequency, cmd.new_amplitude);
  }

  [[nodiscard]] const signal::SampleChunk& audio() const noexcept { return audio_; }

 private:
  victim::VictimSimulator& sim_;
  bool record_;
  signal::SampleChunk audio_;
};

inline MetricsOptions metrics_options(const Scenario& sc) { return sc.metrics; }

struct RunResult {
  std::vector<victim::TraceRow> trace;
  attack::LoopTelemetry telemetry;
  signal::SampleChunk audio;  // empty unless recorded
  Metrics metrics;
  double initial_phase = 0.0;
};

/// Runs the closed loop for a scenario in memory.
inline RunResult simulate(const Scenario& sc, bool record_audio = false) {
  sc.validate();
  victim::VictimSimulator sim(sc.victim, sc.seed);
  SimulatedVictimPort port(sim, record_audio);
  attack::LoopConfig loop = sc.attack;
  loop.duration = sc.duration;
  RunResult r;
  r.telemetry = attack::run_attack_loop(port, loop);
  r.trace = sim.trace();
  r.audio = port.audio();
  r.initial_phase = sim.initial_phase();
  r.metrics = compute_metrics(r.trace, r.telemetry.rows, sc.metrics, r.telemetry.tick);
  return r;
}

struct ReplayResult {
  std::vector<victim::TraceRow> trace;
  signal::SampleChunk audio;
};

/// Applies a recorded command log to a fresh victim, open loop.
inline ReplayResult replay_commands(const victim::VictimConfig& cfg, std::uint64_t seed,
                                    const std::vector<attack::AttackCommand>& commands,
                                    double duration) {
  victim::VictimSimulator sim(cfg, seed);
  SimulatedVictimPort port(sim, true);
  for (const auto& c : commands) port.submit(c);
  ReplayResult r;
  for (;;) {
    const auto chunk = port.next_acoustic_block();
    if (chunk.end_time() >= duration - 1e-9) break;
  }
  r.trace = sim.trace();
  r.audio = port.audio();
  return r;
}

struct RecordingAnalysis {
  signal::WavInfo info;
  signal::FeedbackSeries feedback;
  std::vector<attack::FeedbackExtractor::BandSpectrum> spectra;
};

/// Offline feedback extraction over a WAV file.
inline RecordingAnalysis analyze_recording(const std::filesystem::path& wav_path,
                                           const attack::FeedbackConfig& cfg) {
  auto wav = signal::read_wav(wav_path.string());
  try {
    cfg.band.validate_for(wav.info.sample_rate);
  } catch (const SignalError& e) {
    throw ConfigError(std::string("band: ") + e.what());
  }
  if (wav.mono.samples.size() < cfg.frame_length) {
    throw SignalError("recording has " + std::to_string(wav.mono.samples.size()) +
                      " samples, fewer than one frame of " + std::to_string(cfg.frame_length));
  }
  attack::FeedbackExtractor ex(cfg, wav.info.sample_rate);
  ex.keep_spectra(true);
  ex.push(wav.mono);
  RecordingAnalysis out;
  out.info = wav.info;
  out.feedback = ex.series();
  out.spectra = ex.spectra();
  return out;
}

inline nlohmann::json metrics_to_json(const Metrics& m) {
  using nlohmann::json;
  const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json phases = json::array();
  for (const auto& p : m.phases) {
    json pj = {{"goal", attack::to_string(p.window.goal)},
               {"start_s", p.window.start},
               {"end_s", p.window.end},
               {"conformance", p.conformance},
               {"samples", p.samples}};
    pj["theta_monotone"] = p.theta_monotone ? json(*p.theta_monotone) : json(nullptr);
    phases.push_back(pj);
  }
  json j = {{"correlation", opt(m.correlation)},
            {"correlation_defined", m.correlation.has_value()},
            {"directionality", m.directionality},
            {"target_sign", m.target_sign},
            {"final_mean_speed_rpm", m.final_mean_speed},
            {"peak_speed_rpm", m.peak_speed},
            {"final_mean_fraction_of_peak", m.final_mean_fraction},
            {"oscillation_mean_rpm", m.oscillation_mean},
            {"oscillation_peak_rpm", m.oscillation_peak},
            {"phase_conformance", phases},
            {"reliable", m.reliable},
            {"notes", m.notes}};
  j["dominant_frequency_hz"] = m.dominant ? json(m.dominant->frequency) : json(nullptr);
  j["dominant_bin_width_hz"] = m.dominant ? json(m.dominant->bin_width) : json(nullptr);
  return j;
}

struct RunReport {
  std::string scenario;
  std::filesystem::path directory;
  nlohmann::json json;
};

/// The output directory for a run when --out is not given.
inline std::filesystem::path default_output_dir(const Scenario& sc) {
  const char* env = std::getenv("ADLOOP_OUT_DIR");
  const std::filesystem::path base = env && *env ? env : "adloop-runs";
  return base / (sc.name + "-seed" + std::to_string(sc.seed));
}

/// Runs a scenario and writes every artifact into `out_dir`. Files are
/// assembled in a sibling temporary directory and moved into place only
/// once all of them exist, so a failed run leaves no partial output.
inline RunReport run_scenario(const Scenario& sc, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  const RunResult r = simulate(sc, sc.outputs.wav || sc.outputs.spectrogram);

  const fs::path target = fs::absolute(out_dir);
  std::error_code ec;
  fs::create_directories(target.parent_path(), ec);
  if (ec) throw IoError("cannot create " + target.parent_path().string() + ": " + ec.message());
  std::random_device rd;
  const fs::path tmp = target.parent_path() /
                       ("." + target.filename().string() + ".tmp" + std::to_string(rd()));
  fs::create_directory(tmp, ec);
  if (ec) throw IoError("cannot create " + tmp.string() + ": " + ec.message());

  RunReport report;
  report.scenario = sc.name;
  report.directory = target;
  try {
    write_trace_csv(tmp / "victim_trace.csv", r.trace);
    write_telemetry_csv(tmp / "telemetry.csv", r.telemetry.rows);
    write_commands_csv(tmp / "commands.csv", r.telemetry.commands);
    write_feedback_csv(tmp / "feedback.csv", r.telemetry.feedback);
    std::vector<std::string> artifacts{"victim_trace.csv", "telemetry.csv", "commands.csv",
                                       "feedback.csv"};
    if (sc.outputs.wav) {
      signal::write_wav((tmp / "acoustic.wav").string(), r.audio.samples, r.audio.sample_rate);
      artifacts.emplace_back("acoustic.wav");
    }
    if (sc.outputs.spectrogram) {
      attack::FeedbackExtractor ex(sc.attack.feedback, r.audio.sample_rate);
      ex.keep_spectra(true);
      ex.push(r.audio);
      write_spectrogram_csv(tmp / "spectrogram.csv", ex.spectra());
      artifacts.emplace_back("spectrogram.csv");
    }

    nlohmann::json switches = nlohmann::json::array();
    for (const auto& e : r.telemetry.switch_events) {
      switches.push_back({{"time_s", e.time},
                          {"issue_time_s", e.issue_time},
                          {"old_hz", e.old_frequency},
                          {"new_hz", e.new_frequency},
                          {"step_hz", e.step}});
    }
    nlohmann::json periods = nlohmann::json::array();
    for (const auto& [t, p] : r.telemetry.period_estimates) periods.push_back({t, p});

    report.json = {{"scenario", sc.name},
                   {"seed", sc.seed},
                   {"metrics", metrics_to_json(r.metrics)},
                   {"artifacts", artifacts},
                   {"telemetry",
                    {{"feedback_samples", r.telemetry.rows.size()},
                     {"commands", r.telemetry.commands.size()},
                     {"switch_events", switches},
                     {"step_history_hz", r.telemetry.step_history},
                     {"period_estimates", periods},
                     {"latency_violations", r.telemetry.latency_violations}}},
                   {"initial_phase_rad", r.initial_phase},
                   {"config", scenario_to_json(sc)}};
    {
      std::ofstream out(tmp / "report.json", std::ios::binary);
      if (!out) throw IoError("cannot write report.json");
      out << report.json.dump(2) << '\n';
      if (!out) throw IoError("failed writing report.json");
    }

    if (fs::exists(target)) {
      const fs::path old = target.parent_path() / ("." + target.filename().string() + ".old" +
                                                    std::to_string(rd()));
      fs::rename(target, old);
      fs::rename(tmp, target);
      fs::remove_all(old);
    } else {
      fs::rename(tmp, target);
    }
  } catch (...) {
    fs::remove_all(tmp, ec);
    throw;
  }
  return report;
}

}  // namespace adloop::harness
