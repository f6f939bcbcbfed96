#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "adloop/error.hpp"
#include "adloop/harness/csv.hpp"
#include "adloop/harness/metrics.hpp"
#include "adloop/harness/run.hpp"
#include "adloop/harness/scenarios.hpp"

namespace fs = std::filesystem;
using namespace adloop;

namespace {

signal::BandSpec parse_band(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("--band expects LOW:HIGH in Hz, got '" + text + "'");
  signal::BandSpec b;
  try {
    b.low_hz = std::stod(text.substr(0, colon));
    b.high_hz = std::stod(text.substr(colon + 1));
  } catch (const std::exception&) {
    throw ConfigError("--band expects LOW:HIGH in Hz, got '" + text + "'");
  }
  return b;
}

fs::path env_out_base() {
  const char* env = std::getenv("ADLOOP_OUT_DIR");
  return env && *env ? fs::path(env) : fs::path("adloop-runs");
}

int cmd_simulate(const std::string& ref, std::optional<std::uint64_t> seed,
                 const std::string& out) {
  harness::Scenario sc = harness::resolve_scenario(ref);
  if (seed) sc.seed = *seed;
  const fs::path dir = out.empty() ? harness::default_output_dir(sc) : fs::path(out);
  const auto report = harness::run_scenario(sc, dir);
  std::cout << report.directory.string() << '\n';
  std::cout << report.json["metrics"].dump(2) << '\n';
  return 0;
}

int cmd_analyze(const std::string& wav, const std::string& band, std::size_t frame, int order,
                const std::string& window, const std::string& out) {
  attack::FeedbackConfig cfg;
  cfg.band = parse_band(band);
  cfg.band.order = order;
  cfg.frame_length = frame;
  cfg.window = signal::parse_window_kind(window);
  const auto res = harness::analyze_recording(wav, cfg);
  const fs::path dir = out.empty() ? env_out_base() / ("analyze-" + fs::path(wav).stem().string())
                                   : fs::path(out);
  fs::create_directories(dir);
  harness::write_feedback_csv(dir / "feedback.csv", res.feedback);
  harness::write_spectrogram_csv(dir / "spectrogram.csv", res.spectra);
  double lo = 0.0, hi = 0.0, mean = 0.0;
  if (!res.feedback.smoothed.empty()) {
    lo = hi = res.feedback.smoothed.front();
    for (double v : res.feedback.smoothed) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      mean += v;
    }
    mean /= static_cast<double>(res.feedback.smoothed.size());
  }
  const nlohmann::json summary = {{"sample_rate", res.info.sample_rate},
                                  {"channels", res.info.channels},
                                  {"frames", res.feedback.raw.size()},
                                  {"update_time_s", res.feedback.chunk_duration},
                                  {"y0_min", lo},
                                  {"y0_mean", mean},
                                  {"y0_max", hi},
                                  {"output", dir.string()}};
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_metrics(const std::string& trace_path, const std::string& telemetry_path, int target) {
  const auto trace = harness::read_trace_csv(trace_path);
  const auto telemetry = harness::read_telemetry_csv(telemetry_path);
  harness::MetricsOptions opt;
  opt.target_sign = target;
  double frame = 4096.0 / 44100.0;
  if (telemetry.size() >= 2) frame = telemetry[1].time - telemetry[0].time;
  const auto m = harness::compute_metrics(trace, telemetry, opt, frame);
  std::cout << harness::metrics_to_json(m).dump(2) << '\n';
  return 0;
}

int cmd_list() {
  for (const auto& b : harness::builtin_scenarios()) {
    std::printf("%-26s %s\n", b.name, b.summary);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adloop: adversarial control loop simulator and acoustic feedback analyzer"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "run a scenario file or builtin scenario");
  std::string sim_ref, sim_out;
  std::optional<std::uint64_t> sim_seed;
  sim->add_option("scenario", sim_ref, "scenario JSON file or builtin name")->required();
  sim->add_option("--seed", sim_seed, "override the scenario seed");
  sim->add_option("--out", sim_out, "output directory (default $ADLOOP_OUT_DIR/<name>-seed<N>)");

  auto* ana = app.add_subcommand("analyze", "extract feedback from a WAV recording");
  std::string wav, band, ana_out, window = "rectangular";
  std::size_t frame = 4096;
  int order = 4;
  ana->add_option("wav", wav, "input WAV (PCM16 or float32)")->required();
  ana->add_option("--band", band, "band-pass edges LOW:HIGH in Hz")->required();
  ana->add_option("--frame", frame, "frame length in samples")->capture_default_str();
  ana->add_option("--order", order, "Butterworth prototype order")->capture_default_str();
  ana->add_option("--window", window, "rectangular or hann")->capture_default_str();
  ana->add_option("--out", ana_out, "output directory");

  auto* met = app.add_subcommand("metrics", "compute metrics from exported CSV files");
  std::string trace_path, telemetry_path;
  int target = 0;
  met->add_option("trace", trace_path, "victim_trace.csv")->required();
  met->add_option("telemetry", telemetry_path, "telemetry.csv")->required();
  met->add_option("--target-sign", target, "-1, 1, or 0 for the final-half sign")->capture_default_str();

  auto* list = app.add_subcommand("list-scenarios", "list bundled scenarios");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*sim) return cmd_simulate(sim_ref, sim_seed, sim_out);
    if (*ana) return cmd_analyze(wav, band, frame, order, window, ana_out);
    if (*met) return cmd_metrics(trace_path, telemetry_path, target);
    if (*list) return cmd_list();
  } catch (const adloop::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
