#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "wifislam/errors.hpp"
#include "wifislam/pipeline.hpp"

// Pipeline driver. Exit codes: 0 ok, 1 usage, 2 data error, 3 numerical
// failure. Each stage writes into the run directory given by --out; partial
// outputs of a failed stage stay quarantined in a "<stage>.partial"
// subdirectory.

int main(int argc, char** argv) {
  CLI::App app{"WiFi-bearing SLAM pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string estimator = "pcab";
  std::string mode = "incremental";
  double grid_step_deg = 1.0;
  double rssi_threshold = -65.0;
  double huber_c = 1.345;

  CLI::App* simulate =
      app.add_subcommand("simulate", "Generate truth, odometry, and CSI traces");
  simulate->add_option("--config", config_path, "Scenario config file")
      ->required();
  simulate->add_option("--out", out_dir, "Run directory to create")->required();
  simulate->add_option("--seed", seed, "Override the scenario seed")
      ->each([&](const std::string&) { seed_set = true; });

  CLI::App* bearings = app.add_subcommand(
      "bearings", "Estimate per-packet bearings from the CSI trace");
  bearings->add_option("--out", out_dir, "Run directory")->required();
  bearings->add_option("--estimator", estimator, "Bearing estimator")
      ->check(CLI::IsMember({"pcab", "grid2d"}));
  bearings->add_option("--grid-step-deg", grid_step_deg,
                       "Angle grid step in degrees");
  bearings->add_option("--rssi-threshold", rssi_threshold,
                       "Drop packets below this RSSI (dBm)");

  CLI::App* slam = app.add_subcommand(
      "slam", "Optimize the pose/AP factor graph over the merged streams");
  slam->add_option("--out", out_dir, "Run directory")->required();
  slam->add_option("--mode", mode, "Solve schedule")
      ->check(CLI::IsMember({"incremental", "batch", "fixed-lag"}));
  slam->add_option("--estimator", estimator,
                   "Bearing source: an estimator's output or the exact "
                   "simulated azimuths")
      ->check(CLI::IsMember({"pcab", "grid2d", "truth"}));
  slam->add_option("--huber-c", huber_c, "Robust cost knee");
  slam->add_option("--seed", seed, "Override the landmark-init seed")
      ->each([&](const std::string&) { seed_set = true; });

  CLI::App* eval =
      app.add_subcommand("eval", "Score a run and emit plot-ready CSVs");
  eval->add_option("--out", out_dir, "Run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const std::optional<std::uint64_t> seed_override =
      seed_set ? std::optional<std::uint64_t>(seed) : std::nullopt;

  try {
    if (simulate->parsed()) {
      wifislam::cmd_simulate(config_path, seed_override, out_dir);
    } else if (bearings->parsed()) {
      wifislam::cmd_bearings(out_dir, estimator, grid_step_deg, rssi_threshold);
    } else if (slam->parsed()) {
      wifislam::cmd_slam(out_dir, mode, estimator, huber_c, seed_override);
    } else if (eval->parsed()) {
      wifislam::cmd_eval(out_dir);
    }
  } catch (const wifislam::NumericalError& e) {
    std::cerr << "wifislam: " << e.what() << std::endl;
    return 3;
  } catch (const wifislam::DataError& e) {
    std::cerr << "wifislam: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "wifislam: " << e.what() << std::endl;
    return 2;
  }
  return 0;
}
