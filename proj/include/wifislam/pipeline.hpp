#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "wifislam/bearing.hpp"
#include "wifislam/graph.hpp"
#include "wifislam/trace_io.hpp"

// Event-driven SLAM frontend: feeds odometry ticks, RSSI samples, and gated
// bearing measurements into the factor graph, initializes AP landmarks from
// RSSI inflections, and schedules solves. The cmd_* functions are the stage
// drivers behind the CLI subcommands; each stages its outputs in a sibling
// "<dir>.partial" directory and renames it into place only on success, so a
// failed stage leaves the run directory untouched apart from the quarantined
// partial.

namespace wifislam {

enum class SlamMode { kBatch, kIncremental, kFixedLag };

SlamMode parse_slam_mode(const std::string& name);

struct PipelineOptions {
  SlamMode mode = SlamMode::kIncremental;
  int solve_every_bearings = 25;
  int lag_window = 200;
  double huber_c = 1.345;
  double default_sigma_rad = kDefaultBearingSigmaRad;
  Vector6d odom_sigma = Vector6d::Constant(1e-6);  // variances
  std::uint64_t seed = 1;
};

struct SolveRecord {
  int solve_index = 0;
  double t = 0.0;  // timestamp of the triggering event
  SolveStats stats;
  std::size_t num_poses = 0;
  std::size_t num_aps = 0;
  std::size_t num_bearing_factors = 0;
};

// One row of the merged input stream. Kinds order equal-timestamp events:
// the pose tick lands before the measurements that attach to it.
struct StreamEvent {
  static constexpr int kOdometry = 0;
  static constexpr int kRssi = 1;
  static constexpr int kBearing = 2;

  double t = 0.0;
  int kind = kOdometry;
  std::string ap_id;
  Tangent6 odom_z;
  double rssi = 0.0;
  double theta_rad = 0.0;
  double sigma_rad = 0.0;
};

std::vector<StreamEvent> merge_streams(const std::vector<OdomRecord>& odom,
                                       const std::vector<RssiRecord>& rssi,
                                       const std::vector<BearingRecord>& bearings);

class SlamPipeline {
 public:
  SlamPipeline(const Pose& start, double start_time, PipelineOptions opts);

  void on_event(const StreamEvent& e);
  void on_odometry(double t, const Tangent6& z);
  void on_rssi(double t, const std::string& ap_id, double rssi);
  void on_bearing(double t, const std::string& ap_id, double theta_rad,
                  double sigma_rad);

  // Final solve: the only solve in batch mode, a flush otherwise.
  void finish();

  const GraphState& state() const { return state_; }
  const std::vector<SolveRecord>& log() const { return log_; }

  std::vector<TimedPose> trajectory() const;
  std::vector<ApRecord> ap_estimates() const;

  // Invoked after every solve with the freshly updated state.
  std::function<void(const SlamPipeline&, const SolveRecord&)> on_solve;

 private:
  int nearest_pose_index(double t) const;
  void attach_bearing_factor(int pose_index, const std::string& ap_id,
                             double theta_rad, double sigma_rad);
  void solve(double t);

  PipelineOptions opts_;
  GraphState state_;
  std::mt19937_64 rng_;
  RssiTracker tracker_;
  std::map<std::string, std::vector<BearingRecord>> pending_;
  std::vector<SolveRecord> log_;
  int bearings_since_solve_ = 0;
  int next_solve_index_ = 0;
  double last_event_time_ = 0.0;
};

// Stage drivers. All throw DataError / NumericalError on failure.
void cmd_simulate(const std::filesystem::path& config_path,
                  std::optional<std::uint64_t> seed_override,
                  const std::filesystem::path& out_dir);

void cmd_bearings(const std::filesystem::path& run_dir,
                  const std::string& estimator, double grid_step_deg,
                  double rssi_threshold_dbm);

void cmd_slam(const std::filesystem::path& run_dir, const std::string& mode,
              const std::string& bearings_source, double huber_c,
              std::optional<std::uint64_t> seed_override);

void cmd_eval(const std::filesystem::path& run_dir);

}  // namespace wifislam
