#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "wifislam/channel.hpp"
#include "wifislam/geometry.hpp"

namespace wifislam {

// One access point: XY floor position plus mounting height in position.z().
struct ApSpec {
  std::string id;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
};

// Reflected-path synthesis: number of reflections per packet, their relative
// amplitude range, and whether they are redrawn for every packet (true) or
// pinned in the world frame once per AP (false).
struct MultipathSpec {
  int paths = 3;
  double amp_min = 0.1;
  double amp_max = 0.5;
  bool rerandomize = true;
};

// Per-step odometry corruption: isotropic Gaussian sigma on the translation
// (meters) and on the rotation vector (radians), plus a deterministic yaw
// drift rate in rad/s.
struct OdomNoiseSpec {
  double sigma_t = 0.0;
  double sigma_r = 0.0;
  double yaw_bias = 0.0;
};

// Everything needed to synthesize one run: path, robot kinematics, AP layout,
// radio parameters, and noise settings.
struct Scenario {
  std::string name = "scenario";
  std::vector<Eigen::Vector2d> waypoints;
  double speed = 1.0;
  double turn_rate = M_PI / 2.0;
  double odom_rate = 10.0;
  double csi_rate = 5.0;
  std::vector<ApSpec> aps;
  std::string array_type = "square";
  double array_side_lambda = 0.375;
  int array_count = 4;
  double array_spacing_lambda = 0.5;
  double center_freq_hz = 5.21e9;
  double bandwidth_hz = 40e6;
  int subcarriers = 32;
  MultipathSpec multipath;
  double csi_noise_std = 0.0;
  OdomNoiseSpec odom_noise;
  RssiModel rssi;
  std::uint64_t seed = 1;

  double wavelength() const { return kSpeedOfLight / center_freq_hz; }
  ArrayGeometry make_array() const;
};

// 25 x 30 m rectangular lap at 1 m/s with four APs just outside the walls;
// noiseless odometry. The drift variant adds per-step odometry noise and a
// steady yaw-rate bias.
Scenario lab25x30();
Scenario lab25x30_drift();

// Throws DataError on invalid rates, speeds, duplicate consecutive
// waypoints, or an unknown array type.
void validate_scenario(const Scenario& scn);

struct TruthSample {
  double t = 0.0;
  Pose pose;
};

// Continuous ground-truth trajectory: constant-speed straight segments joined
// by turn-in-place phases at the corners (shortest direction). Planar,
// yaw-only rotations; heading along the direction of travel.
class TruthTrajectory {
 public:
  struct Phase {
    double t0 = 0.0;
    double t1 = 0.0;
    Eigen::Vector2d pos = Eigen::Vector2d::Zero();
    Eigen::Vector2d dir = Eigen::Vector2d::UnitX();
    double speed = 0.0;
    double yaw0 = 0.0;
    double yaw_rate = 0.0;
  };

  explicit TruthTrajectory(std::vector<Phase> phases);

  double duration() const;
  Pose pose_at(double t) const;

 private:
  std::vector<Phase> phases_;
};

TruthTrajectory build_trajectory(const Scenario& scn);

// Trajectory sampled on the odometry clock, endpoints inclusive.
std::vector<TruthSample> generate_truth(const Scenario& scn);

// Relative odometry between consecutive truth poses with additive Gaussian
// noise and the yaw bias folded in by exact quaternion composition. Exactly
// six normal draws per step regardless of which sigmas are zero, so the
// stream is stable when individual noise terms are toggled.
std::vector<Tangent6> corrupt_odometry(const std::vector<TruthSample>& truth,
                                       const OdomNoiseSpec& noise,
                                       std::uint64_t seed);

// Unit quaternion for a rotation vector (axis * angle).
Eigen::Quaterniond quat_from_rotvec(const Eigen::Vector3d& v);

struct SimPacket {
  CsiPacket packet;
  double true_azimuth = 0.0;
};

// Per-AP CSI at csi_rate along the trajectory: direct path at the true
// azimuth and 3D range plus configured reflections, fresh packet phase each
// time, RSSI from the direct path length. Each AP has its own RNG stream
// (seed ^ fnv1a64(ap_id)); the merged result is ordered by (t, ap_id).
std::vector<SimPacket> generate_csi_stream(const Scenario& scn,
                                           const TruthTrajectory& traj);

// Plain key = value text, with repeated `waypoint = x, y` and
// `ap = id, x, y, height` lines. parse accepts blank lines and # comments;
// unknown keys are data errors. write emits a fixed field order at full
// precision so identical scenarios serialize identically.
Scenario parse_scenario(const std::string& text);
std::string write_scenario(const Scenario& scn);

}  // namespace wifislam
