#pragma once

#include <Eigen/Core>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "wifislam/geometry.hpp"

namespace wifislam {

// Between-factor on consecutive poses. sigma is the diagonal of the 6x6
// measurement covariance (variances, not standard deviations).
struct OdomFactor {
  int i = 0;
  int j = 0;
  Tangent6 z;
  Vector6d sigma = Vector6d::Ones();
};

// Bearing factor tying a pose to an access-point landmark. z is the measured
// azimuth as a unit vector (cos, sin) in the robot frame; sigma the diagonal
// of the 2x2 covariance in squared radians.
struct BearingFactor {
  int pose = 0;
  std::string ap_id;
  Eigen::Vector2d z = Eigen::Vector2d::UnitX();
  Eigen::Vector2d sigma = Eigen::Vector2d::Ones();
  double huber_c = 1.345;
};

// Gauge anchor on a single pose.
struct PriorFactor {
  int i = 0;
  Pose target;
  Vector6d sigma = Vector6d::Ones();
};

// The whole estimation state: pose chain, AP landmark estimates, and factors.
// AP positions live in the world XY plane; their z entry is kept at zero since
// only azimuth is measured and elevation is projected away.
struct GraphState {
  std::vector<Pose> poses;
  std::vector<double> pose_times;
  std::map<std::string, Eigen::Vector3d> aps;
  std::vector<OdomFactor> odom_factors;
  std::vector<BearingFactor> bearing_factors;
  std::vector<PriorFactor> prior_factors;
};

// Predicted bearing geometry for one pose/AP pair: the unit direction to the
// AP in the robot frame with elevation zeroed, plus the 2x3 map onto the
// tangent plane at that direction (rows are the basis vectors).
struct BearingPrediction {
  Eigen::Vector3d dir;
  Eigen::Matrix<double, 2, 3> tangent;
};

BearingPrediction bearing_predict(const Pose& pose, const Eigen::Vector3d& ap);

// Angle-scaled tangent-plane residual between the measured azimuth vector and
// the predicted direction. Its norm equals the angle between measurement and
// prediction, so it is zero iff they agree and saturates at pi for opposite
// directions. Optional analytic Jacobians, with the convention that a pose
// increment xi acts by odom_compose(pose, xi) and an AP increment moves its
// XY coordinates.
Eigen::Vector2d bearing_residual(const Pose& pose, const Eigen::Vector3d& ap,
                                 const Eigen::Vector2d& z,
                                 Eigen::Matrix<double, 2, 6>* j_pose = nullptr,
                                 Eigen::Matrix2d* j_ap = nullptr);

Eigen::Vector2d bearing_error(const BearingFactor& f, const GraphState& s);

// z - odom_predict(pi, pj), with optional analytic Jacobians in the same
// increment convention as bearing_residual.
Vector6d odom_residual(const Pose& pi, const Pose& pj, const Tangent6& z,
                       Eigen::Matrix<double, 6, 6>* j_i = nullptr,
                       Eigen::Matrix<double, 6, 6>* j_j = nullptr);

Vector6d odom_error(const OdomFactor& f, const GraphState& s);

// Huber robust cost on a squared weighted residual s: quadratic below the
// knot (sqrt(s) <= c), linear in sqrt(s) above it.
double huber_rho(double s, double c);

// d rho / d s, the IRLS weight: 1 below the knot, c / sqrt(s) above.
double huber_weight(double s, double c);

// Sum over all factors: Huber-robustified squared Mahalanobis distance for
// bearings, plain squared Mahalanobis for odometry and priors.
double total_cost(const GraphState& s);

// Appends odom_compose(last pose, z) as the new pose estimate plus the
// corresponding between-factor; returns the new pose index.
int add_odometry(GraphState& s, const Tangent6& z, const Vector6d& sigma,
                 double timestamp);

// Per-AP RSSI history against pose indices, with box smoothing before peak
// detection. Samples landing on the same pose index merge into their mean.
class RssiTracker {
 public:
  struct Sample {
    int pose_index = 0;
    double rssi = 0.0;
    int count = 1;
  };

  explicit RssiTracker(int smoothing_half_width = 2);

  void add(const std::string& ap_id, int pose_index, double rssi);
  const std::vector<Sample>& series(const std::string& ap_id) const;

  // Earliest interior strict local maximum of the smoothed series. A plateau
  // counts when strictly risen into and strictly fallen out of; its earliest
  // index wins. Returns the pose index at the peak.
  std::optional<int> peak_pose(const std::string& ap_id) const;

 private:
  int half_width_;
  std::map<std::string, std::vector<Sample>> series_;
};

// If the AP is absent from the graph and its smoothed RSSI series shows an
// interior peak, inserts the AP at the peak pose's XY translation plus a
// random in-plane perturbation of at most 0.1 m (drawn from a 0.1 m ball,
// elevation dropped). Returns whether the AP was inserted.
bool maybe_initialize_ap(const RssiTracker& tracker, const std::string& ap_id,
                         GraphState& s, std::mt19937_64& rng);

struct SolveOptions {
  int max_iterations = 50;
  double lambda_init = 1e-4;
  double relative_decrease = 1e-9;
  // When set, only the trailing lag_window poses are free; earlier poses act
  // as constants. APs stay free in both modes.
  bool fixed_lag = false;
  int lag_window = 200;
};

struct SolveStats {
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int singular_retries = 0;
  bool converged = false;
};

// Levenberg-Marquardt over poses and AP XY positions with Huber IRLS weights
// on bearing factors. APs observed from fewer than two distinct poses are
// held fixed and their factors sit out the round. Cost over the active factor
// set never increases; singular normal equations raise damping instead of
// crashing.
SolveStats optimize(GraphState& s, const SolveOptions& opts = {});

}  // namespace wifislam
