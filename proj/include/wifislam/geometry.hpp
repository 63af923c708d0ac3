#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace wifislam {

using Vector6d = Eigen::Matrix<double, 6, 1>;

// Robot state in SE(3): translation plus unit quaternion. q and -q describe
// the same rotation, so quaternions are canonicalized to scalar part >= 0 on
// construction.
struct Pose {
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();

  Pose() = default;
  Pose(const Eigen::Vector3d& translation, const Eigen::Quaterniond& rotation);

  static Pose from_xy_yaw(double x, double y, double yaw);
  double yaw() const;
};

// Relative-pose increment: dt is the translation expressed in the source-pose
// frame, dr the vector part of the relative quaternion (norm <= 1).
struct Tangent6 {
  Eigen::Vector3d dt = Eigen::Vector3d::Zero();
  Eigen::Vector3d dr = Eigen::Vector3d::Zero();

  Vector6d vec() const;
  static Tangent6 from_vec(const Vector6d& v);
};

// Unit-norm direction; throws on near-zero input.
struct UnitDir {
  Eigen::Vector3d u;
  explicit UnitDir(const Eigen::Vector3d& v);
};

struct TangentBasis {
  Eigen::Vector3d b1;
  Eigen::Vector3d b2;
};

// Flips the quaternion sign so w >= 0 (for w == 0, so the first nonzero
// component of the vector part is positive).
Eigen::Quaterniond canonicalized(const Eigen::Quaterniond& q);

// Local-to-world rotation matrix. Rejects quaternions more than 1e-6 from
// unit norm.
Eigen::Matrix3d rotation_matrix(const Eigen::Quaterniond& q);

// Canonicalized qa^-1 * qb.
Eigen::Quaterniond quat_relative(const Eigen::Quaterniond& qa,
                                 const Eigen::Quaterniond& qb);

// Measurement a perfect odometer would report between consecutive poses.
Tangent6 odom_predict(const Pose& pi, const Pose& pj);

// Applies a relative-pose increment; inverse of odom_predict.
Pose odom_compose(const Pose& pi, const Tangent6& z);

// Deterministic orthonormal basis of the plane normal to dir. Gram-Schmidt
// seeded with the world axis least aligned with dir (ties: x, then y, then z);
// (b1, b2, dir) is right-handed.
TangentBasis tangent_basis(const UnitDir& dir);

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

}  // namespace wifislam
