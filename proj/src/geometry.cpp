#include "wifislam/geometry.hpp"

#include <cmath>
#include <stdexcept>

#include "wifislam/errors.hpp"

namespace wifislam {

namespace {
constexpr double kUnitNormTol = 1e-6;

void check_unit(const Eigen::Quaterniond& q, const char* who) {
  if (std::abs(q.norm() - 1.0) > kUnitNormTol) {
    throw std::invalid_argument(std::string(who) + ": quaternion is not unit norm");
  }
}
}  // namespace

Pose::Pose(const Eigen::Vector3d& translation, const Eigen::Quaterniond& rotation)
    : t(translation) {
  const double n = rotation.norm();
  if (n < 1e-12) {
    throw std::invalid_argument("Pose: zero quaternion");
  }
  Eigen::Quaterniond qn = rotation;
  qn.coeffs() /= n;
  q = canonicalized(qn);
}

Pose Pose::from_xy_yaw(double x, double y, double yaw) {
  return Pose(Eigen::Vector3d(x, y, 0.0),
              Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ())));
}

double Pose::yaw() const {
  const double x = q.x(), y = q.y(), z = q.z(), w = q.w();
  return std::atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z));
}

Vector6d Tangent6::vec() const {
  Vector6d v;
  v << dt, dr;
  return v;
}

Tangent6 Tangent6::from_vec(const Vector6d& v) {
  Tangent6 z;
  z.dt = v.head<3>();
  z.dr = v.tail<3>();
  return z;
}

UnitDir::UnitDir(const Eigen::Vector3d& v) {
  const double n = v.norm();
  if (n < 1e-12) {
    throw std::invalid_argument("UnitDir: near-zero vector");
  }
  u = v / n;
}

Eigen::Quaterniond canonicalized(const Eigen::Quaterniond& q) {
  const double w = q.w();
  if (w > 0.0) return q;
  if (w < 0.0) return Eigen::Quaterniond(-q.w(), -q.x(), -q.y(), -q.z());
  // w == 0: sign of the first nonzero vector component decides.
  for (double c : {q.x(), q.y(), q.z()}) {
    if (c > 0.0) return q;
    if (c < 0.0) return Eigen::Quaterniond(-q.w(), -q.x(), -q.y(), -q.z());
  }
  return q;
}

Eigen::Matrix3d rotation_matrix(const Eigen::Quaterniond& q) {
  check_unit(q, "rotation_matrix");
  return q.normalized().toRotationMatrix();
}

Eigen::Quaterniond quat_relative(const Eigen::Quaterniond& qa,
                                 const Eigen::Quaterniond& qb) {
  check_unit(qa, "quat_relative");
  check_unit(qb, "quat_relative");
  return canonicalized(qa.conjugate() * qb);
}

Tangent6 odom_predict(const Pose& pi, const Pose& pj) {
  Tangent6 z;
  z.dt = rotation_matrix(pi.q).transpose() * (pj.t - pi.t);
  z.dr = quat_relative(pi.q, pj.q).vec();
  return z;
}

Pose odom_compose(const Pose& pi, const Tangent6& z) {
  const double n2 = z.dr.squaredNorm();
  if (n2 > 1.0 + 1e-12) {
    throw std::invalid_argument("odom_compose: |dr| exceeds 1");
  }
  const double w = std::sqrt(std::max(0.0, 1.0 - n2));
  const Eigen::Quaterniond q_rel(w, z.dr.x(), z.dr.y(), z.dr.z());
  Pose pj;
  pj.t = pi.t + rotation_matrix(pi.q) * z.dt;
  pj.q = canonicalized((pi.q * q_rel).normalized());
  return pj;
}

TangentBasis tangent_basis(const UnitDir& dir) {
  const Eigen::Vector3d& u = dir.u;
  int k = 0;
  double best = std::abs(u.x());
  if (std::abs(u.y()) < best) { k = 1; best = std::abs(u.y()); }
  if (std::abs(u.z()) < best) { k = 2; }
  const Eigen::Vector3d seed = Eigen::Vector3d::Unit(k);
  TangentBasis b;
  b.b1 = (seed - seed.dot(u) * u).normalized();
  b.b2 = u.cross(b.b1);
  return b;
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0, -v.z(), v.y(),
       v.z(), 0, -v.x(),
       -v.y(), v.x(), 0;
  return m;
}

}  // namespace wifislam
