#include "wifislam/graph.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <set>
#include <stdexcept>
#include <utility>

#include "wifislam/errors.hpp"

namespace wifislam {

namespace {

constexpr double kDegenerateRange = 1e-6;
constexpr double kAntipodalMargin = 1e-12;
constexpr double kAlignedFloor = 1e-9;
constexpr double kCostFloor = 1e-14;
constexpr double kLambdaCap = 1e10;
constexpr double kMaxRotStep = 0.9;
constexpr double kTinyStep = 1e-12;

// Index of the smallest-magnitude component, ties to the smallest index.
// Mirrors the seeding rule of tangent_basis so the analytic Jacobian
// differentiates exactly the basis that bearing_predict returns.
int smallest_component(const Eigen::Vector3d& u) {
  int k = 0;
  for (int i = 1; i < 3; ++i) {
    if (std::abs(u[i]) < std::abs(u[k])) k = i;
  }
  return k;
}

}  // namespace

BearingPrediction bearing_predict(const Pose& pose, const Eigen::Vector3d& ap) {
  const Eigen::Matrix3d r = rotation_matrix(pose.q);
  Eigen::Vector3d local = r.transpose() * (ap - pose.t);
  local.z() = 0.0;
  const double range = local.norm();
  if (range <= kDegenerateRange) {
    throw NumericalError("bearing_predict: AP coincides with the pose");
  }
  BearingPrediction out;
  out.dir = local / range;
  const TangentBasis basis = tangent_basis(UnitDir(out.dir));
  out.tangent.row(0) = basis.b1.transpose();
  out.tangent.row(1) = basis.b2.transpose();
  return out;
}

Eigen::Vector2d bearing_residual(const Pose& pose, const Eigen::Vector3d& ap,
                                 const Eigen::Vector2d& z,
                                 Eigen::Matrix<double, 2, 6>* j_pose,
                                 Eigen::Matrix2d* j_ap) {
  const Eigen::Matrix3d r = rotation_matrix(pose.q);
  const Eigen::Matrix3d rt = r.transpose();
  Eigen::Vector3d w = rt * (ap - pose.t);
  Eigen::Vector3d p = w;
  p.z() = 0.0;
  const double range = p.norm();
  if (range <= kDegenerateRange) {
    throw NumericalError("bearing_residual: AP coincides with the pose");
  }
  const Eigen::Vector3d u = p / range;
  const Eigen::Vector3d m(z.x(), z.y(), 0.0);

  // Orthonormal frame at u, built with the same seeding rule as
  // tangent_basis. k is never the dominant component, so n1 >= sqrt(2/3).
  const int k = smallest_component(u);
  const double alpha = u[k];
  const double n1 = std::sqrt(1.0 - alpha * alpha);
  const Eigen::Vector3d ek = Eigen::Vector3d::Unit(k);
  const Eigen::Vector3d b1 = (ek - alpha * u) / n1;
  const Eigen::Vector3d b2 = u.cross(b1);

  const double c = u.dot(m);
  const Eigen::Vector2d y(b1.dot(m), b2.dot(m));
  const double ny = y.norm();

  if (c <= -1.0 + kAntipodalMargin) {
    // Opposite directions: the residual saturates at angle pi with no useful
    // gradient direction, so the Jacobians are zeroed.
    if (j_pose != nullptr) j_pose->setZero();
    if (j_ap != nullptr) j_ap->setZero();
    return Eigen::Vector2d(M_PI, 0.0);
  }

  // e = (delta / |y|) y with delta the angle between u and m, so |e| = delta.
  // Both the scale s = delta/|y| and its derivative in c have removable
  // singularities at alignment; the limits are 1 and -1/3.
  double s = 1.0;
  double ds_dc = -1.0 / 3.0;
  if (ny >= kAlignedFloor) {
    const double delta = std::atan2(ny, c);
    s = delta / ny;
    ds_dc = (delta * c - ny) / (ny * ny * ny);
  }
  const Eigen::Vector2d e = s * y;

  if (j_pose != nullptr || j_ap != nullptr) {
    // d(e)/d(u) = y * ds/du + s * dy/du, with ds/du = ds_dc * m^T and dy/du
    // the derivative of the projection onto the moving frame (b1, b2).
    Eigen::Matrix<double, 2, 3> dy_du;
    dy_du.row(0) = (-c * ek.transpose() - alpha * m.transpose()) / n1 +
                   (m[k] - alpha * c) * (alpha / (n1 * n1 * n1)) * ek.transpose();
    dy_du.row(1) = ek.cross(m).transpose() / n1 +
                   (alpha * y.y() / (n1 * n1)) * ek.transpose();
    const Eigen::Matrix<double, 2, 3> de_du =
        y * (ds_dc * m.transpose()) + s * dy_du;

    // u depends on the local displacement w through projection to the
    // azimuth plane and normalization.
    Eigen::Matrix3d proj = Eigen::Matrix3d::Identity() - u * u.transpose();
    proj.col(2).setZero();
    const Eigen::Matrix<double, 2, 3> chain = de_du * (proj / range);

    if (j_pose != nullptr) {
      j_pose->block<2, 3>(0, 0) = -chain;
      j_pose->block<2, 3>(0, 3) = 2.0 * chain * skew(w);
    }
    if (j_ap != nullptr) {
      *j_ap = chain * rt.leftCols<2>();
    }
  }
  return e;
}

Eigen::Vector2d bearing_error(const BearingFactor& f, const GraphState& s) {
  return bearing_residual(s.poses.at(f.pose), s.aps.at(f.ap_id), f.z);
}

Vector6d odom_residual(const Pose& pi, const Pose& pj, const Tangent6& z,
                       Eigen::Matrix<double, 6, 6>* j_i,
                       Eigen::Matrix<double, 6, 6>* j_j) {
  const Tangent6 pred = odom_predict(pi, pj);
  Vector6d e;
  e.head<3>() = z.dt - pred.dt;
  e.tail<3>() = z.dr - pred.dr;

  if (j_i != nullptr || j_j != nullptr) {
    const Eigen::Quaterniond q_rel = quat_relative(pi.q, pj.q);
    const double qw = q_rel.w();
    const Eigen::Vector3d qv = q_rel.vec();
    if (j_i != nullptr) {
      j_i->setZero();
      j_i->block<3, 3>(0, 0) = Eigen::Matrix3d::Identity();
      j_i->block<3, 3>(0, 3) = -2.0 * skew(pred.dt);
      j_i->block<3, 3>(3, 3) = qw * Eigen::Matrix3d::Identity() - skew(qv);
    }
    if (j_j != nullptr) {
      const Eigen::Matrix3d ri = rotation_matrix(pi.q);
      const Eigen::Matrix3d rj = rotation_matrix(pj.q);
      j_j->setZero();
      j_j->block<3, 3>(0, 0) = -(ri.transpose() * rj);
      j_j->block<3, 3>(3, 3) = -(qw * Eigen::Matrix3d::Identity() + skew(qv));
    }
  }
  return e;
}

Vector6d odom_error(const OdomFactor& f, const GraphState& s) {
  return odom_residual(s.poses.at(f.i), s.poses.at(f.j), f.z);
}

double huber_rho(double s, double c) {
  const double root = std::sqrt(s);
  if (root <= c) return s;
  return 2.0 * c * root - c * c;
}

double huber_weight(double s, double c) {
  const double root = std::sqrt(s);
  if (root <= c) return 1.0;
  return c / root;
}

double total_cost(const GraphState& s) {
  double cost = 0.0;
  for (const OdomFactor& f : s.odom_factors) {
    const Vector6d e = odom_error(f, s);
    cost += (e.array().square() / f.sigma.array()).sum();
  }
  for (const PriorFactor& f : s.prior_factors) {
    const Vector6d e = odom_residual(f.target, s.poses.at(f.i), Tangent6{});
    cost += (e.array().square() / f.sigma.array()).sum();
  }
  for (const BearingFactor& f : s.bearing_factors) {
    const Eigen::Vector2d e = bearing_error(f, s);
    const double sq = (e.array().square() / f.sigma.array()).sum();
    cost += huber_rho(sq, f.huber_c);
  }
  return cost;
}

int add_odometry(GraphState& s, const Tangent6& z, const Vector6d& sigma,
                 double timestamp) {
  if (s.poses.empty()) {
    throw std::invalid_argument("add_odometry: graph has no pose to extend");
  }
  const int i = static_cast<int>(s.poses.size()) - 1;
  s.poses.push_back(odom_compose(s.poses.back(), z));
  s.pose_times.push_back(timestamp);
  s.odom_factors.push_back(OdomFactor{i, i + 1, z, sigma});
  return i + 1;
}

RssiTracker::RssiTracker(int smoothing_half_width)
    : half_width_(smoothing_half_width) {
  if (smoothing_half_width < 0) {
    throw std::invalid_argument("RssiTracker: negative smoothing half-width");
  }
}

void RssiTracker::add(const std::string& ap_id, int pose_index, double rssi) {
  std::vector<Sample>& v = series_[ap_id];
  if (!v.empty()) {
    Sample& last = v.back();
    if (pose_index < last.pose_index) {
      throw std::invalid_argument("RssiTracker: pose indices must not decrease");
    }
    if (pose_index == last.pose_index) {
      last.rssi = (last.rssi * last.count + rssi) / (last.count + 1);
      last.count += 1;
      return;
    }
  }
  v.push_back(Sample{pose_index, rssi, 1});
}

const std::vector<RssiTracker::Sample>& RssiTracker::series(
    const std::string& ap_id) const {
  static const std::vector<Sample> kEmpty;
  const auto it = series_.find(ap_id);
  return it == series_.end() ? kEmpty : it->second;
}

std::optional<int> RssiTracker::peak_pose(const std::string& ap_id) const {
  const std::vector<Sample>& v = series(ap_id);
  const int n = static_cast<int>(v.size());
  if (n < 3) return std::nullopt;

  std::vector<double> smoothed(n);
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half_width_);
    const int hi = std::min(n - 1, i + half_width_);
    double sum = 0.0;
    for (int j = lo; j <= hi; ++j) sum += v[j].rssi;
    smoothed[i] = sum / (hi - lo + 1);
  }

  for (int i = 1; i + 1 < n; ++i) {
    if (!(smoothed[i - 1] < smoothed[i])) continue;
    int j = i;
    while (j + 1 < n && smoothed[j + 1] == smoothed[i]) ++j;
    if (j + 1 < n && smoothed[i] > smoothed[j + 1]) return v[i].pose_index;
  }
  return std::nullopt;
}

bool maybe_initialize_ap(const RssiTracker& tracker, const std::string& ap_id,
                         GraphState& s, std::mt19937_64& rng) {
  if (s.aps.count(ap_id) != 0) return false;
  const std::optional<int> peak = tracker.peak_pose(ap_id);
  if (!peak.has_value()) return false;

  const Eigen::Vector3d t = s.poses.at(*peak).t;
  std::uniform_real_distribution<double> coord(-0.1, 0.1);
  Eigen::Vector3d delta;
  do {
    const double x = coord(rng);
    const double y = coord(rng);
    const double zc = coord(rng);
    delta = Eigen::Vector3d(x, y, zc);
  } while (delta.norm() > 0.1);
  // APs live in the XY plane; the sampled elevation offset is dropped.
  s.aps[ap_id] = Eigen::Vector3d(t.x() + delta.x(), t.y() + delta.y(), 0.0);
  return true;
}

namespace {

struct ActiveSet {
  int first_free_pose = 0;
  int pose_cols = 0;
  int total_cols = 0;
  std::map<std::string, int> ap_cols;
  std::vector<char> bearing_active;
};

int pose_col(const ActiveSet& a, int pose_index) {
  if (pose_index < a.first_free_pose) return -1;
  return (pose_index - a.first_free_pose) * 6;
}

ActiveSet build_active_set(const GraphState& s, const SolveOptions& opts) {
  ActiveSet a;
  const int n_poses = static_cast<int>(s.poses.size());
  if (opts.fixed_lag && n_poses > opts.lag_window) {
    a.first_free_pose = n_poses - opts.lag_window;
  }
  a.pose_cols = (n_poses - a.first_free_pose) * 6;

  // An AP seen from fewer than two distinct poses is unobservable along the
  // range direction; hold it fixed and keep its factors out of this round.
  std::map<std::string, std::set<int>> observers;
  for (const BearingFactor& f : s.bearing_factors) {
    observers[f.ap_id].insert(f.pose);
  }
  int col = a.pose_cols;
  for (const auto& [ap_id, position] : s.aps) {
    (void)position;
    const auto it = observers.find(ap_id);
    if (it != observers.end() && static_cast<int>(it->second.size()) >= 2) {
      a.ap_cols[ap_id] = col;
      col += 2;
    }
  }
  a.total_cols = col;

  a.bearing_active.assign(s.bearing_factors.size(), 0);
  for (std::size_t k = 0; k < s.bearing_factors.size(); ++k) {
    if (a.ap_cols.count(s.bearing_factors[k].ap_id) != 0) {
      a.bearing_active[k] = 1;
    }
  }
  return a;
}

// Cost over the factors participating in this round (those touching at least
// one free variable, with guarded-AP factors excluded).
double active_cost(const GraphState& s, const ActiveSet& a) {
  double cost = 0.0;
  for (const OdomFactor& f : s.odom_factors) {
    if (f.i < a.first_free_pose && f.j < a.first_free_pose) continue;
    const Vector6d e = odom_error(f, s);
    cost += (e.array().square() / f.sigma.array()).sum();
  }
  for (const PriorFactor& f : s.prior_factors) {
    if (f.i < a.first_free_pose) continue;
    const Vector6d e = odom_residual(f.target, s.poses.at(f.i), Tangent6{});
    cost += (e.array().square() / f.sigma.array()).sum();
  }
  for (std::size_t k = 0; k < s.bearing_factors.size(); ++k) {
    if (a.bearing_active[k] == 0) continue;
    const BearingFactor& f = s.bearing_factors[k];
    const Eigen::Vector2d e = bearing_error(f, s);
    const double sq = (e.array().square() / f.sigma.array()).sum();
    cost += huber_rho(sq, f.huber_c);
  }
  return cost;
}

// Scatters one factor's whitened blocks into the normal equations.
void accumulate(const std::vector<std::pair<int, Eigen::MatrixXd>>& blocks,
                const Eigen::VectorXd& r,
                std::vector<Eigen::Triplet<double>>& trips,
                Eigen::VectorXd& rhs) {
  for (const auto& [col_a, jac_a] : blocks) {
    rhs.segment(col_a, jac_a.cols()) -= jac_a.transpose() * r;
    for (const auto& [col_b, jac_b] : blocks) {
      const Eigen::MatrixXd h = jac_a.transpose() * jac_b;
      for (int p = 0; p < h.rows(); ++p) {
        for (int q = 0; q < h.cols(); ++q) {
          trips.emplace_back(col_a + p, col_b + q, h(p, q));
        }
      }
    }
  }
}

void linearize(const GraphState& s, const ActiveSet& a,
               std::vector<Eigen::Triplet<double>>& trips,
               Eigen::VectorXd& rhs) {
  trips.clear();
  rhs.setZero(a.total_cols);

  for (const OdomFactor& f : s.odom_factors) {
    const int ci = pose_col(a, f.i);
    const int cj = pose_col(a, f.j);
    if (ci < 0 && cj < 0) continue;
    Eigen::Matrix<double, 6, 6> ji;
    Eigen::Matrix<double, 6, 6> jj;
    const Vector6d e = odom_residual(s.poses[f.i], s.poses[f.j], f.z, &ji, &jj);
    const Vector6d inv_std = f.sigma.cwiseSqrt().cwiseInverse();
    std::vector<std::pair<int, Eigen::MatrixXd>> blocks;
    if (ci >= 0) blocks.emplace_back(ci, inv_std.asDiagonal() * ji);
    if (cj >= 0) blocks.emplace_back(cj, inv_std.asDiagonal() * jj);
    accumulate(blocks, inv_std.cwiseProduct(e), trips, rhs);
  }

  for (const PriorFactor& f : s.prior_factors) {
    const int c = pose_col(a, f.i);
    if (c < 0) continue;
    Eigen::Matrix<double, 6, 6> jj;
    const Vector6d e =
        odom_residual(f.target, s.poses[f.i], Tangent6{}, nullptr, &jj);
    const Vector6d inv_std = f.sigma.cwiseSqrt().cwiseInverse();
    std::vector<std::pair<int, Eigen::MatrixXd>> blocks;
    blocks.emplace_back(c, inv_std.asDiagonal() * jj);
    accumulate(blocks, inv_std.cwiseProduct(e), trips, rhs);
  }

  for (std::size_t k = 0; k < s.bearing_factors.size(); ++k) {
    if (a.bearing_active[k] == 0) continue;
    const BearingFactor& f = s.bearing_factors[k];
    const int cp = pose_col(a, f.pose);
    const int ca = a.ap_cols.at(f.ap_id);
    Eigen::Matrix<double, 2, 6> jp;
    Eigen::Matrix2d ja;
    const Eigen::Vector2d e =
        bearing_residual(s.poses[f.pose], s.aps.at(f.ap_id), f.z, &jp, &ja);
    const Eigen::Vector2d inv_std = f.sigma.cwiseSqrt().cwiseInverse();
    const Eigen::Vector2d r = inv_std.cwiseProduct(e);
    // IRLS: scale the whitened system by sqrt of the Huber weight.
    const double w = std::sqrt(huber_weight(r.squaredNorm(), f.huber_c));
    std::vector<std::pair<int, Eigen::MatrixXd>> blocks;
    if (cp >= 0) blocks.emplace_back(cp, w * (inv_std.asDiagonal() * jp));
    blocks.emplace_back(ca, w * (inv_std.asDiagonal() * ja));
    accumulate(blocks, w * r, trips, rhs);
  }
}

void apply_increment(GraphState& s, const ActiveSet& a,
                     const Eigen::VectorXd& dx) {
  const int n_poses = static_cast<int>(s.poses.size());
  for (int p = a.first_free_pose; p < n_poses; ++p) {
    const int col = pose_col(a, p);
    Tangent6 xi;
    xi.dt = dx.segment<3>(col);
    xi.dr = dx.segment<3>(col + 3);
    s.poses[p] = odom_compose(s.poses[p], xi);
  }
  for (const auto& [ap_id, col] : a.ap_cols) {
    Eigen::Vector3d& ap = s.aps.at(ap_id);
    ap.x() += dx[col];
    ap.y() += dx[col + 1];
  }
}

bool step_rotation_ok(const ActiveSet& a, int n_poses,
                      const Eigen::VectorXd& dx) {
  for (int p = a.first_free_pose; p < n_poses; ++p) {
    const int col = pose_col(a, p);
    if (dx.segment<3>(col + 3).norm() > kMaxRotStep) return false;
  }
  return true;
}

}  // namespace

SolveStats optimize(GraphState& s, const SolveOptions& opts) {
  if (s.poses.empty()) {
    throw std::invalid_argument("optimize: graph has no poses");
  }
  const ActiveSet act = build_active_set(s, opts);
  SolveStats stats;
  stats.initial_cost = active_cost(s, act);
  stats.final_cost = stats.initial_cost;
  if (act.total_cols == 0 || stats.initial_cost <= kCostFloor) {
    stats.converged = true;
    return stats;
  }

  const int n = act.total_cols;
  const int n_poses = static_cast<int>(s.poses.size());
  double cost = stats.initial_cost;
  double lambda = opts.lambda_init;
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd rhs;

  for (int it = 0; it < opts.max_iterations; ++it) {
    stats.iterations = it + 1;
    linearize(s, act, trips, rhs);
    Eigen::SparseMatrix<double> h(n, n);
    h.setFromTriplets(trips.begin(), trips.end());
    const Eigen::VectorXd h_diag = h.diagonal();

    bool accepted = false;
    while (!accepted) {
      std::vector<Eigen::Triplet<double>> damped = trips;
      for (int d = 0; d < n; ++d) {
        damped.emplace_back(d, d, lambda * h_diag[d]);
      }
      Eigen::SparseMatrix<double> hd(n, n);
      hd.setFromTriplets(damped.begin(), damped.end());

      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
      solver.compute(hd);
      Eigen::VectorXd dx;
      bool solvable = solver.info() == Eigen::Success;
      if (solvable) {
        dx = solver.solve(rhs);
        solvable = dx.allFinite();
      }
      if (!solvable) {
        stats.singular_retries += 1;
        lambda *= 10.0;
        if (lambda > kLambdaCap) return stats;
        continue;
      }

      bool improved = false;
      GraphState candidate;
      if (step_rotation_ok(act, n_poses, dx)) {
        candidate = s;
        apply_increment(candidate, act, dx);
        try {
          const double new_cost = active_cost(candidate, act);
          improved = std::isfinite(new_cost) && new_cost < cost;
          if (improved) {
            const double prev = cost;
            cost = new_cost;
            s = std::move(candidate);
            stats.final_cost = cost;
            lambda /= 10.0;
            accepted = true;
            if (cost <= kCostFloor ||
                prev - cost < opts.relative_decrease * prev ||
                dx.lpNorm<Eigen::Infinity>() < kTinyStep) {
              stats.converged = true;
              return stats;
            }
          }
        } catch (const NumericalError&) {
          improved = false;
        }
      }
      if (!improved && !accepted) {
        lambda *= 10.0;
        if (lambda > kLambdaCap) return stats;
      }
    }
  }
  stats.converged = true;
  return stats;
}

}  // namespace wifislam
