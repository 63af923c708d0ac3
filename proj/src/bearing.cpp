#include "wifislam/bearing.hpp"

#include <cmath>
#include <stdexcept>

#include "wifislam/errors.hpp"

namespace wifislam {

BearingWindow::BearingWindow(std::string ap_id, double horizon)
    : ap_id_(std::move(ap_id)), horizon_(horizon) {
  if (horizon_ <= 0.0) {
    throw std::invalid_argument("BearingWindow: horizon must be positive");
  }
}

void BearingWindow::push(const CsiPacket& packet) {
  if (packet.ap_id != ap_id_) {
    throw std::invalid_argument("BearingWindow: packet from a different AP");
  }
  if (!packets_.empty()) {
    const CsiPacket& last = packets_.back();
    if (packet.timestamp < last.timestamp) {
      throw std::invalid_argument("BearingWindow: timestamps must be non-decreasing");
    }
    if (packet.h.rows() != last.h.rows() || packet.h.cols() != last.h.cols() ||
        packet.lambda != last.lambda) {
      throw std::invalid_argument("BearingWindow: channel shape or wavelength changed");
    }
  }
  packets_.push_back(packet);
  const double cutoff = packet.timestamp - horizon_;
  while (!packets_.empty() && packets_.front().timestamp < cutoff) {
    packets_.pop_front();
  }
}

BearingMeasurement BearingMeasurement::from_theta(double timestamp,
                                                  std::string ap_id,
                                                  double theta,
                                                  double sigma_rad) {
  BearingMeasurement m;
  m.timestamp = timestamp;
  m.ap_id = std::move(ap_id);
  m.theta = theta;
  m.z = Eigen::Vector2d(std::cos(theta), std::sin(theta));
  m.sigma = Eigen::Vector2d::Constant(sigma_rad * sigma_rad);
  return m;
}

Eigen::MatrixXcd autocorr_sum(const BearingWindow& window) {
  if (window.empty()) {
    throw std::invalid_argument("autocorr_sum: empty window");
  }
  const int m = static_cast<int>(window.packets().front().h.rows());
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(m, m);
  for (const CsiPacket& p : window.packets()) {
    acc += p.h * p.h.adjoint();
  }
  return acc;
}

Eigen::VectorXcd largest_eigenvector(const Eigen::MatrixXcd& a,
                                     int max_iterations, double tol) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw std::invalid_argument("largest_eigenvector: matrix must be square");
  }
  const int n = static_cast<int>(a.rows());
  const double scale = a.cwiseAbs().maxCoeff();
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw NumericalError("largest_eigenvector: zero or non-finite matrix");
  }

  // Deterministic start; if an unlucky start is orthogonal to the dominant
  // eigenspace the iterate collapses and we move to the next basis seed.
  for (int seed = 0; seed < n; ++seed) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(n);
    v(seed) = 1.0;
    v((seed + 1) % n) += 1e-3;
    v.normalize();

    double rayleigh_prev = 0.0;
    double lambda = 0.0;
    bool collapsed = false;
    bool converged = false;
    for (int it = 0; it < max_iterations; ++it) {
      Eigen::VectorXcd w = a * v;
      const double norm = w.norm();
      if (norm < 1e-14 * scale) {
        collapsed = true;
        break;
      }
      v = w / norm;
      const Eigen::VectorXcd av = a * v;
      lambda = std::real(v.dot(av));
      // The Rayleigh quotient is stationary to second order in the
      // eigenvector error, so quotient stagnation alone can stop with the
      // iterate still far from an eigenpair; require the residual too.
      const double residual = (av - lambda * v).norm();
      if (it > 0 && std::abs(lambda - rayleigh_prev) < tol * std::abs(lambda) &&
          residual <= 1e-8 * std::abs(lambda)) {
        converged = true;
        break;
      }
      rayleigh_prev = lambda;
    }
    if (collapsed) continue;
    if (!converged) {
      throw NumericalError("largest_eigenvector: power iteration did not converge");
    }

    // Phase canonicalization: first significant entry made real positive.
    const double vmax = v.cwiseAbs().maxCoeff();
    for (int i = 0; i < n; ++i) {
      if (std::abs(v(i)) > 1e-9 * vmax) {
        v *= std::conj(v(i)) / std::abs(v(i));
        break;
      }
    }
    return v;
  }
  throw NumericalError("largest_eigenvector: degenerate input");
}

std::vector<double> make_theta_grid(std::pair<double, double> range,
                                    double step) {
  if (step <= 0.0 || range.second < range.first) {
    throw std::invalid_argument("make_theta_grid: bad range or step");
  }
  const int count = static_cast<int>(std::floor((range.second - range.first) / step + 0.5)) + 1;
  std::vector<double> grid(count);
  for (int i = 0; i < count; ++i) {
    grid[i] = range.first + i * step;
  }
  return grid;
}

std::pair<double, double> default_search_range(const ArrayGeometry& geom) {
  if (geom.kind == ArrayGeometry::Kind::kLinear) {
    return {0.0, M_PI};
  }
  return {-160.0 * M_PI / 180.0, 160.0 * M_PI / 180.0};
}

namespace {

double matched_filter(const ArrayGeometry& geom, const Eigen::VectorXcd& u,
                      double theta, double lambda) {
  std::complex<double> acc = 0.0;
  for (int m = 0; m < geom.size(); ++m) {
    acc += std::polar(1.0, steering_phase(geom, m, theta, lambda)) * std::conj(u(m));
  }
  return std::abs(acc);
}

}  // namespace

BearingMeasurement pcab_bearing(const BearingWindow& window,
                                const ArrayGeometry& geom, double grid_step,
                                std::optional<std::pair<double, double>> range,
                                double sigma_rad, SearchStats* stats) {
  if (window.empty()) {
    throw std::invalid_argument("pcab_bearing: empty window");
  }
  if (window.packets().front().h.rows() != geom.size()) {
    throw std::invalid_argument("pcab_bearing: antenna count mismatch");
  }
  const std::pair<double, double> span =
      range.has_value() ? *range : default_search_range(geom);
  const double lambda = window.packets().front().lambda;
  const Eigen::VectorXcd u = largest_eigenvector(autocorr_sum(window));

  double best_theta = span.first;
  double best_val = -1.0;
  size_t evals = 0;
  for (double theta : make_theta_grid(span, grid_step)) {
    const double val = matched_filter(geom, u, theta, lambda);
    ++evals;
    if (val > best_val) {  // strict: ties keep the smaller angle
      best_val = val;
      best_theta = theta;
    }
  }
  if (stats != nullptr) {
    stats->evaluations += evals;
  }
  return BearingMeasurement::from_theta(window.packets().back().timestamp,
                                        window.ap_id(), best_theta, sigma_rad);
}

double grid2d_baseline(const CsiPacket& packet, const ArrayGeometry& geom,
                       const std::vector<double>& theta_grid,
                       const std::vector<double>& delay_grid,
                       SearchStats* stats) {
  if (theta_grid.empty() || delay_grid.empty()) {
    throw std::invalid_argument("grid2d_baseline: empty grid");
  }
  if (packet.h.rows() != geom.size()) {
    throw std::invalid_argument("grid2d_baseline: antenna count mismatch");
  }
  if (packet.h.cols() != static_cast<Eigen::Index>(packet.freqs.size())) {
    throw std::invalid_argument("grid2d_baseline: subcarrier count mismatch");
  }
  if (!(packet.h.cwiseAbs().maxCoeff() > 0.0)) {
    throw NumericalError("grid2d_baseline: zero channel");
  }
  const int m_ant = geom.size();
  const int n_sub = static_cast<int>(packet.freqs.size());

  double best_theta = theta_grid.front();
  double best_val = -1.0;
  size_t evals = 0;
  for (double theta : theta_grid) {
    // Per-antenna steering compensation is shared across delays.
    Eigen::VectorXcd row_sum = Eigen::VectorXcd::Zero(n_sub);
    for (int m = 0; m < m_ant; ++m) {
      const std::complex<double> comp =
          std::polar(1.0, -steering_phase(geom, m, theta, packet.lambda));
      for (int n = 0; n < n_sub; ++n) {
        row_sum(n) += packet.h(m, n) * comp;
      }
    }
    for (double tau : delay_grid) {
      std::complex<double> acc = 0.0;
      for (int n = 0; n < n_sub; ++n) {
        acc += row_sum(n) * std::polar(1.0, 2.0 * M_PI * packet.freqs[n] * tau);
      }
      ++evals;
      const double val = std::abs(acc);
      if (val > best_val) {
        best_val = val;
        best_theta = theta;
      }
    }
  }
  if (stats != nullptr) {
    stats->evaluations += evals;
  }
  return best_theta;
}

std::vector<double> make_delay_grid(double max_extra_m, double step_m) {
  if (max_extra_m <= 0.0 || step_m <= 0.0) {
    throw std::invalid_argument("make_delay_grid: bad parameters");
  }
  std::vector<double> grid;
  for (double d = 0.0; d <= max_extra_m + 1e-9; d += step_m) {
    grid.push_back(d / kSpeedOfLight);
  }
  return grid;
}

bool rssi_gate(double rssi_dbm, double threshold_dbm) {
  return rssi_dbm >= threshold_dbm;
}

}  // namespace wifislam
