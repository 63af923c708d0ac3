#pragma once

#include <Eigen/Core>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "wifislam/channel.hpp"

namespace wifislam {

inline constexpr double kDefaultWindowSec = 0.5;
inline constexpr double kDefaultGridStepRad = M_PI / 180.0;
inline constexpr double kDefaultBearingSigmaRad = 5.0 * M_PI / 180.0;
inline constexpr double kDefaultRssiThresholdDbm = -65.0;

// Sliding window of CSI packets for one AP; packets older than `horizon`
// behind the newest are evicted on push.
class BearingWindow {
 public:
  explicit BearingWindow(std::string ap_id, double horizon = kDefaultWindowSec);

  // Requires matching ap_id, matching H dimensions and wavelength, and
  // non-decreasing timestamps.
  void push(const CsiPacket& packet);

  const std::deque<CsiPacket>& packets() const { return packets_; }
  const std::string& ap_id() const { return ap_id_; }
  bool empty() const { return packets_.empty(); }
  size_t size() const { return packets_.size(); }

 private:
  std::string ap_id_;
  double horizon_;
  std::deque<CsiPacket> packets_;
};

// Unit bearing observation: z = [cos theta, sin theta], isotropic diagonal
// covariance in tangent units (radians squared).
struct BearingMeasurement {
  double timestamp = 0.0;
  std::string ap_id;
  double theta = 0.0;
  Eigen::Vector2d z = Eigen::Vector2d::UnitX();
  Eigen::Vector2d sigma =
      Eigen::Vector2d::Constant(kDefaultBearingSigmaRad * kDefaultBearingSigmaRad);

  static BearingMeasurement from_theta(double timestamp, std::string ap_id,
                                       double theta, double sigma_rad);
};

// Objective-evaluation counters for the compute-asymmetry comparison.
struct SearchStats {
  size_t evaluations = 0;
};

// Sum over the window of H * H^H (antennas x antennas, Hermitian PSD).
Eigen::MatrixXcd autocorr_sum(const BearingWindow& window);

// Dominant eigenvector by power iteration: deterministic start, Rayleigh
// quotient stop, phase canonicalized so the first significant entry is real
// positive. Throws NumericalError on (numerically) zero input.
Eigen::VectorXcd largest_eigenvector(const Eigen::MatrixXcd& a,
                                     int max_iterations = 500,
                                     double tol = 1e-12);

// Inclusive angle grid from range.first to range.second.
std::vector<double> make_theta_grid(std::pair<double, double> range,
                                    double step);

// Default search ranges in the +x-axis convention. The linear range covers
// the top half plane, the unambiguous 180-degree span of an axis-aligned
// linear array; the square range matches the resolvable span of the
// four-corner array.
std::pair<double, double> default_search_range(const ArrayGeometry& geom);

// Windowed eigenvector bearing estimate: argmax over the grid of
// |steering(theta)^H u|, ties toward the smaller angle.
BearingMeasurement pcab_bearing(
    const BearingWindow& window, const ArrayGeometry& geom,
    double grid_step = kDefaultGridStepRad,
    std::optional<std::pair<double, double>> range = std::nullopt,
    double sigma_rad = kDefaultBearingSigmaRad, SearchStats* stats = nullptr);

// Single-packet joint angle/delay grid baseline:
// argmax over (theta, tau) of |sum_{m,n} H(m,n) e^{-j phi_m(theta)}
// e^{+j 2 pi f_n tau}|. Returns the angle of the peak.
double grid2d_baseline(const CsiPacket& packet, const ArrayGeometry& geom,
                       const std::vector<double>& theta_grid,
                       const std::vector<double>& delay_grid,
                       SearchStats* stats = nullptr);

// Delay grid covering path lengths [0, max_extra_m] in steps of step_m.
std::vector<double> make_delay_grid(double max_extra_m = 50.0,
                                    double step_m = 0.5);

// Keep iff rssi >= threshold (strictly-below packets are dropped).
bool rssi_gate(double rssi_dbm, double threshold_dbm = kDefaultRssiThresholdDbm);

}  // namespace wifislam
