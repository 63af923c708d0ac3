#pragma once

#include <Eigen/Core>
#include <complex>
#include <random>
#include <string>
#include <vector>

namespace wifislam {

inline constexpr double kSpeedOfLight = 299792458.0;

// Antenna layout in the array plane, antenna 0 at the origin. Azimuth is
// measured from the +x axis throughout; a linear array lies along +x, so its
// steering phase goes as cos(theta). Fixtures written against the
// broadside-angle form (phase ~ sin) convert via broadside_to_axis.
struct ArrayGeometry {
  enum class Kind { kLinear, kSquare, kCustom };

  Kind kind = Kind::kCustom;
  std::vector<Eigen::Vector2d> positions;

  static ArrayGeometry linear(int num_antennas, double spacing);
  // Four antennas on the corners of a square of the given side:
  // (0,0), (s,0), (s,s), (0,s).
  static ArrayGeometry square(double side);
  static ArrayGeometry custom(std::vector<Eigen::Vector2d> positions);

  int size() const { return static_cast<int>(positions.size()); }
};

// One propagation path: azimuth in the robot frame, total travel length in
// meters, and amplitude relative to the direct path.
struct PathComponent {
  double theta = 0.0;
  double length = 0.0;
  double amplitude = 1.0;
};

// One CSI observation: complex channel matrix H (antennas x subcarriers),
// carrier wavelength, per-subcarrier frequencies, and received power.
struct CsiPacket {
  double timestamp = 0.0;
  std::string ap_id;
  double rssi = 0.0;
  Eigen::MatrixXcd h;
  double lambda = 0.0;
  std::vector<double> freqs;
};

// Per-antenna phase for a plane wave from azimuth theta:
//   -(2*pi/lambda) * (X_m cos(theta) + Y_m sin(theta)).
double steering_phase(const ArrayGeometry& geom, int antenna, double theta,
                      double lambda);

// Converts a broadside-measured angle (for a +x linear array: from the +y
// axis) into the stored +x-axis convention.
double broadside_to_axis(double theta_broadside);

// Unit-magnitude steering vector, entries exp(j*phase).
Eigen::VectorXcd steering_vector(const ArrayGeometry& geom, double theta,
                                 double lambda);

// Synthesizes one channel matrix: sum of per-path rank-one terms, a common
// packet phase offset psi, and i.i.d. complex Gaussian noise of the given
// std dev per entry.
Eigen::MatrixXcd synth_channel(const std::vector<PathComponent>& paths,
                               const ArrayGeometry& geom,
                               const std::vector<double>& freqs, double lambda,
                               double psi, double noise_std,
                               std::mt19937_64& rng);

// Log-distance shadowing model: p0_dbm at 1 m, exponent n, Gaussian shadow
// term of shadow_sigma dB.
struct RssiModel {
  double p0_dbm = -30.0;
  double exponent = 2.0;
  double shadow_sigma = 0.0;
};

double synth_rssi(double path_length, const RssiModel& model,
                  std::mt19937_64& rng);

// Subcarrier frequency grid: n tones spanning `bandwidth` centered on
// `center_freq`.
std::vector<double> make_subcarriers(double center_freq, double bandwidth,
                                     int n);

}  // namespace wifislam
