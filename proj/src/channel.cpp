#include "wifislam/channel.hpp"

#include <cmath>
#include <stdexcept>

#include "wifislam/errors.hpp"

namespace wifislam {

namespace {
constexpr double kTwoPi = 2.0 * M_PI;
}

ArrayGeometry ArrayGeometry::linear(int num_antennas, double spacing) {
  if (num_antennas < 1 || spacing <= 0.0) {
    throw std::invalid_argument("ArrayGeometry::linear: bad antenna count or spacing");
  }
  ArrayGeometry g;
  g.kind = Kind::kLinear;
  g.positions.reserve(num_antennas);
  for (int m = 0; m < num_antennas; ++m) {
    g.positions.emplace_back(m * spacing, 0.0);
  }
  return g;
}

ArrayGeometry ArrayGeometry::square(double side) {
  if (side <= 0.0) {
    throw std::invalid_argument("ArrayGeometry::square: side must be positive");
  }
  ArrayGeometry g;
  g.kind = Kind::kSquare;
  g.positions = {{0.0, 0.0}, {side, 0.0}, {side, side}, {0.0, side}};
  return g;
}

ArrayGeometry ArrayGeometry::custom(std::vector<Eigen::Vector2d> positions) {
  if (positions.empty()) {
    throw std::invalid_argument("ArrayGeometry::custom: empty layout");
  }
  if (positions.front().norm() > 0.0) {
    throw std::invalid_argument("ArrayGeometry::custom: antenna 0 must sit at the origin");
  }
  ArrayGeometry g;
  g.kind = Kind::kCustom;
  g.positions = std::move(positions);
  return g;
}

double steering_phase(const ArrayGeometry& geom, int antenna, double theta,
                      double lambda) {
  if (antenna < 0 || antenna >= geom.size()) {
    throw std::invalid_argument("steering_phase: antenna index out of range");
  }
  if (lambda <= 0.0) {
    throw std::invalid_argument("steering_phase: wavelength must be positive");
  }
  const Eigen::Vector2d& p = geom.positions[antenna];
  return -kTwoPi / lambda * (p.x() * std::cos(theta) + p.y() * std::sin(theta));
}

double broadside_to_axis(double theta_broadside) {
  return M_PI / 2.0 - theta_broadside;
}

Eigen::VectorXcd steering_vector(const ArrayGeometry& geom, double theta,
                                 double lambda) {
  Eigen::VectorXcd a(geom.size());
  for (int m = 0; m < geom.size(); ++m) {
    a(m) = std::polar(1.0, steering_phase(geom, m, theta, lambda));
  }
  return a;
}

Eigen::MatrixXcd synth_channel(const std::vector<PathComponent>& paths,
                               const ArrayGeometry& geom,
                               const std::vector<double>& freqs, double lambda,
                               double psi, double noise_std,
                               std::mt19937_64& rng) {
  if (freqs.empty()) {
    throw std::invalid_argument("synth_channel: empty subcarrier grid");
  }
  const int m_ant = geom.size();
  const int n_sub = static_cast<int>(freqs.size());
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(m_ant, n_sub);
  for (const PathComponent& p : paths) {
    if (p.length < 0.0) {
      throw std::invalid_argument("synth_channel: negative path length");
    }
    for (int m = 0; m < m_ant; ++m) {
      const std::complex<double> ant = std::polar(p.amplitude, steering_phase(geom, m, p.theta, lambda));
      for (int n = 0; n < n_sub; ++n) {
        h(m, n) += ant * std::polar(1.0, -kTwoPi * freqs[n] * p.length / kSpeedOfLight);
      }
    }
  }
  h *= std::polar(1.0, -psi);
  if (noise_std > 0.0) {
    std::normal_distribution<double> g(0.0, noise_std);
    for (int m = 0; m < m_ant; ++m) {
      for (int n = 0; n < n_sub; ++n) {
        // Real draw then imaginary: the order is part of the determinism
        // contract.
        const double re = g(rng);
        const double im = g(rng);
        h(m, n) += std::complex<double>(re, im);
      }
    }
  }
  return h;
}

double synth_rssi(double path_length, const RssiModel& model,
                  std::mt19937_64& rng) {
  if (path_length <= 0.0) {
    throw std::invalid_argument("synth_rssi: path length must be positive");
  }
  double rssi = model.p0_dbm - 10.0 * model.exponent * std::log10(path_length);
  if (model.shadow_sigma > 0.0) {
    std::normal_distribution<double> g(0.0, model.shadow_sigma);
    rssi += g(rng);
  }
  return rssi;
}

std::vector<double> make_subcarriers(double center_freq, double bandwidth,
                                     int n) {
  if (n < 1 || bandwidth <= 0.0 || center_freq <= 0.0) {
    throw std::invalid_argument("make_subcarriers: bad grid parameters");
  }
  std::vector<double> freqs(n);
  const double step = bandwidth / n;
  for (int i = 0; i < n; ++i) {
    freqs[i] = center_freq + (i - (n - 1) / 2.0) * step;
  }
  return freqs;
}

}  // namespace wifislam
