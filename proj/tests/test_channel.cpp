#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "wifislam/channel.hpp"
#include "wifislam/errors.hpp"

using namespace wifislam;

namespace {
constexpr double kFc = 5.21e9;
const double kLambda = kSpeedOfLight / kFc;

std::mt19937_64 rng(7);
}  // namespace

TEST_CASE("array layouts pin antenna 0 at the origin") {
  const ArrayGeometry lin = ArrayGeometry::linear(4, 0.03);
  CHECK(lin.positions[0].norm() == 0.0);
  CHECK(lin.positions[3].x() == doctest::Approx(0.09));
  CHECK(lin.positions[3].y() == 0.0);

  const ArrayGeometry sq = ArrayGeometry::square(0.02);
  CHECK(sq.size() == 4);
  CHECK(sq.positions[0].norm() == 0.0);
  CHECK(sq.positions[1].x() == 0.02);
  CHECK(sq.positions[2].x() == 0.02);
  CHECK(sq.positions[2].y() == 0.02);
  CHECK(sq.positions[3].y() == 0.02);

  CHECK_THROWS_AS(ArrayGeometry::custom({{1.0, 0.0}}), std::invalid_argument);
}

TEST_CASE("steering_phase direct substitutions") {
  // Broadside angle 0 on a linear array: zero phase on every antenna.
  const ArrayGeometry lin = ArrayGeometry::linear(4, kLambda / 2);
  for (int m = 0; m < 4; ++m) {
    CHECK(std::abs(steering_phase(lin, m, broadside_to_axis(0.0), kLambda)) < 1e-9);
  }

  // Half-wavelength spacing, antenna 1, broadside 90 degrees: -pi.
  CHECK(steering_phase(lin, 1, broadside_to_axis(M_PI / 2), kLambda) ==
        doctest::Approx(-M_PI).epsilon(1e-12));

  // Square side s, antenna 1 at (s, 0), theta = 0: -2*pi*s/lambda.
  const double side = 3.0 * kLambda / 8.0;
  const ArrayGeometry sq = ArrayGeometry::square(side);
  CHECK(steering_phase(sq, 1, 0.0, kLambda) ==
        doctest::Approx(-2.0 * M_PI * side / kLambda).epsilon(1e-12));
  // Antenna 3 at (0, s), theta = 90 degrees: same value through the Y term.
  CHECK(steering_phase(sq, 3, M_PI / 2, kLambda) ==
        doctest::Approx(-2.0 * M_PI * side / kLambda).epsilon(1e-12));
  // Antenna 0 never accumulates phase.
  CHECK(steering_phase(sq, 0, 1.234, kLambda) == 0.0);
}

TEST_CASE("synth_channel single path with whole-cycle delay") {
  // One subcarrier whose delay phase is an exact multiple of 2*pi, so
  // H(m, 0) equals the bare steering phasor.
  const ArrayGeometry sq = ArrayGeometry::square(3.0 * kLambda / 8.0);
  const double f = 1.0e9;
  const double length = 10.0 * kSpeedOfLight / f;
  const double theta = 0.35;
  const Eigen::MatrixXcd h =
      synth_channel({{theta, length, 1.0}}, sq, {f}, kLambda, 0.0, 0.0, rng);
  REQUIRE(h.rows() == 4);
  REQUIRE(h.cols() == 1);
  for (int m = 0; m < 4; ++m) {
    const std::complex<double> expect =
        std::polar(1.0, steering_phase(sq, m, theta, kLambda));
    CHECK(std::abs(h(m, 0) - expect) < 1e-9);
  }
}

TEST_CASE("synth_channel is linear in paths") {
  const ArrayGeometry sq = ArrayGeometry::square(3.0 * kLambda / 8.0);
  const std::vector<double> freqs = make_subcarriers(kFc, 40e6, 8);
  const PathComponent p1{0.3, 7.0, 1.0};
  const PathComponent p2{-1.1, 11.5, 0.4};
  const Eigen::MatrixXcd h1 = synth_channel({p1}, sq, freqs, kLambda, 0.0, 0.0, rng);
  const Eigen::MatrixXcd h2 = synth_channel({p2}, sq, freqs, kLambda, 0.0, 0.0, rng);
  const Eigen::MatrixXcd sum = synth_channel({p1, p2}, sq, freqs, kLambda, 0.0, 0.0, rng);
  CHECK((sum - h1 - h2).norm() < 1e-12);
}

TEST_CASE("packet phase offset psi = pi negates the channel") {
  const ArrayGeometry sq = ArrayGeometry::square(3.0 * kLambda / 8.0);
  const std::vector<double> freqs = make_subcarriers(kFc, 40e6, 8);
  const Eigen::MatrixXcd h0 =
      synth_channel({{0.2, 9.0, 1.0}}, sq, freqs, kLambda, 0.0, 0.0, rng);
  const Eigen::MatrixXcd hpi =
      synth_channel({{0.2, 9.0, 1.0}}, sq, freqs, kLambda, M_PI, 0.0, rng);
  CHECK((hpi + h0).norm() < 1e-12);
}

TEST_CASE("linear-array aliasing: broadside pair (theta, pi - theta) is exact") {
  const ArrayGeometry lin = ArrayGeometry::linear(4, kLambda / 2);
  const std::vector<double> freqs = make_subcarriers(kFc, 40e6, 16);
  for (double deg : {10.0, 35.0, 62.0, 81.0}) {
    // The broadside pair (theta, pi - theta) maps to the axis pair (a, -a);
    // negate exactly so the equality is bitwise rather than ulp-perturbed by
    // the pi - theta rounding.
    const double a = broadside_to_axis(deg * M_PI / 180.0);
    const Eigen::MatrixXcd ha =
        synth_channel({{a, 8.0, 1.0}}, lin, freqs, kLambda, 0.4, 0.0, rng);
    const Eigen::MatrixXcd hb =
        synth_channel({{-a, 8.0, 1.0}}, lin, freqs, kLambda, 0.4, 0.0, rng);
    CHECK((ha - hb).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("square array separates bearings a degree apart across its range") {
  const ArrayGeometry sq = ArrayGeometry::square(3.0 * kLambda / 8.0);
  std::vector<Eigen::VectorXcd> steer;
  for (int deg = -160; deg <= 160; ++deg) {
    steer.push_back(steering_vector(sq, deg * M_PI / 180.0, kLambda));
  }
  double min_dist = 1e300;
  for (size_t i = 0; i < steer.size(); ++i) {
    for (size_t j = i + 1; j < steer.size(); ++j) {
      min_dist = std::min(min_dist, (steer[i] - steer[j]).cwiseAbs().maxCoeff());
    }
  }
  CHECK(min_dist > 1e-6);
}

TEST_CASE("channel noise is seed deterministic") {
  const ArrayGeometry sq = ArrayGeometry::square(3.0 * kLambda / 8.0);
  const std::vector<double> freqs = make_subcarriers(kFc, 40e6, 8);
  std::mt19937_64 a(123), b(123);
  const Eigen::MatrixXcd ha =
      synth_channel({{0.2, 9.0, 1.0}}, sq, freqs, kLambda, 0.1, 0.05, a);
  const Eigen::MatrixXcd hb =
      synth_channel({{0.2, 9.0, 1.0}}, sq, freqs, kLambda, 0.1, 0.05, b);
  CHECK((ha - hb).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("synth_rssi log-distance values") {
  std::mt19937_64 r(1);
  const RssiModel model{-30.0, 2.0, 0.0};
  CHECK(synth_rssi(1.0, model, r) == doctest::Approx(-30.0).epsilon(1e-12));
  CHECK(synth_rssi(10.0, model, r) == doctest::Approx(-50.0).epsilon(1e-12));

  // Monotone decreasing in distance without shadowing.
  double prev = 1e9;
  for (double d = 1.0; d < 60.0; d += 3.7) {
    const double v = synth_rssi(d, model, r);
    CHECK(v < prev);
    prev = v;
  }

  std::mt19937_64 s1(9), s2(9);
  const RssiModel noisy{-30.0, 2.0, 2.0};
  CHECK(synth_rssi(5.0, noisy, s1) == synth_rssi(5.0, noisy, s2));
  CHECK_THROWS_AS(synth_rssi(0.0, model, r), std::invalid_argument);
}

TEST_CASE("make_subcarriers spans the band around the center") {
  const std::vector<double> f = make_subcarriers(kFc, 40e6, 32);
  REQUIRE(f.size() == 32);
  CHECK(f.back() - f.front() == doctest::Approx(40e6 * 31.0 / 32.0));
  double mean = 0.0;
  for (double v : f) mean += v;
  mean /= f.size();
  CHECK(mean == doctest::Approx(kFc).epsilon(1e-12));
  for (size_t i = 1; i < f.size(); ++i) CHECK(f[i] > f[i - 1]);
}
