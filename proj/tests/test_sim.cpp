#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>

#include "wifislam/bearing.hpp"
#include "wifislam/errors.hpp"
#include "wifislam/geometry.hpp"
#include "wifislam/sim.hpp"

using namespace wifislam;

namespace {

double wrap_pi(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a < 0.0) a += 2.0 * M_PI;
  return a - M_PI;
}

Scenario straight_line(double length_m) {
  Scenario scn;
  scn.name = "line";
  scn.waypoints = {{0.0, 0.0}, {length_m, 0.0}};
  scn.aps = {ApSpec{"ap0", {length_m / 2.0, 5.0, 3.0}}};
  return scn;
}

}  // namespace

TEST_CASE("generate_truth samples the odometry clock inclusively") {
  const Scenario scn = straight_line(10.0);
  const std::vector<TruthSample> truth = generate_truth(scn);
  REQUIRE(truth.size() == 101);
  CHECK(truth.front().t == 0.0);
  CHECK(truth.back().t == doctest::Approx(10.0));
  CHECK((truth.back().pose.t - Eigen::Vector3d(10.0, 0.0, 0.0)).norm() < 1e-9);

  for (const TruthSample& s : truth) {
    CHECK(s.pose.q.coeffs() ==
          Eigen::Quaterniond::Identity().coeffs());
  }
}

TEST_CASE("closed square path returns to the start") {
  Scenario scn;
  scn.waypoints = {{0, 0}, {8, 0}, {8, 8}, {0, 8}, {0, 0}};
  scn.aps = {ApSpec{"ap0", {4.0, -2.0, 3.0}}};
  const std::vector<TruthSample> truth = generate_truth(scn);
  CHECK((truth.back().pose.t.head<2>() - Eigen::Vector2d(0, 0)).norm() < 1e-9);

  // Three interior corners at the default pi/2 rad/s: one second each, so
  // the run lasts 32 s travel + 3 s turning.
  const TruthTrajectory traj = build_trajectory(scn);
  CHECK(traj.duration() == doctest::Approx(35.0));

  // Mid-turn sample: position pinned at the corner while the yaw sweeps.
  const Pose mid_turn = traj.pose_at(8.5);
  CHECK((mid_turn.t.head<2>() - Eigen::Vector2d(8, 0)).norm() < 1e-12);
  CHECK(mid_turn.yaw() == doctest::Approx(M_PI / 4.0));
}

TEST_CASE("scenario validation rejects malformed inputs") {
  Scenario line = straight_line(10.0);
  line.waypoints.push_back(line.waypoints.back());
  CHECK_THROWS_AS(generate_truth(line), DataError);

  Scenario single = straight_line(10.0);
  single.waypoints.resize(1);
  CHECK_THROWS_AS(generate_truth(single), DataError);

  Scenario slow = straight_line(10.0);
  slow.speed = 0.0;
  CHECK_THROWS_AS(generate_truth(slow), DataError);

  Scenario weird = straight_line(10.0);
  weird.array_type = "hexagonal";
  CHECK_THROWS_AS(validate_scenario(weird), DataError);

  Scenario dup = straight_line(10.0);
  dup.aps.push_back(dup.aps[0]);
  CHECK_THROWS_AS(validate_scenario(dup), DataError);
}

TEST_CASE("noiseless odometry dead-reckons back to the truth") {
  Scenario scn;
  scn.waypoints = {{0, 0}, {8, 0}, {8, 8}, {0, 8}, {0, 0}};
  scn.aps = {ApSpec{"ap0", {4.0, -2.0, 3.0}}};
  const std::vector<TruthSample> truth = generate_truth(scn);
  const std::vector<Tangent6> z = corrupt_odometry(truth, OdomNoiseSpec{}, 99);
  REQUIRE(z.size() == truth.size() - 1);

  Pose p = truth[0].pose;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p = odom_compose(p, z[i]);
    CHECK((p.t - truth[i + 1].pose.t).norm() < 1e-9);
  }
  CHECK(p.q.angularDistance(truth.back().pose.q) < 1e-9);
}

TEST_CASE("pure yaw bias integrates to exactly bias * elapsed time") {
  const Scenario scn = straight_line(10.0);
  const std::vector<TruthSample> truth = generate_truth(scn);
  OdomNoiseSpec noise;
  noise.yaw_bias = 0.01;
  const std::vector<Tangent6> z = corrupt_odometry(truth, noise, 7);

  Pose p = truth[0].pose;
  for (const Tangent6& step : z) p = odom_compose(p, step);
  // 100 steps of 0.1 s at 0.01 rad/s: terminal heading error 0.1 rad.
  CHECK(std::abs(wrap_pi(p.yaw() - truth.back().pose.yaw()) - 0.1) < 1e-6);
}

TEST_CASE("odometry corruption is seed-reproducible and draw-stable") {
  const Scenario scn = straight_line(10.0);
  const std::vector<TruthSample> truth = generate_truth(scn);
  OdomNoiseSpec noise;
  noise.sigma_t = 0.02;
  noise.sigma_r = 0.001;

  const std::vector<Tangent6> a = corrupt_odometry(truth, noise, 31);
  const std::vector<Tangent6> b = corrupt_odometry(truth, noise, 31);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].dt == b[i].dt);
    CHECK(a[i].dr == b[i].dr);
  }

  // Zeroing the translation sigma must not shift the rotation noise stream:
  // every step consumes six draws regardless.
  OdomNoiseSpec no_trans = noise;
  no_trans.sigma_t = 0.0;
  const std::vector<Tangent6> c = corrupt_odometry(truth, no_trans, 31);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(c[i].dr == a[i].dr);
    CHECK(c[i].dt != a[i].dt);
  }
}

TEST_CASE("clean single-path CSI closes the loop with the bearing estimator") {
  Scenario scn = lab25x30();
  scn.multipath.paths = 0;
  scn.csi_noise_std = 0.0;
  const TruthTrajectory traj = build_trajectory(scn);
  const std::vector<SimPacket> stream = generate_csi_stream(scn, traj);
  REQUIRE(!stream.empty());

  const ArrayGeometry geom = scn.make_array();
  int checked = 0;
  for (std::size_t i = 0; i < stream.size(); i += 97) {
    const SimPacket& sp = stream[i];
    // Stay inside the square array's +-160 degree resolvable range.
    if (std::abs(sp.true_azimuth) > 150.0 * M_PI / 180.0) continue;
    BearingWindow window(sp.packet.ap_id, kDefaultWindowSec);
    window.push(sp.packet);
    const BearingMeasurement est = pcab_bearing(window, geom);
    CHECK(std::abs(wrap_pi(est.theta - sp.true_azimuth)) <
          kDefaultGridStepRad + 1e-9);
    ++checked;
  }
  CHECK(checked > 10);
}

TEST_CASE("stationary robot with one path gives packets equal up to a phase") {
  Scenario scn = lab25x30();
  scn.multipath.paths = 0;
  scn.csi_noise_std = 0.0;
  std::vector<TruthTrajectory::Phase> phases(1);
  phases[0].t0 = 0.0;
  phases[0].t1 = 2.0;
  phases[0].pos = Eigen::Vector2d(5.0, 5.0);
  phases[0].speed = 0.0;
  phases[0].yaw0 = 0.3;
  const TruthTrajectory still(std::move(phases));

  const std::vector<SimPacket> stream = generate_csi_stream(scn, still);
  const Eigen::MatrixXcd& h0 = stream[0].packet.h;
  for (std::size_t i = 4; i < stream.size(); i += 4) {
    if (stream[i].packet.ap_id != stream[0].packet.ap_id) continue;
    const Eigen::MatrixXcd& hk = stream[i].packet.h;
    const std::complex<double> ratio = hk(0, 0) / h0(0, 0);
    CHECK(std::abs(std::abs(ratio) - 1.0) < 1e-9);
    CHECK((hk - ratio * h0).norm() < 1e-9 * h0.norm());
  }
}

TEST_CASE("shadow-free RSSI peaks at the closest approach") {
  Scenario scn = lab25x30();
  const TruthTrajectory traj = build_trajectory(scn);
  const std::vector<SimPacket> stream = generate_csi_stream(scn, traj);

  double best_rssi = -1e9;
  double best_t = 0.0;
  for (const SimPacket& sp : stream) {
    if (sp.packet.ap_id != "ap1") continue;
    if (sp.packet.rssi > best_rssi) {
      best_rssi = sp.packet.rssi;
      best_t = sp.packet.timestamp;
    }
  }
  // ap1 sits at (27, 15); the east side passes it at (25, 15).
  const Pose at_best = traj.pose_at(best_t);
  CHECK((at_best.t.head<2>() - Eigen::Vector2d(25.0, 15.0)).norm() < 0.3);
}

TEST_CASE("csi stream is time-ordered, complete, and deterministic") {
  Scenario scn = lab25x30();
  const TruthTrajectory traj = build_trajectory(scn);
  const std::vector<SimPacket> a = generate_csi_stream(scn, traj);
  const std::vector<SimPacket> b = generate_csi_stream(scn, traj);

  // 113 s at 5 Hz inclusive = 566 ticks, four APs each.
  REQUIRE(a.size() == 566 * 4);
  REQUIRE(b.size() == a.size());

  for (std::size_t i = 1; i < a.size(); ++i) {
    CHECK(a[i].packet.timestamp >= a[i - 1].packet.timestamp);
  }
  for (std::size_t i = 0; i < a.size(); i += 211) {
    CHECK(a[i].packet.h == b[i].packet.h);
    CHECK(a[i].packet.rssi == b[i].packet.rssi);
    CHECK(a[i].true_azimuth == b[i].true_azimuth);
  }
}

TEST_CASE("scenario text round-trips exactly") {
  const Scenario scn = lab25x30_drift();
  const std::string text = write_scenario(scn);
  const Scenario parsed = parse_scenario(text);
  CHECK(write_scenario(parsed) == text);
  CHECK(parsed.name == "lab25x30_drift");
  CHECK(parsed.odom_noise.yaw_bias == 0.002);
  CHECK(parsed.waypoints.size() == 5);
  CHECK(parsed.aps.size() == 4);

  const std::string with_comments =
      "# a scenario\n" + text + "\n\n# trailing comment\n";
  CHECK(write_scenario(parse_scenario(with_comments)) == text);

  CHECK_THROWS_AS(parse_scenario("nonsense_key = 3\n" + text), DataError);
  CHECK_THROWS_AS(parse_scenario("speed = fast\n"), DataError);
  CHECK_THROWS_AS(parse_scenario("waypoint = 1\n"), DataError);
  CHECK_THROWS_AS(parse_scenario(""), DataError);
}
