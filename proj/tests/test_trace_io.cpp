#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>

#include "wifislam/errors.hpp"
#include "wifislam/hash.hpp"
#include "wifislam/sim.hpp"
#include "wifislam/trace_io.hpp"

using namespace wifislam;
namespace fs = std::filesystem;

namespace {

bool same_bits(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / "wifislam_trace_io";
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const std::vector<double> kAwkward = {
    0.1,    1.0 / 3.0, -2.718281828459045e-15, 6.02214076e23, -0.0, 113.0,
    1e-300, M_PI,      -1.0000000000000002,    0.0};

}  // namespace

TEST_CASE("doubles survive the text format bit-exactly") {
  std::mt19937_64 rng(404);
  std::normal_distribution<double> n;
  for (double v : kAwkward) {
    CHECK(same_bits(parse_double_field(format_double(v), "test"), v));
  }
  for (int i = 0; i < 1000; ++i) {
    const double v = n(rng) * std::pow(10.0, int(n(rng) * 30.0));
    CHECK(same_bits(parse_double_field(format_double(v), "test"), v));
  }
  CHECK_THROWS_AS(parse_double_field("3.5x", "test"), DataError);
  CHECK_THROWS_AS(parse_double_field("", "test"), DataError);
  CHECK_THROWS_AS(parse_double_field("nope", "test"), DataError);
}

TEST_CASE("trajectory csv round-trips bit-exactly") {
  const fs::path dir = scratch_dir();
  std::vector<TimedPose> rows;
  for (std::size_t i = 0; i + 7 < kAwkward.size(); ++i) {
    TimedPose r;
    r.t = 0.1 * double(i);
    r.pose.t = Eigen::Vector3d(kAwkward[i], kAwkward[i + 1], kAwkward[i + 2]);
    r.pose.q = Eigen::Quaterniond(kAwkward[i + 3] + 2.0, kAwkward[i + 4],
                                  kAwkward[i + 5], kAwkward[i + 6])
                   .normalized();
    rows.push_back(r);
  }
  write_trajectory_csv(dir / "traj.csv", rows);
  const std::vector<TimedPose> back = read_trajectory_csv(dir / "traj.csv");
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(same_bits(back[i].t, rows[i].t));
    for (int k = 0; k < 3; ++k)
      CHECK(same_bits(back[i].pose.t[k], rows[i].pose.t[k]));
    for (int k = 0; k < 4; ++k)
      CHECK(same_bits(back[i].pose.q.coeffs()[k], rows[i].pose.q.coeffs()[k]));
  }
}

TEST_CASE("odometry, bearing, rssi, and ap tables round-trip") {
  const fs::path dir = scratch_dir();

  std::vector<OdomRecord> odom(3);
  for (int i = 0; i < 3; ++i) {
    odom[i].t = 0.1 * (i + 1);
    odom[i].z.dt = Eigen::Vector3d(kAwkward[i], kAwkward[i + 1], -0.0);
    odom[i].z.dr = Eigen::Vector3d(1e-300, 0.25, kAwkward[i + 2]);
  }
  write_odometry_csv(dir / "odometry.csv", odom);
  const std::vector<OdomRecord> odom_back =
      read_odometry_csv(dir / "odometry.csv");
  REQUIRE(odom_back.size() == odom.size());
  for (std::size_t i = 0; i < odom.size(); ++i) {
    CHECK(odom_back[i].z.dt == odom[i].z.dt);
    CHECK(odom_back[i].z.dr == odom[i].z.dr);
  }

  const std::vector<BearingRecord> bearings = {
      {0.5, "ap0", 0.1, 0.0872664625997164787},
      {0.7, "ap1", -2.9, 0.0872664625997164787}};
  write_bearings_csv(dir / "bearings.csv", bearings);
  const std::vector<BearingRecord> bearings_back =
      read_bearings_csv(dir / "bearings.csv");
  REQUIRE(bearings_back.size() == 2);
  CHECK(bearings_back[1].ap_id == "ap1");
  CHECK(same_bits(bearings_back[1].theta_rad, -2.9));
  CHECK(same_bits(bearings_back[0].sigma, bearings[0].sigma));

  const std::vector<RssiRecord> rssi = {{0.2, "ap0", -47.25},
                                        {0.4, "ap1", -63.0}};
  write_rssi_csv(dir / "rssi.csv", rssi);
  CHECK(read_rssi_csv(dir / "rssi.csv")[1].rssi == -63.0);

  const std::vector<ApRecord> aps = {{"ap0", {12.5, -2.0, 3.0}},
                                     {"ap1", {27.0, 15.0, 3.0}}};
  write_aps_csv(dir / "aps.csv", aps);
  const std::vector<ApRecord> aps_back = read_aps_csv(dir / "aps.csv");
  REQUIRE(aps_back.size() == 2);
  CHECK(aps_back[0].position == aps[0].position);
  CHECK(aps_back[1].ap_id == "ap1");
}

TEST_CASE("csi jsonl round-trips generated packets bit-exactly") {
  const fs::path dir = scratch_dir();
  Scenario scn = lab25x30();
  scn.csi_noise_std = 0.05;
  const TruthTrajectory traj = build_trajectory(scn);
  std::vector<SimPacket> stream = generate_csi_stream(scn, traj);
  std::vector<CsiPacket> packets;
  for (std::size_t i = 0; i < 24 && i < stream.size(); ++i) {
    packets.push_back(stream[i].packet);
  }

  write_csi_jsonl(dir / "csi.jsonl", packets);
  const std::vector<CsiPacket> back = read_csi_jsonl(dir / "csi.jsonl");
  REQUIRE(back.size() == packets.size());
  for (std::size_t i = 0; i < packets.size(); ++i) {
    CHECK(back[i].timestamp == packets[i].timestamp);
    CHECK(back[i].ap_id == packets[i].ap_id);
    CHECK(same_bits(back[i].rssi, packets[i].rssi));
    CHECK(same_bits(back[i].lambda, packets[i].lambda));
    REQUIRE(back[i].freqs.size() == packets[i].freqs.size());
    for (std::size_t k = 0; k < packets[i].freqs.size(); ++k) {
      CHECK(same_bits(back[i].freqs[k], packets[i].freqs[k]));
    }
    REQUIRE(back[i].h.rows() == packets[i].h.rows());
    REQUIRE(back[i].h.cols() == packets[i].h.cols());
    CHECK(back[i].h == packets[i].h);
  }

  // Rewriting what was read reproduces the file byte for byte.
  write_csi_jsonl(dir / "csi2.jsonl", back);
  CHECK(read_text_file(dir / "csi2.jsonl") ==
        read_text_file(dir / "csi.jsonl"));
}

TEST_CASE("malformed trace files raise data errors") {
  const fs::path dir = scratch_dir();

  CHECK_THROWS_AS(read_trajectory_csv(dir / "missing.csv"), DataError);

  write_text_file(dir / "bad_header.csv", "time,x,y\n");
  CHECK_THROWS_AS(read_trajectory_csv(dir / "bad_header.csv"), DataError);

  write_text_file(dir / "short_row.csv",
                  "t,x,y,z,qx,qy,qz,qw\n0.1,1,2,3\n");
  CHECK_THROWS_AS(read_trajectory_csv(dir / "short_row.csv"), DataError);

  write_text_file(dir / "bad_num.csv",
                  "t,ap_id,rssi\n0.1,ap0,strong\n");
  CHECK_THROWS_AS(read_rssi_csv(dir / "bad_num.csv"), DataError);

  write_text_file(dir / "bad.jsonl", "{not json\n");
  CHECK_THROWS_AS(read_csi_jsonl(dir / "bad.jsonl"), DataError);

  write_text_file(dir / "missing_field.jsonl",
                  R"({"t":0.1,"ap_id":"ap0","rssi":-40})"
                  "\n");
  CHECK_THROWS_AS(read_csi_jsonl(dir / "missing_field.jsonl"), DataError);

  write_text_file(dir / "ragged.jsonl",
                  R"({"t":0.1,"ap_id":"a","rssi":-40,"lambda":0.05,)"
                  R"("freqs":[1.0],"H":[[[1,0]],[[1,0],[0,1]]]})"
                  "\n");
  CHECK_THROWS_AS(read_csi_jsonl(dir / "ragged.jsonl"), DataError);
}

TEST_CASE("checksums use the 64-bit fnv1a stream hash") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);

  const fs::path dir = scratch_dir();
  write_text_file(dir / "blob.bin", "a");
  CHECK(checksum_file(dir / "blob.bin") == "af63dc4c8601ec8c");
}

TEST_CASE("manifest writes deterministically and round-trips") {
  const fs::path dir = scratch_dir();
  write_text_file(dir / "truth.csv", "t,x\n0,1\n");
  fs::create_directories(dir / "slam");
  write_text_file(dir / "slam" / "trajectory.csv", "t,x\n0,1\n");

  fs::create_directories(dir / "slam.partial");
  write_text_file(dir / "slam.partial" / "leftover.csv", "t\n");

  RunManifest m;
  m.scenario = "scenario.cfg";
  m.seed = 1234567890123456789ull;
  m.versions["wifislam"] = kVersion;
  m.timings_sec["simulate"] = 0.731;
  stamp_checksums(dir, m);
  REQUIRE(m.checksums.size() == 2);
  CHECK(m.checksums.count("truth.csv") == 1);
  CHECK(m.checksums.count("slam/trajectory.csv") == 1);

  write_manifest(dir, m);
  const std::string first = read_text_file(dir / "manifest.json");

  // Re-stamping after the manifest exists must ignore manifest.json and
  // timings.txt themselves.
  RunManifest m2 = m;
  m2.checksums.clear();
  m2.timings_sec["simulate"] = 9.9;
  stamp_checksums(dir, m2);
  CHECK(m2.checksums == m.checksums);
  write_manifest(dir, m2);
  CHECK(read_text_file(dir / "manifest.json") == first);

  const RunManifest back = read_manifest(dir);
  CHECK(back.scenario == m.scenario);
  CHECK(back.seed == m.seed);
  CHECK(back.versions.at("wifislam") == kVersion);
  CHECK(back.checksums == m.checksums);
  CHECK(back.timings_sec.at("simulate") == 9.9);
}
