#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "wifislam/channel.hpp"
#include "wifislam/geometry.hpp"

// Readers and writers for the on-disk run formats: CSV traces, the CSI
// JSON-lines stream, and the run manifest. All numeric text is emitted as
// the shortest decimal that parses back to the identical double, so every
// reader/writer pair round-trips bit exactly.

namespace wifislam {

struct TimedPose {
  double t = 0.0;
  Pose pose;
};

struct OdomRecord {
  double t = 0.0;
  Tangent6 z;
};

struct BearingRecord {
  double t = 0.0;
  std::string ap_id;
  double theta_rad = 0.0;
  double sigma = 0.0;
};

struct RssiRecord {
  double t = 0.0;
  std::string ap_id;
  double rssi = 0.0;
};

struct ApRecord {
  std::string ap_id;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
};

std::string format_double(double v);
double parse_double_field(const std::string& text, const std::string& context);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// header: t,x,y,z,qx,qy,qz,qw
void write_trajectory_csv(const std::filesystem::path& path,
                          const std::vector<TimedPose>& rows);
std::vector<TimedPose> read_trajectory_csv(const std::filesystem::path& path);

// header: t,dtx,dty,dtz,drx,dry,drz
void write_odometry_csv(const std::filesystem::path& path,
                        const std::vector<OdomRecord>& rows);
std::vector<OdomRecord> read_odometry_csv(const std::filesystem::path& path);

// header: t,ap_id,theta_rad,sigma
void write_bearings_csv(const std::filesystem::path& path,
                        const std::vector<BearingRecord>& rows);
std::vector<BearingRecord> read_bearings_csv(const std::filesystem::path& path);

// header: t,ap_id,rssi
void write_rssi_csv(const std::filesystem::path& path,
                    const std::vector<RssiRecord>& rows);
std::vector<RssiRecord> read_rssi_csv(const std::filesystem::path& path);

// header: ap_id,x,y,z
void write_aps_csv(const std::filesystem::path& path,
                   const std::vector<ApRecord>& rows);
std::vector<ApRecord> read_aps_csv(const std::filesystem::path& path);

// One JSON object per line: {"t","ap_id","rssi","lambda","freqs":[...],
// "H":[[[re,im],...],...]} with H rows indexed by antenna.
void write_csi_jsonl(const std::filesystem::path& path,
                     const std::vector<CsiPacket>& packets);
std::vector<CsiPacket> read_csi_jsonl(const std::filesystem::path& path);

// Run provenance. The deterministic part (scenario, seed, versions, file
// checksums) lives in manifest.json; wall-clock timings go to timings.txt
// beside it so that equal-seed runs still produce byte-identical manifests.
struct RunManifest {
  std::string scenario;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> versions;
  std::map<std::string, std::string> checksums;
  std::map<std::string, double> timings_sec;
};

std::string checksum_file(const std::filesystem::path& path);

// Checksums every regular file under run_dir (recursive, sorted relative
// paths) except manifest.json, timings.txt, and anything under a ".partial"
// quarantine directory.
void stamp_checksums(const std::filesystem::path& run_dir, RunManifest& manifest);

void write_manifest(const std::filesystem::path& run_dir,
                    const RunManifest& manifest);
RunManifest read_manifest(const std::filesystem::path& run_dir);

}  // namespace wifislam
