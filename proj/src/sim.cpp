#include "wifislam/sim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <stdexcept>

#include "wifislam/errors.hpp"
#include "wifislam/hash.hpp"

namespace wifislam {

namespace {

constexpr double kReflectExtraMin = 0.5;
constexpr double kReflectExtraMax = 8.0;

double wrap_to_pi(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a < 0.0) a += 2.0 * M_PI;
  return a - M_PI;
}

std::string trimmed(const std::string& s) {
  const std::size_t first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const std::size_t last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = s.find(',', start);
    if (comma == std::string::npos) {
      parts.push_back(trimmed(s.substr(start)));
      break;
    }
    parts.push_back(trimmed(s.substr(start, comma - start)));
    start = comma + 1;
  }
  return parts;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (trimmed(value.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw DataError("scenario: bad number for '" + key + "': " + value);
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(value, &used);
    if (trimmed(value.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw DataError("scenario: bad integer for '" + key + "': " + value);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(value, &used);
    if (trimmed(value.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw DataError("scenario: bad seed for '" + key + "': " + value);
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw DataError("scenario: bad boolean for '" + key + "': " + value);
}

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

ArrayGeometry Scenario::make_array() const {
  if (array_type == "square") {
    return ArrayGeometry::square(array_side_lambda * wavelength());
  }
  if (array_type == "linear") {
    return ArrayGeometry::linear(array_count, array_spacing_lambda * wavelength());
  }
  throw DataError("scenario: unknown array type '" + array_type + "'");
}

Scenario lab25x30() {
  Scenario scn;
  scn.name = "lab25x30";
  scn.waypoints = {{0.0, 0.0}, {25.0, 0.0}, {25.0, 30.0}, {0.0, 30.0}, {0.0, 0.0}};
  scn.aps = {
      ApSpec{"ap0", {12.5, -2.0, 3.0}},
      ApSpec{"ap1", {27.0, 15.0, 3.0}},
      ApSpec{"ap2", {12.5, 32.0, 3.0}},
      ApSpec{"ap3", {-2.0, 15.0, 3.0}},
  };
  return scn;
}

Scenario lab25x30_drift() {
  Scenario scn = lab25x30();
  scn.name = "lab25x30_drift";
  scn.odom_noise.sigma_t = 0.01;
  scn.odom_noise.sigma_r = 0.2 * M_PI / 180.0;
  scn.odom_noise.yaw_bias = 0.002;
  return scn;
}

void validate_scenario(const Scenario& scn) {
  if (scn.speed <= 0.0) throw DataError("scenario: speed must be positive");
  if (scn.turn_rate <= 0.0) throw DataError("scenario: turn_rate must be positive");
  if (scn.odom_rate <= 0.0) throw DataError("scenario: odom_rate must be positive");
  if (scn.csi_rate <= 0.0) throw DataError("scenario: csi_rate must be positive");
  if (scn.center_freq_hz <= 0.0 || scn.bandwidth_hz <= 0.0) {
    throw DataError("scenario: radio frequencies must be positive");
  }
  if (scn.subcarriers < 1) throw DataError("scenario: subcarriers must be >= 1");
  if (scn.multipath.paths < 0) throw DataError("scenario: multipath paths must be >= 0");
  if (scn.multipath.amp_min > scn.multipath.amp_max) {
    throw DataError("scenario: multipath amplitude range is inverted");
  }
  if (scn.waypoints.size() < 2) throw DataError("scenario: need at least two waypoints");
  for (std::size_t i = 0; i + 1 < scn.waypoints.size(); ++i) {
    if ((scn.waypoints[i + 1] - scn.waypoints[i]).norm() < 1e-9) {
      throw DataError("scenario: duplicate consecutive waypoints");
    }
  }
  for (std::size_t i = 0; i < scn.aps.size(); ++i) {
    if (scn.aps[i].id.empty()) throw DataError("scenario: empty AP id");
    for (std::size_t j = i + 1; j < scn.aps.size(); ++j) {
      if (scn.aps[i].id == scn.aps[j].id) {
        throw DataError("scenario: duplicate AP id '" + scn.aps[i].id + "'");
      }
    }
  }
  scn.make_array();
}

TruthTrajectory::TruthTrajectory(std::vector<Phase> phases)
    : phases_(std::move(phases)) {
  if (phases_.empty()) {
    throw DataError("trajectory: no motion phases");
  }
}

double TruthTrajectory::duration() const { return phases_.back().t1; }

Pose TruthTrajectory::pose_at(double t) const {
  t = std::min(std::max(t, 0.0), duration());
  std::size_t idx = phases_.size() - 1;
  for (std::size_t i = 0; i < phases_.size(); ++i) {
    if (t <= phases_[i].t1) {
      idx = i;
      break;
    }
  }
  const Phase& ph = phases_[idx];
  const double dt = t - ph.t0;
  const Eigen::Vector2d xy = ph.pos + ph.dir * (ph.speed * dt);
  const double yaw = ph.yaw0 + ph.yaw_rate * dt;
  return Pose::from_xy_yaw(xy.x(), xy.y(), yaw);
}

TruthTrajectory build_trajectory(const Scenario& scn) {
  validate_scenario(scn);
  std::vector<TruthTrajectory::Phase> phases;
  double clock = 0.0;
  double heading = 0.0;
  for (std::size_t i = 0; i + 1 < scn.waypoints.size(); ++i) {
    const Eigen::Vector2d a = scn.waypoints[i];
    const Eigen::Vector2d b = scn.waypoints[i + 1];
    const Eigen::Vector2d dir = (b - a).normalized();
    const double yaw = std::atan2(dir.y(), dir.x());

    if (i > 0) {
      const double turn = wrap_to_pi(yaw - heading);
      if (std::abs(turn) > 1e-12) {
        TruthTrajectory::Phase ph;
        ph.t0 = clock;
        ph.t1 = clock + std::abs(turn) / scn.turn_rate;
        ph.pos = a;
        ph.speed = 0.0;
        ph.yaw0 = heading;
        ph.yaw_rate = turn > 0.0 ? scn.turn_rate : -scn.turn_rate;
        phases.push_back(ph);
        clock = ph.t1;
      }
    }

    TruthTrajectory::Phase ph;
    ph.t0 = clock;
    ph.t1 = clock + (b - a).norm() / scn.speed;
    ph.pos = a;
    ph.dir = dir;
    ph.speed = scn.speed;
    ph.yaw0 = yaw;
    ph.yaw_rate = 0.0;
    phases.push_back(ph);
    clock = ph.t1;
    heading = yaw;
  }
  return TruthTrajectory(std::move(phases));
}

std::vector<TruthSample> generate_truth(const Scenario& scn) {
  const TruthTrajectory traj = build_trajectory(scn);
  const int n = static_cast<int>(std::floor(traj.duration() * scn.odom_rate + 1e-9));
  std::vector<TruthSample> out;
  out.reserve(n + 1);
  for (int k = 0; k <= n; ++k) {
    const double t = static_cast<double>(k) / scn.odom_rate;
    out.push_back(TruthSample{t, traj.pose_at(t)});
  }
  return out;
}

Eigen::Quaterniond quat_from_rotvec(const Eigen::Vector3d& v) {
  const double angle = v.norm();
  if (angle < 1e-12) return Eigen::Quaterniond::Identity();
  return Eigen::Quaterniond(Eigen::AngleAxisd(angle, v / angle));
}

std::vector<Tangent6> corrupt_odometry(const std::vector<TruthSample>& truth,
                                       const OdomNoiseSpec& noise,
                                       std::uint64_t seed) {
  if (truth.size() < 2) {
    throw DataError("corrupt_odometry: need at least two truth poses");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Tangent6> out;
  out.reserve(truth.size() - 1);
  for (std::size_t i = 0; i + 1 < truth.size(); ++i) {
    const double dt_step = truth[i + 1].t - truth[i].t;
    Tangent6 z = odom_predict(truth[i].pose, truth[i + 1].pose);
    // Fixed draw count per step keeps the stream stable when sigmas toggle.
    const double n0 = gauss(rng), n1 = gauss(rng), n2 = gauss(rng);
    const double n3 = gauss(rng), n4 = gauss(rng), n5 = gauss(rng);
    z.dt += noise.sigma_t * Eigen::Vector3d(n0, n1, n2);
    const Eigen::Quaterniond q_rel(
        std::sqrt(std::max(0.0, 1.0 - z.dr.squaredNorm())), z.dr.x(), z.dr.y(),
        z.dr.z());
    const Eigen::Quaterniond q_noise =
        quat_from_rotvec(noise.sigma_r * Eigen::Vector3d(n3, n4, n5));
    const Eigen::Quaterniond q_bias(Eigen::AngleAxisd(
        noise.yaw_bias * dt_step, Eigen::Vector3d::UnitZ()));
    // Exact composition: over a straight run the biases compound to a yaw of
    // exactly bias * elapsed time.
    z.dr = canonicalized(q_rel * q_noise * q_bias).vec();
    out.push_back(z);
  }
  return out;
}

std::vector<SimPacket> generate_csi_stream(const Scenario& scn,
                                           const TruthTrajectory& traj) {
  validate_scenario(scn);
  const double lambda = scn.wavelength();
  const ArrayGeometry geom = scn.make_array();
  const std::vector<double> freqs =
      make_subcarriers(scn.center_freq_hz, scn.bandwidth_hz, scn.subcarriers);

  struct Reflection {
    double theta_world = 0.0;
    double extra = 0.0;
    double amp = 0.0;
  };
  struct ApStream {
    const ApSpec* ap = nullptr;
    std::mt19937_64 rng;
    std::vector<Reflection> pinned;
  };

  std::vector<ApStream> streams;
  for (const ApSpec& ap : scn.aps) {
    ApStream st;
    st.ap = &ap;
    st.rng.seed(scn.seed ^ fnv1a64(ap.id));
    if (!scn.multipath.rerandomize) {
      for (int r = 0; r < scn.multipath.paths; ++r) {
        Reflection refl;
        refl.theta_world = std::uniform_real_distribution<double>(-M_PI, M_PI)(st.rng);
        refl.extra = std::uniform_real_distribution<double>(kReflectExtraMin,
                                                            kReflectExtraMax)(st.rng);
        refl.amp = std::uniform_real_distribution<double>(
            scn.multipath.amp_min, scn.multipath.amp_max)(st.rng);
        st.pinned.push_back(refl);
      }
    }
    streams.push_back(std::move(st));
  }

  const int n = static_cast<int>(std::floor(traj.duration() * scn.csi_rate + 1e-9));
  std::vector<SimPacket> out;
  out.reserve(static_cast<std::size_t>(n + 1) * streams.size());
  for (int k = 0; k <= n; ++k) {
    const double t = static_cast<double>(k) / scn.csi_rate;
    const Pose pose = traj.pose_at(t);
    const double yaw = pose.yaw();
    const Eigen::Matrix3d rt = rotation_matrix(pose.q).transpose();
    for (ApStream& st : streams) {
      const Eigen::Vector3d d3 = st.ap->position - pose.t;
      const double l_direct = d3.norm();
      const Eigen::Vector3d local = rt * d3;
      const double theta_direct = std::atan2(local.y(), local.x());

      std::vector<PathComponent> paths;
      paths.push_back(PathComponent{theta_direct, l_direct, 1.0});
      for (int r = 0; r < scn.multipath.paths; ++r) {
        Reflection refl;
        if (scn.multipath.rerandomize) {
          refl.theta_world =
              std::uniform_real_distribution<double>(-M_PI, M_PI)(st.rng);
          refl.extra = std::uniform_real_distribution<double>(
              kReflectExtraMin, kReflectExtraMax)(st.rng);
          refl.amp = std::uniform_real_distribution<double>(
              scn.multipath.amp_min, scn.multipath.amp_max)(st.rng);
        } else {
          refl = st.pinned[r];
        }
        paths.push_back(PathComponent{wrap_to_pi(refl.theta_world - yaw),
                                      l_direct + refl.extra, refl.amp});
      }
      const double psi =
          std::uniform_real_distribution<double>(0.0, 2.0 * M_PI)(st.rng);

      SimPacket sp;
      sp.packet.timestamp = t;
      sp.packet.ap_id = st.ap->id;
      sp.packet.lambda = lambda;
      sp.packet.freqs = freqs;
      sp.packet.h = synth_channel(paths, geom, freqs, lambda, psi,
                                  scn.csi_noise_std, st.rng);
      sp.packet.rssi = synth_rssi(l_direct, scn.rssi, st.rng);
      sp.true_azimuth = theta_direct;
      out.push_back(std::move(sp));
    }
  }
  return out;
}

Scenario parse_scenario(const std::string& text) {
  Scenario scn;
  scn.waypoints.clear();
  scn.aps.clear();
  std::istringstream in(text);
  std::string raw;
  while (std::getline(in, raw)) {
    const std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw = raw.substr(0, hash);
    const std::string line = trimmed(raw);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError("scenario: expected 'key = value', got: " + line);
    }
    const std::string key = trimmed(line.substr(0, eq));
    const std::string value = trimmed(line.substr(eq + 1));

    if (key == "name") {
      scn.name = value;
    } else if (key == "seed") {
      scn.seed = parse_u64(key, value);
    } else if (key == "speed") {
      scn.speed = parse_double(key, value);
    } else if (key == "turn_rate") {
      scn.turn_rate = parse_double(key, value);
    } else if (key == "odom_rate") {
      scn.odom_rate = parse_double(key, value);
    } else if (key == "csi_rate") {
      scn.csi_rate = parse_double(key, value);
    } else if (key == "center_freq_hz") {
      scn.center_freq_hz = parse_double(key, value);
    } else if (key == "bandwidth_hz") {
      scn.bandwidth_hz = parse_double(key, value);
    } else if (key == "subcarriers") {
      scn.subcarriers = parse_int(key, value);
    } else if (key == "array_type") {
      scn.array_type = value;
    } else if (key == "array_side_lambda") {
      scn.array_side_lambda = parse_double(key, value);
    } else if (key == "array_count") {
      scn.array_count = parse_int(key, value);
    } else if (key == "array_spacing_lambda") {
      scn.array_spacing_lambda = parse_double(key, value);
    } else if (key == "multipath_paths") {
      scn.multipath.paths = parse_int(key, value);
    } else if (key == "multipath_amp_min") {
      scn.multipath.amp_min = parse_double(key, value);
    } else if (key == "multipath_amp_max") {
      scn.multipath.amp_max = parse_double(key, value);
    } else if (key == "multipath_rerandomize") {
      scn.multipath.rerandomize = parse_bool(key, value);
    } else if (key == "csi_noise_std") {
      scn.csi_noise_std = parse_double(key, value);
    } else if (key == "odom_sigma_t") {
      scn.odom_noise.sigma_t = parse_double(key, value);
    } else if (key == "odom_sigma_r") {
      scn.odom_noise.sigma_r = parse_double(key, value);
    } else if (key == "odom_yaw_bias") {
      scn.odom_noise.yaw_bias = parse_double(key, value);
    } else if (key == "rssi_p0_dbm") {
      scn.rssi.p0_dbm = parse_double(key, value);
    } else if (key == "rssi_exponent") {
      scn.rssi.exponent = parse_double(key, value);
    } else if (key == "rssi_shadow_sigma") {
      scn.rssi.shadow_sigma = parse_double(key, value);
    } else if (key == "waypoint") {
      const std::vector<std::string> parts = split_commas(value);
      if (parts.size() != 2) {
        throw DataError("scenario: waypoint needs 'x, y': " + value);
      }
      scn.waypoints.emplace_back(parse_double(key, parts[0]),
                                 parse_double(key, parts[1]));
    } else if (key == "ap") {
      const std::vector<std::string> parts = split_commas(value);
      if (parts.size() != 4 || parts[0].empty()) {
        throw DataError("scenario: ap needs 'id, x, y, height': " + value);
      }
      scn.aps.push_back(ApSpec{
          parts[0], Eigen::Vector3d(parse_double(key, parts[1]),
                                    parse_double(key, parts[2]),
                                    parse_double(key, parts[3]))});
    } else {
      throw DataError("scenario: unknown key '" + key + "'");
    }
  }
  validate_scenario(scn);
  return scn;
}

std::string write_scenario(const Scenario& scn) {
  std::ostringstream out;
  out << "name = " << scn.name << "\n";
  out << "seed = " << scn.seed << "\n";
  out << "speed = " << fmt_double(scn.speed) << "\n";
  out << "turn_rate = " << fmt_double(scn.turn_rate) << "\n";
  out << "odom_rate = " << fmt_double(scn.odom_rate) << "\n";
  out << "csi_rate = " << fmt_double(scn.csi_rate) << "\n";
  out << "center_freq_hz = " << fmt_double(scn.center_freq_hz) << "\n";
  out << "bandwidth_hz = " << fmt_double(scn.bandwidth_hz) << "\n";
  out << "subcarriers = " << scn.subcarriers << "\n";
  out << "array_type = " << scn.array_type << "\n";
  out << "array_side_lambda = " << fmt_double(scn.array_side_lambda) << "\n";
  out << "array_count = " << scn.array_count << "\n";
  out << "array_spacing_lambda = " << fmt_double(scn.array_spacing_lambda) << "\n";
  out << "multipath_paths = " << scn.multipath.paths << "\n";
  out << "multipath_amp_min = " << fmt_double(scn.multipath.amp_min) << "\n";
  out << "multipath_amp_max = " << fmt_double(scn.multipath.amp_max) << "\n";
  out << "multipath_rerandomize = " << (scn.multipath.rerandomize ? "true" : "false")
      << "\n";
  out << "csi_noise_std = " << fmt_double(scn.csi_noise_std) << "\n";
  out << "odom_sigma_t = " << fmt_double(scn.odom_noise.sigma_t) << "\n";
  out << "odom_sigma_r = " << fmt_double(scn.odom_noise.sigma_r) << "\n";
  out << "odom_yaw_bias = " << fmt_double(scn.odom_noise.yaw_bias) << "\n";
  out << "rssi_p0_dbm = " << fmt_double(scn.rssi.p0_dbm) << "\n";
  out << "rssi_exponent = " << fmt_double(scn.rssi.exponent) << "\n";
  out << "rssi_shadow_sigma = " << fmt_double(scn.rssi.shadow_sigma) << "\n";
  for (const Eigen::Vector2d& w : scn.waypoints) {
    out << "waypoint = " << fmt_double(w.x()) << ", " << fmt_double(w.y()) << "\n";
  }
  for (const ApSpec& ap : scn.aps) {
    out << "ap = " << ap.id << ", " << fmt_double(ap.position.x()) << ", "
        << fmt_double(ap.position.y()) << ", " << fmt_double(ap.position.z())
        << "\n";
  }
  return out.str();
}

}  // namespace wifislam
