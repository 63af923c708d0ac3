#include "wifislam/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "wifislam/errors.hpp"
#include "wifislam/eval.hpp"
#include "wifislam/sim.hpp"

namespace wifislam {

namespace {

namespace fs = std::filesystem;

constexpr double kPriorVariance = 1e-12;
constexpr double kOdomSigmaFloor = 1e-3;

// Scenario noise sigmas to factor covariance diagonals. The rotation part of
// a between-measurement is a quaternion vector, which carries half the
// rotation angle, hence the /2. Floors keep noiseless scenarios solvable.
Vector6d odom_sigma_from(const OdomNoiseSpec& noise) {
  const double dt_std = std::max(noise.sigma_t, kOdomSigmaFloor);
  const double dr_std = std::max(noise.sigma_r, kOdomSigmaFloor) / 2.0;
  Vector6d v;
  v << dt_std * dt_std, dt_std * dt_std, dt_std * dt_std, dr_std * dr_std,
      dr_std * dr_std, dr_std * dr_std;
  return v;
}

class StageTimer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

fs::path partial_path(const fs::path& final_dir) {
  fs::path p = final_dir;
  p += ".partial";
  return p;
}

fs::path make_partial(const fs::path& final_dir) {
  const fs::path partial = partial_path(final_dir);
  fs::remove_all(partial);
  fs::create_directories(partial);
  return partial;
}

void promote(const fs::path& partial, const fs::path& final_dir) {
  fs::remove_all(final_dir);
  fs::rename(partial, final_dir);
}

void update_manifest(const fs::path& run_dir, const std::string& stage,
                     double seconds) {
  RunManifest m = read_manifest(run_dir);
  m.versions["wifislam"] = kVersion;
  m.checksums.clear();
  stamp_checksums(run_dir, m);
  m.timings_sec[stage] = seconds;
  write_manifest(run_dir, m);
}

}  // namespace

SlamMode parse_slam_mode(const std::string& name) {
  if (name == "batch") return SlamMode::kBatch;
  if (name == "incremental") return SlamMode::kIncremental;
  if (name == "fixed-lag") return SlamMode::kFixedLag;
  throw DataError("unknown slam mode '" + name + "'");
}

std::vector<StreamEvent> merge_streams(
    const std::vector<OdomRecord>& odom, const std::vector<RssiRecord>& rssi,
    const std::vector<BearingRecord>& bearings) {
  std::vector<StreamEvent> events;
  events.reserve(odom.size() + rssi.size() + bearings.size());
  for (const OdomRecord& r : odom) {
    StreamEvent e;
    e.t = r.t;
    e.kind = StreamEvent::kOdometry;
    e.odom_z = r.z;
    events.push_back(std::move(e));
  }
  for (const RssiRecord& r : rssi) {
    StreamEvent e;
    e.t = r.t;
    e.kind = StreamEvent::kRssi;
    e.ap_id = r.ap_id;
    e.rssi = r.rssi;
    events.push_back(std::move(e));
  }
  for (const BearingRecord& r : bearings) {
    StreamEvent e;
    e.t = r.t;
    e.kind = StreamEvent::kBearing;
    e.ap_id = r.ap_id;
    e.theta_rad = r.theta_rad;
    e.sigma_rad = r.sigma;
    events.push_back(std::move(e));
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const StreamEvent& a, const StreamEvent& b) {
                     if (a.t != b.t) return a.t < b.t;
                     if (a.kind != b.kind) return a.kind < b.kind;
                     return a.ap_id < b.ap_id;
                   });
  return events;
}

SlamPipeline::SlamPipeline(const Pose& start, double start_time,
                           PipelineOptions opts)
    : opts_(opts), rng_(opts.seed) {
  state_.poses.push_back(start);
  state_.pose_times.push_back(start_time);
  PriorFactor prior;
  prior.i = 0;
  prior.target = start;
  prior.sigma = Vector6d::Constant(kPriorVariance);
  state_.prior_factors.push_back(prior);
  last_event_time_ = start_time;
}

void SlamPipeline::on_event(const StreamEvent& e) {
  switch (e.kind) {
    case StreamEvent::kOdometry:
      on_odometry(e.t, e.odom_z);
      return;
    case StreamEvent::kRssi:
      on_rssi(e.t, e.ap_id, e.rssi);
      return;
    case StreamEvent::kBearing:
      on_bearing(e.t, e.ap_id, e.theta_rad, e.sigma_rad);
      return;
    default:
      throw DataError("unknown stream event kind");
  }
}

void SlamPipeline::on_odometry(double t, const Tangent6& z) {
  last_event_time_ = t;
  add_odometry(state_, z, opts_.odom_sigma, t);
}

void SlamPipeline::on_rssi(double t, const std::string& ap_id, double rssi) {
  last_event_time_ = t;
  if (state_.aps.count(ap_id)) return;
  tracker_.add(ap_id, nearest_pose_index(t), rssi);
  if (!maybe_initialize_ap(tracker_, ap_id, state_, rng_)) return;

  const auto pending = pending_.find(ap_id);
  if (pending != pending_.end()) {
    for (const BearingRecord& r : pending->second) {
      attach_bearing_factor(nearest_pose_index(r.t), ap_id, r.theta_rad,
                            r.sigma);
    }
    pending_.erase(pending);
  }
  if (opts_.mode != SlamMode::kBatch) solve(t);
}

void SlamPipeline::on_bearing(double t, const std::string& ap_id,
                              double theta_rad, double sigma_rad) {
  last_event_time_ = t;
  if (!state_.aps.count(ap_id)) {
    BearingRecord r;
    r.t = t;
    r.ap_id = ap_id;
    r.theta_rad = theta_rad;
    r.sigma = sigma_rad;
    pending_[ap_id].push_back(std::move(r));
    return;
  }
  attach_bearing_factor(nearest_pose_index(t), ap_id, theta_rad, sigma_rad);
  if (opts_.mode != SlamMode::kBatch &&
      bearings_since_solve_ >= opts_.solve_every_bearings) {
    solve(t);
  }
}

void SlamPipeline::finish() { solve(last_event_time_); }

std::vector<TimedPose> SlamPipeline::trajectory() const {
  std::vector<TimedPose> rows;
  rows.reserve(state_.poses.size());
  for (std::size_t i = 0; i < state_.poses.size(); ++i) {
    rows.push_back(TimedPose{state_.pose_times[i], state_.poses[i]});
  }
  return rows;
}

std::vector<ApRecord> SlamPipeline::ap_estimates() const {
  std::vector<ApRecord> rows;
  rows.reserve(state_.aps.size());
  for (const auto& [id, pos] : state_.aps) {
    rows.push_back(ApRecord{id, pos});
  }
  return rows;
}

int SlamPipeline::nearest_pose_index(double t) const {
  const std::vector<double>& times = state_.pose_times;
  const auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it == times.end()) return int(times.size()) - 1;
  if (it == times.begin()) return 0;
  const std::size_t hi = std::size_t(it - times.begin());
  return (t - times[hi - 1] <= times[hi] - t) ? int(hi - 1) : int(hi);
}

void SlamPipeline::attach_bearing_factor(int pose_index,
                                         const std::string& ap_id,
                                         double theta_rad, double sigma_rad) {
  const double sigma = sigma_rad > 0.0 ? sigma_rad : opts_.default_sigma_rad;
  BearingFactor f;
  f.pose = pose_index;
  f.ap_id = ap_id;
  f.z = Eigen::Vector2d(std::cos(theta_rad), std::sin(theta_rad));
  f.sigma = Eigen::Vector2d::Constant(sigma * sigma);
  f.huber_c = opts_.huber_c;
  state_.bearing_factors.push_back(std::move(f));
  ++bearings_since_solve_;
}

void SlamPipeline::solve(double t) {
  SolveOptions so;
  so.fixed_lag = opts_.mode == SlamMode::kFixedLag;
  so.lag_window = opts_.lag_window;
  SolveRecord rec;
  rec.solve_index = next_solve_index_++;
  rec.t = t;
  rec.stats = optimize(state_, so);
  rec.num_poses = state_.poses.size();
  rec.num_aps = state_.aps.size();
  rec.num_bearing_factors = state_.bearing_factors.size();
  log_.push_back(rec);
  bearings_since_solve_ = 0;
  if (on_solve) on_solve(*this, rec);
}

void cmd_simulate(const std::filesystem::path& config_path,
                  std::optional<std::uint64_t> seed_override,
                  const std::filesystem::path& out_dir) {
  const StageTimer timer;
  Scenario scn = parse_scenario(read_text_file(config_path));
  if (seed_override) scn.seed = *seed_override;
  validate_scenario(scn);

  const TruthTrajectory traj = build_trajectory(scn);
  if (!(traj.duration() > 0.0)) {
    throw DataError(scn.name + ": scenario has zero duration");
  }
  const std::vector<TruthSample> truth = generate_truth(scn);
  const std::vector<Tangent6> odom =
      corrupt_odometry(truth, scn.odom_noise, scn.seed);
  const std::vector<SimPacket> stream = generate_csi_stream(scn, traj);

  const fs::path partial = make_partial(out_dir);
  write_text_file(partial / "scenario.cfg", write_scenario(scn));

  std::vector<TimedPose> truth_rows;
  truth_rows.reserve(truth.size());
  for (const TruthSample& s : truth) {
    truth_rows.push_back(TimedPose{s.t, s.pose});
  }
  write_trajectory_csv(partial / "truth.csv", truth_rows);

  std::vector<OdomRecord> odom_rows;
  odom_rows.reserve(odom.size());
  for (std::size_t i = 0; i < odom.size(); ++i) {
    odom_rows.push_back(OdomRecord{truth[i + 1].t, odom[i]});
  }
  write_odometry_csv(partial / "odometry.csv", odom_rows);

  std::vector<CsiPacket> packets;
  std::vector<RssiRecord> rssi_rows;
  std::vector<BearingRecord> truth_bearings;
  packets.reserve(stream.size());
  rssi_rows.reserve(stream.size());
  truth_bearings.reserve(stream.size());
  for (const SimPacket& sp : stream) {
    packets.push_back(sp.packet);
    rssi_rows.push_back(
        RssiRecord{sp.packet.timestamp, sp.packet.ap_id, sp.packet.rssi});
    truth_bearings.push_back(BearingRecord{sp.packet.timestamp,
                                           sp.packet.ap_id, sp.true_azimuth,
                                           0.0});
  }
  write_csi_jsonl(partial / "csi.jsonl", packets);
  write_rssi_csv(partial / "rssi.csv", rssi_rows);
  write_bearings_csv(partial / "bearings_truth.csv", truth_bearings);

  RunManifest manifest;
  manifest.scenario = "scenario.cfg";
  manifest.seed = scn.seed;
  manifest.versions["wifislam"] = kVersion;
  stamp_checksums(partial, manifest);
  manifest.timings_sec["simulate"] = timer.seconds();
  write_manifest(partial, manifest);

  promote(partial, out_dir);
}

void cmd_bearings(const std::filesystem::path& run_dir,
                  const std::string& estimator, double grid_step_deg,
                  double rssi_threshold_dbm) {
  const StageTimer timer;
  if (estimator != "pcab" && estimator != "grid2d") {
    throw DataError("unknown estimator '" + estimator + "'");
  }
  if (!(grid_step_deg > 0.0)) {
    throw DataError("grid step must be positive");
  }
  const Scenario scn = parse_scenario(read_text_file(run_dir / "scenario.cfg"));
  const ArrayGeometry geom = scn.make_array();
  const std::vector<CsiPacket> packets = read_csi_jsonl(run_dir / "csi.jsonl");
  const double grid_step = grid_step_deg * M_PI / 180.0;

  std::vector<BearingRecord> rows;
  SearchStats stats;
  std::map<std::string, BearingWindow> windows;
  const std::vector<double> theta_grid =
      make_theta_grid(default_search_range(geom), grid_step);
  const std::vector<double> delay_grid = make_delay_grid();

  for (const CsiPacket& p : packets) {
    if (!rssi_gate(p.rssi, rssi_threshold_dbm)) continue;
    BearingRecord r;
    r.t = p.timestamp;
    r.ap_id = p.ap_id;
    r.sigma = kDefaultBearingSigmaRad;
    if (estimator == "pcab") {
      auto it = windows.find(p.ap_id);
      if (it == windows.end()) {
        it = windows.emplace(p.ap_id, BearingWindow(p.ap_id)).first;
      }
      it->second.push(p);
      const BearingMeasurement m =
          pcab_bearing(it->second, geom, grid_step, std::nullopt,
                       kDefaultBearingSigmaRad, &stats);
      r.theta_rad = m.theta;
      r.sigma = std::sqrt(m.sigma[0]);
    } else {
      r.theta_rad = grid2d_baseline(p, geom, theta_grid, delay_grid, &stats);
    }
    // The outermost grid angles absorb every arrival from outside the
    // resolvable span (the peak just clamps at the edge), so an estimate
    // landing exactly there is untrustworthy and never written out.
    if (r.theta_rad == theta_grid.front() || r.theta_rad == theta_grid.back()) {
      continue;
    }
    rows.push_back(std::move(r));
  }

  const fs::path final_dir = run_dir / ("bearings_" + estimator);
  const fs::path partial = make_partial(final_dir);
  write_bearings_csv(partial / "bearings.csv", rows);

  const double per_estimate =
      rows.empty() ? 0.0 : double(stats.evaluations) / double(rows.size());
  write_text_file(partial / "stats.csv",
                  "estimator,estimates,evaluations,evals_per_estimate\n" +
                      estimator + "," + std::to_string(rows.size()) + "," +
                      std::to_string(stats.evaluations) + "," +
                      format_double(per_estimate) + "\n");

  promote(partial, final_dir);
  update_manifest(run_dir, "bearings_" + estimator, timer.seconds());
}

void cmd_slam(const std::filesystem::path& run_dir, const std::string& mode,
              const std::string& bearings_source, double huber_c,
              std::optional<std::uint64_t> seed_override) {
  const StageTimer timer;
  const Scenario scn = parse_scenario(read_text_file(run_dir / "scenario.cfg"));

  fs::path bearings_path;
  if (bearings_source == "truth") {
    bearings_path = run_dir / "bearings_truth.csv";
  } else if (bearings_source == "pcab" || bearings_source == "grid2d") {
    bearings_path = run_dir / ("bearings_" + bearings_source) / "bearings.csv";
  } else {
    throw DataError("unknown bearings source '" + bearings_source + "'");
  }

  const std::vector<TimedPose> truth =
      read_trajectory_csv(run_dir / "truth.csv");
  if (truth.empty()) throw DataError("truth.csv is empty");
  const std::vector<OdomRecord> odom =
      read_odometry_csv(run_dir / "odometry.csv");
  const std::vector<RssiRecord> rssi = read_rssi_csv(run_dir / "rssi.csv");
  const std::vector<BearingRecord> bearings = read_bearings_csv(bearings_path);

  PipelineOptions opts;
  opts.mode = parse_slam_mode(mode);
  opts.huber_c = huber_c;
  opts.odom_sigma = odom_sigma_from(scn.odom_noise);
  opts.seed = seed_override.value_or(scn.seed);

  const fs::path final_dir = run_dir / "slam";
  const fs::path partial = make_partial(final_dir);
  const fs::path log_path = partial / "solver_log.csv";

  SlamPipeline pipeline(truth.front().pose, truth.front().t, opts);
  pipeline.on_solve = [&](const SlamPipeline& pl, const SolveRecord& rec) {
    write_trajectory_csv(partial / "trajectory.csv", pl.trajectory());
    write_aps_csv(partial / "aps.csv", pl.ap_estimates());
    const bool fresh = !fs::exists(log_path);
    std::ofstream log(log_path, std::ios::app);
    if (!log) throw DataError(log_path.string() + ": cannot open for writing");
    if (fresh) {
      log << "solve,t,iterations,initial_cost,final_cost,num_poses,num_aps,"
             "num_bearing_factors,converged\n";
    }
    log << rec.solve_index << ',' << format_double(rec.t) << ','
        << rec.stats.iterations << ',' << format_double(rec.stats.initial_cost)
        << ',' << format_double(rec.stats.final_cost) << ',' << rec.num_poses
        << ',' << rec.num_aps << ',' << rec.num_bearing_factors << ','
        << (rec.stats.converged ? 1 : 0) << '\n';
  };

  for (const StreamEvent& e : merge_streams(odom, rssi, bearings)) {
    pipeline.on_event(e);
  }
  pipeline.finish();

  promote(partial, final_dir);
  update_manifest(run_dir, "slam", timer.seconds());
}

void cmd_eval(const std::filesystem::path& run_dir) {
  const StageTimer timer;
  const fs::path final_dir = run_dir / "eval";
  const fs::path partial = make_partial(final_dir);
  emit_report(run_dir, partial);
  promote(partial, final_dir);
  update_manifest(run_dir, "eval", timer.seconds());
}

}  // namespace wifislam
