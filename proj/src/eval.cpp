#include "wifislam/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <string>

#include "wifislam/errors.hpp"
#include "wifislam/geometry.hpp"
#include "wifislam/sim.hpp"

namespace wifislam {

namespace {

constexpr double kMatchToleranceSec = 1e-6;
constexpr double kDegradedFactor = 3.0;

double wrap_deg_180(double deg) {
  return std::abs(std::remainder(deg, 360.0));
}

// Nearest element of a sorted (t, payload) sequence; returns index.
template <typename T>
std::size_t nearest_index(const std::vector<T>& sorted, double t) {
  std::size_t lo = 0;
  std::size_t hi = sorted.size();
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (sorted[mid].t < t) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  if (lo == sorted.size()) return sorted.size() - 1;
  if (lo == 0) return 0;
  return (t - sorted[lo - 1].t <= sorted[lo].t - t) ? lo - 1 : lo;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string::size_type start = 0;
  while (true) {
    const std::string::size_type comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::vector<std::vector<std::string>> read_rows(
    const std::filesystem::path& path, const std::string& header) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open for reading");
  std::string line;
  if (!std::getline(in, line) || line != header) {
    throw DataError(path.string() + ": expected header '" + header + "'");
  }
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(split_fields(line));
  }
  return rows;
}

}  // namespace

double median_of(std::vector<double> values) {
  if (values.empty()) throw DataError("median of empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double percentile_of(std::vector<double> values, double q) {
  if (values.empty()) throw DataError("percentile of empty sample");
  if (!(q > 0.0 && q <= 1.0)) throw DataError("percentile q outside (0, 1]");
  std::sort(values.begin(), values.end());
  const std::size_t rank =
      static_cast<std::size_t>(std::ceil(q * double(values.size())));
  return values[std::max<std::size_t>(rank, 1) - 1];
}

std::vector<ErrorSample> align_and_score(const std::vector<TimedPose>& est,
                                         const std::vector<TimedPose>& truth) {
  if (est.empty() || truth.empty()) {
    throw DataError("align_and_score: empty trajectory");
  }
  double tol = kMatchToleranceSec;
  if (truth.size() > 1) {
    std::vector<double> gaps;
    gaps.reserve(truth.size() - 1);
    for (std::size_t i = 1; i < truth.size(); ++i) {
      gaps.push_back(truth[i].t - truth[i - 1].t);
    }
    tol = 0.5 * median_of(std::move(gaps));
  }

  std::vector<ErrorSample> samples;
  samples.reserve(est.size());
  for (const TimedPose& e : est) {
    const TimedPose& g = truth[nearest_index(truth, e.t)];
    if (std::abs(e.t - g.t) > tol) continue;
    ErrorSample s;
    s.t = e.t;
    s.xy_m = (e.pose.t.head<2>() - g.pose.t.head<2>()).norm();
    s.yaw_deg = wrap_deg_180((e.pose.yaw() - g.pose.yaw()) * 180.0 / M_PI);
    s.quat_deg = e.pose.q.angularDistance(g.pose.q) * 180.0 / M_PI;
    samples.push_back(s);
  }
  if (samples.empty()) {
    throw DataError("align_and_score: no overlapping timestamps");
  }
  return samples;
}

ErrorSummary summarize(const std::vector<ErrorSample>& samples) {
  if (samples.empty()) throw DataError("summarize: empty error series");
  std::vector<double> xy, yaw, quat;
  xy.reserve(samples.size());
  yaw.reserve(samples.size());
  quat.reserve(samples.size());
  for (const ErrorSample& s : samples) {
    xy.push_back(s.xy_m);
    yaw.push_back(s.yaw_deg);
    quat.push_back(s.quat_deg);
  }
  ErrorSummary out;
  out.count = samples.size();
  out.median_xy_m = median_of(xy);
  out.p90_xy_m = percentile_of(xy, 0.9);
  out.median_yaw_deg = median_of(yaw);
  out.p90_yaw_deg = percentile_of(yaw, 0.9);
  out.median_quat_deg = median_of(quat);
  return out;
}

std::vector<std::pair<double, double>> error_cdf(std::vector<double> errors) {
  if (errors.empty()) throw DataError("error_cdf: empty sample");
  std::sort(errors.begin(), errors.end());
  std::vector<std::pair<double, double>> cdf;
  cdf.reserve(errors.size());
  const double n = double(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i) {
    cdf.emplace_back(errors[i], double(i + 1) / n);
  }
  cdf.back().second = 1.0;
  return cdf;
}

std::vector<BearingBin> bearing_error_stats(
    const std::vector<BearingRecord>& measured,
    const std::vector<BearingRecord>& truth) {
  if (measured.empty()) throw DataError("bearing_error_stats: empty input");

  std::map<std::string, std::vector<BearingRecord>> truth_by_ap;
  for (const BearingRecord& r : truth) truth_by_ap[r.ap_id].push_back(r);
  for (auto& [ap, rows] : truth_by_ap) {
    std::sort(rows.begin(), rows.end(),
              [](const BearingRecord& a, const BearingRecord& b) {
                return a.t < b.t;
              });
  }

  std::map<int, std::vector<double>> bins;
  for (const BearingRecord& m : measured) {
    const auto it = truth_by_ap.find(m.ap_id);
    if (it == truth_by_ap.end()) {
      throw DataError("bearing_error_stats: no truth for ap '" + m.ap_id + "'");
    }
    const BearingRecord& g = it->second[nearest_index(it->second, m.t)];
    if (std::abs(g.t - m.t) > kMatchToleranceSec) {
      throw DataError("bearing_error_stats: no truth near t=" +
                      format_double(m.t) + " for ap '" + m.ap_id + "'");
    }
    const double true_deg = std::remainder(g.theta_rad * 180.0 / M_PI, 360.0);
    const double err_deg =
        wrap_deg_180((m.theta_rad - g.theta_rad) * 180.0 / M_PI);
    int center = int(std::lround(true_deg / 10.0)) * 10;
    if (center == 180) center = -180;
    bins[center].push_back(err_deg);
  }

  double zero_bin_median = 0.0;
  const auto zero_it = bins.find(0);
  if (zero_it != bins.end()) zero_bin_median = median_of(zero_it->second);

  std::vector<BearingBin> out;
  out.reserve(bins.size());
  for (const auto& [center, errors] : bins) {
    BearingBin b;
    b.center_deg = center;
    b.count = errors.size();
    b.median_err_deg = median_of(errors);
    b.degraded = zero_it != bins.end() &&
                 b.median_err_deg > kDegradedFactor * zero_bin_median;
    out.push_back(b);
  }
  return out;
}

namespace {

void write_series_csv(const std::filesystem::path& path,
                      const std::vector<ErrorSample>& samples) {
  std::string text = "t,xy_m,yaw_deg,quat_deg\n";
  for (const ErrorSample& s : samples) {
    text += format_double(s.t) + "," + format_double(s.xy_m) + "," +
            format_double(s.yaw_deg) + "," + format_double(s.quat_deg) + "\n";
  }
  write_text_file(path, text);
}

void write_bins_csv(const std::filesystem::path& path,
                    const std::vector<BearingBin>& bins) {
  std::string text = "center_deg,count,median_err_deg,degraded\n";
  for (const BearingBin& b : bins) {
    text += std::to_string(b.center_deg) + "," + std::to_string(b.count) +
            "," + format_double(b.median_err_deg) + "," +
            (b.degraded ? "1" : "0") + "\n";
  }
  write_text_file(path, text);
}

}  // namespace

void emit_report(const std::filesystem::path& run_dir,
                 const std::filesystem::path& out_dir) {
  const std::vector<TimedPose> truth = read_trajectory_csv(run_dir / "truth.csv");
  const std::vector<TimedPose> est =
      read_trajectory_csv(run_dir / "slam" / "trajectory.csv");

  std::filesystem::create_directories(out_dir);

  const std::vector<ErrorSample> series = align_and_score(est, truth);
  const ErrorSummary summary = summarize(series);
  write_series_csv(out_dir / "error_series.csv", series);

  std::vector<double> xy;
  xy.reserve(series.size());
  for (const ErrorSample& s : series) xy.push_back(s.xy_m);
  std::string cdf_text = "xy_m,fraction\n";
  for (const auto& [v, f] : error_cdf(std::move(xy))) {
    cdf_text += format_double(v) + "," + format_double(f) + "\n";
  }
  write_text_file(out_dir / "error_cdf.csv", cdf_text);

  std::string summary_text = "metric,value\n";
  summary_text += "count," + std::to_string(summary.count) + "\n";
  summary_text += "median_xy_m," + format_double(summary.median_xy_m) + "\n";
  summary_text += "p90_xy_m," + format_double(summary.p90_xy_m) + "\n";
  summary_text +=
      "median_yaw_deg," + format_double(summary.median_yaw_deg) + "\n";
  summary_text += "p90_yaw_deg," + format_double(summary.p90_yaw_deg) + "\n";
  summary_text +=
      "median_quat_deg," + format_double(summary.median_quat_deg) + "\n";

  // Dead-reckoning comparison: integrate the recorded odometry from the
  // first truth pose and score it against the same truth.
  const std::filesystem::path odom_path = run_dir / "odometry.csv";
  if (std::filesystem::exists(odom_path)) {
    const std::vector<OdomRecord> odom = read_odometry_csv(odom_path);
    std::vector<TimedPose> dead;
    dead.reserve(odom.size() + 1);
    dead.push_back(truth.front());
    Pose p = truth.front().pose;
    for (const OdomRecord& r : odom) {
      p = odom_compose(p, r.z);
      dead.push_back(TimedPose{r.t, p});
    }
    const std::vector<ErrorSample> dr_series = align_and_score(dead, truth);
    const ErrorSummary dr = summarize(dr_series);
    write_series_csv(out_dir / "dead_reckoning_series.csv", dr_series);
    summary_text +=
        "dead_reckoning_median_xy_m," + format_double(dr.median_xy_m) + "\n";
    summary_text +=
        "dead_reckoning_p90_xy_m," + format_double(dr.p90_xy_m) + "\n";
    summary_text += "dead_reckoning_median_yaw_deg," +
                    format_double(dr.median_yaw_deg) + "\n";
  }
  write_text_file(out_dir / "summary.csv", summary_text);

  // AP position errors against the scenario's true placements (XY only:
  // AP landmarks are estimated in the plane).
  const std::filesystem::path scn_path = run_dir / "scenario.cfg";
  const std::filesystem::path aps_path = run_dir / "slam" / "aps.csv";
  if (std::filesystem::exists(scn_path) && std::filesystem::exists(aps_path)) {
    const Scenario scn = parse_scenario(read_text_file(scn_path));
    std::map<std::string, Eigen::Vector2d> true_xy;
    for (const ApSpec& ap : scn.aps) {
      true_xy[ap.id] = ap.position.head<2>();
    }
    std::string ap_text = "ap_id,xy_err_m\n";
    for (const ApRecord& est_ap : read_aps_csv(aps_path)) {
      const auto it = true_xy.find(est_ap.ap_id);
      if (it == true_xy.end()) {
        throw DataError(aps_path.string() + ": unknown ap '" + est_ap.ap_id +
                        "'");
      }
      const double err = (est_ap.position.head<2>() - it->second).norm();
      ap_text += est_ap.ap_id + "," + format_double(err) + "\n";
    }
    write_text_file(out_dir / "ap_errors.csv", ap_text);
  }

  // Bearing bins for each estimator directory that exists.
  const std::filesystem::path bearing_truth_path =
      run_dir / "bearings_truth.csv";
  if (std::filesystem::exists(bearing_truth_path)) {
    const std::vector<BearingRecord> bearing_truth =
        read_bearings_csv(bearing_truth_path);
    const std::pair<std::string, std::string> kEstimators[] = {
        {"bearings_pcab", "bearing_bins.csv"},
        {"bearings_grid2d", "bearing_bins_grid2d.csv"}};
    for (const auto& [dir_name, out_name] : kEstimators) {
      const std::filesystem::path est_path =
          run_dir / dir_name / "bearings.csv";
      if (!std::filesystem::exists(est_path)) continue;
      const std::vector<BearingRecord> measured = read_bearings_csv(est_path);
      if (measured.empty()) continue;
      write_bins_csv(out_dir / out_name,
                     bearing_error_stats(measured, bearing_truth));
    }
  }

  // Optimizer cost against wall time, straight from the solver log.
  const std::filesystem::path log_path = run_dir / "slam" / "solver_log.csv";
  if (std::filesystem::exists(log_path)) {
    const std::vector<std::vector<std::string>> rows = read_rows(
        log_path,
        "solve,t,iterations,initial_cost,final_cost,num_poses,num_aps,"
        "num_bearing_factors,converged");
    std::string cost_text = "t,cost\n";
    for (const std::vector<std::string>& row : rows) {
      if (row.size() < 5) throw DataError(log_path.string() + ": short row");
      cost_text += row[1] + "," + row[4] + "\n";
    }
    write_text_file(out_dir / "cost_vs_time.csv", cost_text);
  }

  // Evaluation-count comparison across estimator runs.
  std::string counts_text = "estimator,estimates,evaluations,evals_per_estimate\n";
  bool have_counts = false;
  for (const char* dir_name : {"bearings_pcab", "bearings_grid2d"}) {
    const std::filesystem::path stats_path = run_dir / dir_name / "stats.csv";
    if (!std::filesystem::exists(stats_path)) continue;
    const std::vector<std::vector<std::string>> rows = read_rows(
        stats_path, "estimator,estimates,evaluations,evals_per_estimate");
    for (const std::vector<std::string>& row : rows) {
      if (row.size() != 4) throw DataError(stats_path.string() + ": bad row");
      counts_text += row[0] + "," + row[1] + "," + row[2] + "," + row[3] + "\n";
      have_counts = true;
    }
  }
  if (have_counts) {
    write_text_file(out_dir / "eval_counts.csv", counts_text);
  }
}

}  // namespace wifislam
