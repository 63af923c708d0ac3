#pragma once

#include <cstddef>
#include <filesystem>
#include <utility>
#include <vector>

#include "wifislam/trace_io.hpp"

// Error metrics over run artifacts: per-timestamp trajectory errors,
// distribution summaries, bearing-error binning, and the report writer that
// turns a run directory into plot-ready CSVs.

namespace wifislam {

struct ErrorSample {
  double t = 0.0;
  double xy_m = 0.0;     // planar Euclidean translation error
  double yaw_deg = 0.0;  // |yaw difference| wrapped to [0, 180]
  double quat_deg = 0.0; // full quaternion geodesic, auxiliary
};

struct ErrorSummary {
  std::size_t count = 0;
  double median_xy_m = 0.0;
  double p90_xy_m = 0.0;
  double median_yaw_deg = 0.0;
  double p90_yaw_deg = 0.0;
  double median_quat_deg = 0.0;
};

// Midpoint-averaged median and nearest-rank percentile (q in (0, 1]).
double median_of(std::vector<double> values);
double percentile_of(std::vector<double> values, double q);

// Pairs each estimate with the nearest truth timestamp within half the
// truth sampling interval; unmatched estimates are dropped. No alignment
// transform is applied: the anchored first pose already shares the frame.
// Throws DataError when nothing overlaps.
std::vector<ErrorSample> align_and_score(const std::vector<TimedPose>& est,
                                         const std::vector<TimedPose>& truth);

ErrorSummary summarize(const std::vector<ErrorSample>& samples);

// Sorted (value, cumulative fraction) pairs; last fraction is exactly 1.
std::vector<std::pair<double, double>> error_cdf(std::vector<double> errors);

// Wrapped |estimate - truth| binned by true angle into 10-degree bins
// centered on multiples of 10. A bin is flagged degraded when its median
// exceeds three times the 0-degree bin's median.
struct BearingBin {
  int center_deg = 0;
  std::size_t count = 0;
  double median_err_deg = 0.0;
  bool degraded = false;
};

std::vector<BearingBin> bearing_error_stats(
    const std::vector<BearingRecord>& measured,
    const std::vector<BearingRecord>& truth);

// Reads a run directory (truth.csv, slam/trajectory.csv, and whatever else
// is present) and writes the eval CSV bundle into out_dir: error series,
// CDF, summary, dead-reckoning comparison, AP errors, bearing bins,
// cost-vs-time, and the estimator evaluation-count comparison.
void emit_report(const std::filesystem::path& run_dir,
                 const std::filesystem::path& out_dir);

}  // namespace wifislam
