#include "scalesense/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "scalesense/error.hpp"

namespace scalesense {

ErrorSample marker_errors(double d, std::span<const Point3, kMarkerCount> markers_map,
                          const Point3& camera_center_map,
                          std::span<const double, kMarkerCount> true_ranges) {
  ErrorSample sample;
  sample.d_used = d;
  for (std::size_t i = 0; i < kMarkerCount; ++i) {
    if (!(true_ranges[i] > 1e-9)) {
      throw Error(ErrorCode::ZeroRange, "true range of marker " + std::to_string(i + 1) + " is zero");
    }
    const double estimated = d * (markers_map[i] - camera_center_map).norm();
    sample.e[i] = std::abs(true_ranges[i] - estimated);
    sample.delta[i] = 100.0 * sample.e[i] / true_ranges[i];
  }
  sample.epsilon = std::accumulate(sample.e.begin(), sample.e.end(), 0.0) / kMarkerCount;
  sample.Delta = std::accumulate(sample.delta.begin(), sample.delta.end(), 0.0) / kMarkerCount;
  return sample;
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyWindow, "median of an empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

double sample_std(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

ConvergenceReport convergence_report(std::span<const ErrorSample> samples, std::size_t burn_in) {
  std::vector<double> abs_err, rel_err;
  for (const ErrorSample& s : samples) {
    if (s.update < burn_in) continue;
    abs_err.push_back(s.epsilon);
    rel_err.push_back(s.Delta);
  }
  if (abs_err.empty()) {
    throw Error(ErrorCode::EmptyWindow, "no samples at or after update " + std::to_string(burn_in));
  }
  ConvergenceReport report;
  report.burn_in = burn_in;
  report.samples = abs_err.size();
  report.std_abs = sample_std(abs_err);
  report.std_rel = sample_std(rel_err);
  report.median_abs = median(std::move(abs_err));
  report.median_rel = median(std::move(rel_err));
  return report;
}

std::size_t burn_in_from_fraction(std::span<const ErrorSample> samples, double fraction) {
  if (samples.empty()) return 0;
  const double last = static_cast<double>(samples.back().update);
  return static_cast<std::size_t>(std::floor(std::clamp(fraction, 0.0, 1.0) * last));
}

std::optional<std::size_t> updates_to_converge(std::span<const ErrorSample> samples,
                                               double threshold_pct) {
  std::optional<std::size_t> settled;
  for (const ErrorSample& s : samples) {
    if (s.Delta > threshold_pct) {
      settled.reset();
    } else if (!settled) {
      settled = s.update;
    }
  }
  return settled;
}

}  // namespace scalesense
