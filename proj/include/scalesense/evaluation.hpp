#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "scalesense/geometry.hpp"

namespace scalesense {

constexpr std::size_t kMarkerCount = 4;

struct ErrorSample {
  std::size_t update = 0;
  std::int64_t frame = 0;
  double d_used = 0.0;
  std::array<double, kMarkerCount> e{};      // meters
  double epsilon = 0.0;                      // mean of e
  std::array<double, kMarkerCount> delta{};  // percent
  double Delta = 0.0;                        // mean of delta
};

struct ConvergenceReport {
  std::size_t burn_in = 0;
  std::size_t samples = 0;
  double median_abs = 0.0;
  double std_abs = 0.0;
  double median_rel = 0.0;
  double std_rel = 0.0;
};

/// Errors of the ranges d * |y_i - R_k| (map units) against the true metric ranges.
ErrorSample marker_errors(double d, std::span<const Point3, kMarkerCount> markers_map,
                          const Point3& camera_center_map,
                          std::span<const double, kMarkerCount> true_ranges);

/// Median and sample standard deviation of epsilon and Delta over samples with
/// update index >= burn_in. Throws EmptyWindow.
ConvergenceReport convergence_report(std::span<const ErrorSample> samples, std::size_t burn_in);

/// Burn-in update index for a fraction of the last update index, rounded down.
std::size_t burn_in_from_fraction(std::span<const ErrorSample> samples, double fraction);

/// First update index from which Delta stays at or below `threshold_pct` for
/// every later sample; empty when the run never settles.
std::optional<std::size_t> updates_to_converge(std::span<const ErrorSample> samples,
                                               double threshold_pct);

double median(std::vector<double> values);
double sample_std(std::span<const double> values);

}  // namespace scalesense
