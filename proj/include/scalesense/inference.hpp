#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "scalesense/error.hpp"
#include "scalesense/frame.hpp"
#include "scalesense/geometry.hpp"
#include "scalesense/priors.hpp"

namespace scalesense {

enum class GridSpacing { Linear, Logarithmic };

/// Discretized density over the global scale d. Bins partition [d_min, d_max];
/// `log_weights` are log densities, so sum(exp(w_i) * width_i) == 1.
class ScaleGrid {
 public:
  /// Equal probability mass per bin; uniform in d for linear spacing, in log d otherwise.
  static ScaleGrid uniform(double d_min, double d_max, std::size_t n_bins, GridSpacing spacing);

  double d_min() const noexcept { return edges_.front(); }
  double d_max() const noexcept { return edges_.back(); }
  std::size_t size() const noexcept { return centers_.size(); }
  GridSpacing spacing() const noexcept { return spacing_; }

  std::span<const double> edges() const noexcept { return edges_; }
  std::span<const double> centers() const noexcept { return centers_; }
  std::span<const double> widths() const noexcept { return widths_; }
  std::span<const double> log_weights() const noexcept { return log_weights_; }

  /// Probability mass of each bin.
  std::vector<double> masses() const;
  /// Sum of exp(log_weight) * width; 1 up to rounding.
  double total_mass() const;

  /// Multiplies the density by `likelihood` (floored at kLikelihoodFloor) and
  /// renormalizes in log space. Throws DegenerateUpdate, leaving the grid
  /// unchanged, when no entry exceeds the floor.
  void apply_likelihood(std::span<const double> likelihood);

  /// Replaces the log densities; renormalizes. For tests and restoring state.
  void set_log_weights(std::span<const double> log_weights);

  static constexpr double kLikelihoodFloor = 1e-300;

 private:
  ScaleGrid() = default;
  void normalize();

  GridSpacing spacing_ = GridSpacing::Logarithmic;
  std::vector<double> edges_;
  std::vector<double> centers_;
  std::vector<double> widths_;
  std::vector<double> log_weights_;
};

struct PosteriorStats {
  double mean = 0.0;
  double variance = 0.0;
  double entropy = 0.0;  // nats, over bin masses
};

struct PosteriorSnapshot {
  std::int64_t frame = 0;
  double map_d = 0.0;
  double mean_d = 0.0;
  double variance_d = 0.0;
  double entropy = 0.0;
  std::size_t update_count = 0;
};

struct LocalEstimate {
  std::int64_t frame = 0;
  std::int64_t feature_id = 0;
  int class_id = 0;
  double D = 0.0;
  double sigma_D = 0.0;
  double d_local = 0.0;
};

ScaleGrid uniform_prior(double d_min, double d_max, std::size_t n_bins,
                        GridSpacing spacing = GridSpacing::Logarithmic);

/// L(d_i) = sum_m N(d_i * D - H_m; 0, (sigma_D * D)^2) * p_m. Not normalized.
std::vector<double> observation_likelihood(const HeightObservation& obs,
                                           const HeightHistogram& prior, const ScaleGrid& grid);

ScaleGrid update_posterior(const ScaleGrid& grid, std::span<const double> likelihood);

/// Center of the highest-density bin; lowest index wins ties.
double map_estimate(const ScaleGrid& grid);

/// Center of the bin where `likelihood` peaks; lowest index wins ties.
double local_mode(std::span<const double> likelihood, const ScaleGrid& grid);

PosteriorStats posterior_stats(const ScaleGrid& grid);

PosteriorSnapshot snapshot(const ScaleGrid& grid, std::int64_t frame, std::size_t update_count);

// ---------------------------------------------------------------------------
// Frame processing

struct EstimatorOptions {
  GeometryOptions geometry;
  /// Observations with sigma_D above this are skipped. Off when empty.
  std::optional<double> sigma_gate;
};

/// Counters of observations that were not applied, keyed by cause.
struct Diagnostics {
  std::size_t candidate_pairs = 0;  // feature projects strictly inside a detection with a prior
  std::size_t updates = 0;
  std::size_t unknown_class = 0;    // detections without a registered prior
  std::size_t gated = 0;
  std::size_t degenerate_updates = 0;
  std::map<ErrorCode, std::size_t> dropped;  // geometry failures

  std::size_t dropped_total() const;
};

/// One applied posterior update.
struct UpdateRecord {
  std::size_t update = 0;  // 1-based running count
  LocalEstimate local;
  PosteriorSnapshot posterior;
};

struct FrameResult {
  PosteriorSnapshot snapshot;
  std::vector<UpdateRecord> updates;
};

/// Sequential owner of the scale posterior: applies one update per
/// (feature, detection) pair in frame order.
class ScaleEstimator {
 public:
  ScaleEstimator(ScaleGrid initial, const PriorRegistry& priors, EstimatorOptions options = {});

  FrameResult process_frame(const Frame& frame);

  const ScaleGrid& grid() const noexcept { return grid_; }
  const Diagnostics& diagnostics() const noexcept { return diagnostics_; }
  std::size_t update_count() const noexcept { return update_count_; }
  PosteriorSnapshot current(std::int64_t frame) const { return snapshot(grid_, frame, update_count_); }

 private:
  ScaleGrid grid_;
  const PriorRegistry* priors_;
  EstimatorOptions options_;
  Diagnostics diagnostics_;
  std::size_t update_count_ = 0;
};

struct ProcessedFrame {
  ScaleGrid grid;
  PosteriorSnapshot snapshot;
  std::vector<LocalEstimate> locals;
  Diagnostics diagnostics;
};

/// Stateless form of ScaleEstimator::process_frame.
ProcessedFrame process_frame(const ScaleGrid& grid, const Frame& frame, const PriorRegistry& priors,
                             const EstimatorOptions& options = {});

}  // namespace scalesense
