#include "scalesense/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace scalesense {

namespace {

double log_sum_exp(std::span<const double> a, std::span<const double> b) {
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < a.size(); ++i) peak = std::max(peak, a[i] + b[i]);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::exp(a[i] + b[i] - peak);
  return peak + std::log(acc);
}

std::size_t argmax_lowest(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace

ScaleGrid ScaleGrid::uniform(double d_min, double d_max, std::size_t n_bins, GridSpacing spacing) {
  if (!std::isfinite(d_min) || !std::isfinite(d_max) || !(d_min > 0.0) || !(d_min < d_max)) {
    throw Error(ErrorCode::InvalidBounds, "scale grid needs 0 < d_min < d_max, got [" +
                                              std::to_string(d_min) + ", " + std::to_string(d_max) + "]");
  }
  if (n_bins < 2) throw Error(ErrorCode::InvalidBounds, "scale grid needs at least 2 bins");

  ScaleGrid grid;
  grid.spacing_ = spacing;
  grid.edges_.resize(n_bins + 1);
  const double n = static_cast<double>(n_bins);
  if (spacing == GridSpacing::Linear) {
    for (std::size_t i = 0; i <= n_bins; ++i) grid.edges_[i] = d_min + (d_max - d_min) * (i / n);
  } else {
    const double lo = std::log(d_min), hi = std::log(d_max);
    for (std::size_t i = 0; i <= n_bins; ++i) grid.edges_[i] = std::exp(lo + (hi - lo) * (i / n));
  }
  grid.edges_.front() = d_min;
  grid.edges_.back() = d_max;

  grid.centers_.resize(n_bins);
  grid.widths_.resize(n_bins);
  grid.log_weights_.resize(n_bins);
  for (std::size_t i = 0; i < n_bins; ++i) {
    const double a = grid.edges_[i], b = grid.edges_[i + 1];
    grid.centers_[i] = spacing == GridSpacing::Linear ? 0.5 * (a + b) : std::sqrt(a * b);
    grid.widths_[i] = b - a;
    grid.log_weights_[i] = -std::log(n * grid.widths_[i]);
  }
  grid.normalize();
  return grid;
}

std::vector<double> ScaleGrid::masses() const {
  std::vector<double> m(size());
  for (std::size_t i = 0; i < size(); ++i) m[i] = std::exp(log_weights_[i]) * widths_[i];
  return m;
}

double ScaleGrid::total_mass() const {
  double total = 0.0;
  for (double m : masses()) total += m;
  return total;
}

void ScaleGrid::normalize() {
  std::vector<double> log_widths(widths_.size());
  std::transform(widths_.begin(), widths_.end(), log_widths.begin(),
                 [](double w) { return std::log(w); });
  const double log_total = log_sum_exp(log_weights_, log_widths);
  for (double& w : log_weights_) w -= log_total;
}

void ScaleGrid::apply_likelihood(std::span<const double> likelihood) {
  if (likelihood.size() != size()) {
    throw Error(ErrorCode::InvalidArgument, "likelihood has " + std::to_string(likelihood.size()) +
                                                " entries for a grid of " + std::to_string(size()));
  }
  bool informative = false;
  for (double l : likelihood) {
    if (std::isnan(l) || l < 0.0) {
      throw Error(ErrorCode::InvalidArgument, "likelihood entries must be non-negative");
    }
    informative = informative || l > kLikelihoodFloor;
  }
  if (!informative) {
    throw Error(ErrorCode::DegenerateUpdate, "likelihood is below the floor on the whole grid");
  }
  std::vector<double> updated(log_weights_);
  for (std::size_t i = 0; i < updated.size(); ++i) {
    updated[i] += std::log(std::max(likelihood[i], kLikelihoodFloor));
  }
  log_weights_.swap(updated);
  normalize();
}

void ScaleGrid::set_log_weights(std::span<const double> log_weights) {
  if (log_weights.size() != size()) {
    throw Error(ErrorCode::InvalidArgument, "log weight count does not match the grid");
  }
  log_weights_.assign(log_weights.begin(), log_weights.end());
  normalize();
}

ScaleGrid uniform_prior(double d_min, double d_max, std::size_t n_bins, GridSpacing spacing) {
  return ScaleGrid::uniform(d_min, d_max, n_bins, spacing);
}

std::vector<double> observation_likelihood(const HeightObservation& obs,
                                           const HeightHistogram& prior, const ScaleGrid& grid) {
  if (!(obs.D > 0.0) || !(obs.sigma_D > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "observation needs D > 0 and sigma_D > 0");
  }
  // Variance (sigma_D * D)^2 on d*D - H, i.e. spread sigma_D along d.
  const double sigma = obs.sigma_D * obs.D;
  const double inv_two_var = 1.0 / (2.0 * sigma * sigma);
  const double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * sigma);

  const auto centers = grid.centers();
  std::vector<double> L(centers.size(), 0.0);
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const double height = centers[i] * obs.D;
    double acc = 0.0;
    for (const HeightBin& bin : prior.bins) {
      const double r = height - bin.height_m;
      acc += bin.prob * norm * std::exp(-r * r * inv_two_var);
    }
    L[i] = acc;
  }
  return L;
}

ScaleGrid update_posterior(const ScaleGrid& grid, std::span<const double> likelihood) {
  ScaleGrid next = grid;
  next.apply_likelihood(likelihood);
  return next;
}

double map_estimate(const ScaleGrid& grid) {
  return grid.centers()[argmax_lowest(grid.log_weights())];
}

double local_mode(std::span<const double> likelihood, const ScaleGrid& grid) {
  if (likelihood.size() != grid.size()) {
    throw Error(ErrorCode::InvalidArgument, "likelihood does not match the grid");
  }
  return grid.centers()[argmax_lowest(likelihood)];
}

PosteriorStats posterior_stats(const ScaleGrid& grid) {
  const std::vector<double> m = grid.masses();
  const auto c = grid.centers();
  PosteriorStats stats;
  for (std::size_t i = 0; i < m.size(); ++i) stats.mean += m[i] * c[i];
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double dev = c[i] - stats.mean;
    stats.variance += m[i] * dev * dev;
    if (m[i] > 0.0) stats.entropy -= m[i] * std::log(m[i]);
  }
  stats.entropy = std::max(stats.entropy, 0.0);
  return stats;
}

PosteriorSnapshot snapshot(const ScaleGrid& grid, std::int64_t frame, std::size_t update_count) {
  const PosteriorStats stats = posterior_stats(grid);
  return PosteriorSnapshot{frame, map_estimate(grid), stats.mean, stats.variance, stats.entropy,
                           update_count};
}

std::size_t Diagnostics::dropped_total() const {
  std::size_t total = 0;
  for (const auto& [code, count] : dropped) total += count;
  return total;
}

ScaleEstimator::ScaleEstimator(ScaleGrid initial, const PriorRegistry& priors,
                               EstimatorOptions options)
    : grid_(std::move(initial)), priors_(&priors), options_(options) {}

FrameResult ScaleEstimator::process_frame(const Frame& frame) {
  FrameResult result;
  for (const DetectionBox& det : frame.detections) {
    const HeightHistogram* prior = priors_->find(det.class_id);
    if (prior == nullptr) {
      ++diagnostics_.unknown_class;
      continue;
    }
    for (const FeatureEstimate& feat : frame.features) {
      const Vec3 in_camera = frame.pose.to_camera(feat.mean);
      if (!(in_camera.z() > 1e-9)) continue;
      const PixelPoint px = project(feat.mean, frame.pose, frame.intrinsics);
      if (!det.rect.contains_strictly(px, options_.geometry.inward_margin_px)) continue;
      ++diagnostics_.candidate_pairs;

      HeightObservation obs;
      try {
        obs = make_observation(feat, det, frame.pose, frame.intrinsics, frame.vertical, frame.index,
                               options_.geometry);
      } catch (const Error& e) {
        ++diagnostics_.dropped[e.code()];
        continue;
      }
      if (options_.sigma_gate && obs.sigma_D > *options_.sigma_gate) {
        ++diagnostics_.gated;
        continue;
      }

      const std::vector<double> L = observation_likelihood(obs, *prior, grid_);
      try {
        grid_.apply_likelihood(L);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateUpdate) throw;
        ++diagnostics_.degenerate_updates;
        continue;
      }
      ++update_count_;
      ++diagnostics_.updates;

      UpdateRecord record;
      record.update = update_count_;
      record.local = LocalEstimate{frame.index, feat.id,  det.class_id,
                                   obs.D,       obs.sigma_D, local_mode(L, grid_)};
      record.posterior = snapshot(grid_, frame.index, update_count_);
      result.updates.push_back(record);
    }
  }
  result.snapshot = current(frame.index);
  return result;
}

ProcessedFrame process_frame(const ScaleGrid& grid, const Frame& frame, const PriorRegistry& priors,
                             const EstimatorOptions& options) {
  ScaleEstimator estimator(grid, priors, options);
  FrameResult result = estimator.process_frame(frame);
  ProcessedFrame out{estimator.grid(), result.snapshot, {}, estimator.diagnostics()};
  out.locals.reserve(result.updates.size());
  for (const UpdateRecord& r : result.updates) out.locals.push_back(r.local);
  return out;
}

}  // namespace scalesense
