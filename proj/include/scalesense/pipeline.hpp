#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scalesense/evaluation.hpp"
#include "scalesense/inference.hpp"
#include "scalesense/io.hpp"
#include "scalesense/priors.hpp"
#include "scalesense/simulator.hpp"

namespace scalesense {

struct GridConfig {
  double d_min = 0.05;
  double d_max = 20.0;
  std::size_t n_bins = 4096;
  GridSpacing spacing = GridSpacing::Logarithmic;
};

struct RunConfig {
  std::uint64_t seed = 0;
  SceneConfig scene = preset_scene("exp1");
  NoiseConfig noise = preset_noise("exp1");
  int detect_every = 1;  // simulator: frames carrying detections
  GridConfig grid;
  int cadence = 10;      // estimator: frames whose detections are consumed
  EstimatorOptions estimator;
  std::filesystem::path priors;
  double burn_in_fraction = 0.35;

  void validate() const;
};

/// Parses the JSON run configuration. Relative prior paths resolve against
/// `base_dir`. Throws Error(InvalidConfig).
RunConfig parse_run_config(std::string_view document, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// SCALESENSE_SEED, when set, replaces the configured seed.
void apply_environment(RunConfig& config);

std::string_view run_config_schema();

struct SimulationOutput {
  SimScene scene;
  std::vector<Frame> frames;
  GroundTruth truth;
};

SimulationOutput simulate(const RunConfig& config);

struct EstimateOutput {
  std::vector<UpdateRecord> updates;
  PosteriorSnapshot initial;
  PosteriorSnapshot final_snapshot;
  Diagnostics diagnostics;
  std::vector<std::int64_t> consumed_frames;  // frames whose detections were processed
  std::size_t frames_read = 0;
};

using FrameSource = std::function<std::optional<Frame>()>;

EstimateOutput run_estimate(const RunConfig& config, const FrameSource& next_frame,
                            const PriorRegistry& priors);
EstimateOutput run_estimate(const RunConfig& config, std::span<const Frame> frames,
                            const PriorRegistry& priors);

struct EvaluateOutput {
  std::vector<EvaluatedUpdate> rows;
  std::size_t burn_in = 0;
  std::optional<ConvergenceReport> report;  // empty when no update passed burn-in
  std::optional<std::size_t> converged_at;  // first update after which Delta stays <= 3 %
};

EvaluateOutput run_evaluate(std::span<const UpdateRecord> updates, const GroundTruth& truth,
                            double burn_in_fraction);

std::string format_report(const EstimateOutput* estimate, const EvaluateOutput& evaluation,
                          const GroundTruth& truth);

}  // namespace scalesense
