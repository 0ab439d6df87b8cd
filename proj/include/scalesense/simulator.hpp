#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "scalesense/frame.hpp"
#include "scalesense/geometry.hpp"

namespace scalesense {

/// A vertical object to place in the scene. Ground coordinates are along the
/// two horizontal axes orthogonal to the vertical direction.
struct ObjectSpec {
  int class_id = 0;
  double height_m = 0.3;
  double radius_m = 0.03;
  std::optional<Eigen::Vector2d> ground_position;  // random placement when empty
  int features = 3;
  int outliers = 0;  // per-frame off-object features that project inside the box
};

enum class TrajectoryKind { Arc, Orbit };

struct TrajectoryConfig {
  TrajectoryKind kind = TrajectoryKind::Arc;
  int frames = 900;
  double radius_m = 1.0;
  double height_m = 0.18;
  double target_height_m = 0.15;
  double arc_deg = 80.0;  // full sweep width for Arc
  double sweeps = 2.0;    // back-and-forth periods over the sequence for Arc
  double wobble_deg = 1.0;  // std of per-frame handheld rotation jitter
};

struct MarkerConfig {
  Eigen::Vector2d ground_center{0.0, -0.25};
  double size_m = 0.2;
};

struct SceneConfig {
  double d_star = 2.0;
  Vec3 vertical{0.0, 0.0, 1.0};
  std::vector<ObjectSpec> objects;
  double placement_radius_m = 0.3;
  double min_separation_m = 0.05;
  double min_visible_fraction = 0.8;
  double occlusion_overlap = 0.5;
  TrajectoryConfig trajectory;
  MarkerConfig markers;
  CameraIntrinsics camera{525.0, 525.0, 320.0, 240.0, 640, 480};

  void validate() const;
};

struct NoiseConfig {
  double feature_sigma = 0.0;  // map units
  double box_jitter_px = 0.0;
  double cov_scale = 1.0;
  // Optional decaying schedule: sigma_k = feature_sigma * (1 + (f - 1) * exp(-k / tau)).
  double initial_sigma_factor = 1.0;
  double decay_frames = 0.0;  // tau; 0 disables

  void validate() const;
  double sigma_at(std::int64_t frame) const;
};

struct SceneObject {
  int class_id = 0;
  Point3 base;  // metric world position of the bottom of the axis
  double height_m = 0.0;
  double radius_m = 0.0;
  int outliers = 0;
  std::vector<Point3> feature_points;  // metric, noiseless

  Point3 top(const Vec3& up) const { return base + height_m * up; }
};

struct SimScene {
  std::uint64_t seed = 0;
  double d_star = 1.0;
  VerticalDirection vertical;
  CameraIntrinsics intrinsics;
  double occlusion_overlap = 0.5;
  std::vector<SceneObject> objects;
  std::vector<CameraPose> trajectory;  // map units
  std::array<Point3, 4> markers_metric;
  std::array<Point3, 4> markers_map;
};

SimScene generate_scene(const SceneConfig& config, std::uint64_t seed);

/// Features are noisy map-unit samples of the object surfaces; detections are
/// tight boxes of visible objects, present only when `detect_this_frame`.
Frame render_frame(const SimScene& scene, std::int64_t k, const NoiseConfig& noise,
                   bool detect_this_frame);

/// Noiseless tight box of an object at pose k, or empty when behind the camera
/// or not fully inside the image.
std::optional<PixelRect> object_box(const SimScene& scene, std::size_t object_index, std::int64_t k);

/// Metric distance from the camera at frame k to marker i.
double true_range(const SimScene& scene, std::int64_t k, std::size_t marker_index);

/// Named configurations mirroring the three desk experiments plus a noiseless
/// variant: "exp1", "exp2", "exp3", "noiseless".
SceneConfig preset_scene(std::string_view name);
NoiseConfig preset_noise(std::string_view name);

}  // namespace scalesense
