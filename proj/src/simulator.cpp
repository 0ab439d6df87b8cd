#include "scalesense/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "scalesense/error.hpp"

namespace scalesense {

namespace {

constexpr int kPlacementRetries = 200;
constexpr double kDegToRad = std::numbers::pi / 180.0;

struct GroundFrame {
  Vec3 e1, e2, up;

  explicit GroundFrame(const Vec3& v) : up(v.normalized()) {
    Vec3 axis = Vec3::UnitX();
    if (std::abs(up.x()) > std::abs(up.y()) && std::abs(up.x()) > std::abs(up.z())) axis = Vec3::UnitY();
    e1 = (axis - axis.dot(up) * up).normalized();
    e2 = up.cross(e1);
  }

  Point3 at(double x, double y, double h = 0.0) const { return x * e1 + y * e2 + h * up; }
};

std::seed_seq make_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t salt) {
  return std::seed_seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                       static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                       static_cast<std::uint32_t>(salt)};
}

Mat3 look_at(const Point3& eye, const Point3& target, const Vec3& up) {
  const Vec3 z = (target - eye).normalized();
  const Vec3 x = z.cross(up).normalized();
  const Vec3 y = z.cross(x);
  Mat3 R;
  R.row(0) = x.transpose();
  R.row(1) = y.transpose();
  R.row(2) = z.transpose();
  return R;
}

std::vector<CameraPose> build_trajectory(const SceneConfig& config, const GroundFrame& ground,
                                         std::mt19937_64& rng) {
  const TrajectoryConfig& t = config.trajectory;
  std::normal_distribution<double> wobble(0.0, t.wobble_deg * kDegToRad);
  const Point3 target = ground.at(0.0, 0.0, t.target_height_m);
  std::vector<CameraPose> poses;
  poses.reserve(static_cast<std::size_t>(t.frames));
  for (int k = 0; k < t.frames; ++k) {
    const double s = static_cast<double>(k) / t.frames;
    const double phi = t.kind == TrajectoryKind::Orbit
                           ? 2.0 * std::numbers::pi * s
                           : 0.5 * t.arc_deg * kDegToRad * std::sin(2.0 * std::numbers::pi * t.sweeps * s);
    const Point3 eye =
        ground.at(t.radius_m * std::sin(phi), -t.radius_m * std::cos(phi), t.height_m);
    Mat3 R = look_at(eye, target, ground.up);
    if (t.wobble_deg > 0.0) {
      const double roll = wobble(rng), pitch = wobble(rng), yaw = wobble(rng);
      const Mat3 jitter = (Eigen::AngleAxisd(roll, Vec3::UnitZ()) *
                           Eigen::AngleAxisd(pitch, Vec3::UnitX()) *
                           Eigen::AngleAxisd(yaw, Vec3::UnitY()))
                              .toRotationMatrix();
      R = jitter * R;
    }
    poses.push_back(CameraPose::from_rotation(R, eye / config.d_star));
  }
  return poses;
}

SceneObject make_object(const ObjectSpec& spec, const Eigen::Vector2d& ground_xy,
                        const GroundFrame& ground, std::mt19937_64& rng) {
  SceneObject obj;
  obj.class_id = spec.class_id;
  obj.base = ground.at(ground_xy.x(), ground_xy.y());
  obj.height_m = spec.height_m;
  obj.radius_m = spec.radius_m;
  obj.outliers = spec.outliers;
  std::uniform_real_distribution<double> along(0.05, 0.95);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  for (int j = 0; j < spec.features; ++j) {
    const double h = along(rng) * spec.height_m;
    const double a = angle(rng);
    obj.feature_points.push_back(obj.base + h * ground.up +
                                 spec.radius_m * (std::cos(a) * ground.e1 + std::sin(a) * ground.e2));
  }
  return obj;
}

std::optional<PixelRect> box_of(const SceneObject& obj, const SimScene& scene, const CameraPose& pose) {
  std::vector<Point3> outline{obj.base, obj.top(scene.vertical.vec())};
  outline.insert(outline.end(), obj.feature_points.begin(), obj.feature_points.end());
  PixelRect rect{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                 -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const Point3& metric : outline) {
    const Point3 p = metric / scene.d_star;
    if (!(pose.to_camera(p).z() > 1e-6)) return std::nullopt;
    const PixelPoint px = project(p, pose, scene.intrinsics);
    rect.u_min = std::min(rect.u_min, px.u);
    rect.v_min = std::min(rect.v_min, px.v);
    rect.u_max = std::max(rect.u_max, px.u);
    rect.v_max = std::max(rect.v_max, px.v);
  }
  const CameraIntrinsics& K = scene.intrinsics;
  if (K.width > 0 && (rect.u_min < 0.0 || rect.u_max > K.width)) return std::nullopt;
  if (K.height > 0 && (rect.v_min < 0.0 || rect.v_max > K.height)) return std::nullopt;
  if (!(rect.width() > 0.0) || !(rect.height() > 0.0)) return std::nullopt;
  return rect;
}

double visible_fraction(const SceneObject& obj, const SimScene& scene) {
  std::size_t visible = 0;
  for (const CameraPose& pose : scene.trajectory) {
    if (box_of(obj, scene, pose)) ++visible;
  }
  return static_cast<double>(visible) / static_cast<double>(scene.trajectory.size());
}

double overlap_area(const PixelRect& a, const PixelRect& b) {
  const double w = std::min(a.u_max, b.u_max) - std::max(a.u_min, b.u_min);
  const double h = std::min(a.v_max, b.v_max) - std::max(a.v_min, b.v_min);
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

bool in_image(const PixelPoint& px, const CameraIntrinsics& K) {
  if (K.width > 0 && (px.u < 0.0 || px.u > K.width)) return false;
  if (K.height > 0 && (px.v < 0.0 || px.v > K.height)) return false;
  return true;
}

}  // namespace

void SceneConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); };
  if (!(d_star > 0.0) || !std::isfinite(d_star)) fail("d_star must be positive");
  if (objects.empty()) fail("scene needs at least one object");
  for (const ObjectSpec& o : objects) {
    if (!(o.height_m > 0.0)) fail("object heights must be positive");
    if (o.radius_m < 0.0) fail("object radius must be non-negative");
    if (o.features < 0 || o.outliers < 0) fail("feature counts must be non-negative");
  }
  if (trajectory.frames < 1) fail("trajectory needs at least one frame");
  if (!(trajectory.radius_m > 0.0)) fail("trajectory radius must be positive");
  if (!(min_visible_fraction >= 0.0 && min_visible_fraction <= 1.0)) {
    fail("min_visible_fraction must lie in [0, 1]");
  }
  camera.validate();
  VerticalDirection{vertical};
}

void NoiseConfig::validate() const {
  if (!(feature_sigma >= 0.0) || !(box_jitter_px >= 0.0) || !(cov_scale >= 0.0) ||
      !(initial_sigma_factor >= 0.0) || !(decay_frames >= 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "noise parameters must be non-negative");
  }
}

double NoiseConfig::sigma_at(std::int64_t frame) const {
  if (decay_frames <= 0.0) return feature_sigma;
  return feature_sigma *
         (1.0 + (initial_sigma_factor - 1.0) * std::exp(-static_cast<double>(frame) / decay_frames));
}

SimScene generate_scene(const SceneConfig& config, std::uint64_t seed) {
  config.validate();
  auto seq = make_seed(seed, 0, 0x5ce7e);
  std::mt19937_64 rng(seq);
  const GroundFrame ground(config.vertical);

  SimScene scene;
  scene.seed = seed;
  scene.d_star = config.d_star;
  scene.vertical = VerticalDirection(config.vertical);
  scene.intrinsics = config.camera;
  scene.occlusion_overlap = config.occlusion_overlap;
  scene.trajectory = build_trajectory(config, ground, rng);

  const double half = 0.5 * config.markers.size_m;
  const Eigen::Vector2d mc = config.markers.ground_center;
  const std::array<Eigen::Vector2d, 4> corners{Eigen::Vector2d(-half, -half), Eigen::Vector2d(half, -half),
                                               Eigen::Vector2d(half, half), Eigen::Vector2d(-half, half)};
  for (std::size_t i = 0; i < 4; ++i) {
    scene.markers_metric[i] = ground.at(mc.x() + corners[i].x(), mc.y() + corners[i].y());
    scene.markers_map[i] = scene.markers_metric[i] / config.d_star;
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < config.objects.size(); ++i) {
    const ObjectSpec& spec = config.objects[i];
    bool placed = false;
    const int attempts = spec.ground_position ? 1 : kPlacementRetries;
    for (int attempt = 0; attempt < attempts && !placed; ++attempt) {
      Eigen::Vector2d xy;
      if (spec.ground_position) {
        xy = *spec.ground_position;
      } else {
        const double r = config.placement_radius_m * std::sqrt(unit(rng));
        const double a = 2.0 * std::numbers::pi * unit(rng);
        xy = Eigen::Vector2d(r * std::cos(a), r * std::sin(a));
      }
      SceneObject candidate = make_object(spec, xy, ground, rng);
      const bool separated = std::all_of(scene.objects.begin(), scene.objects.end(), [&](const SceneObject& o) {
        return (o.base - candidate.base).norm() >= o.radius_m + candidate.radius_m + config.min_separation_m;
      });
      if (separated && visible_fraction(candidate, scene) >= config.min_visible_fraction) {
        scene.objects.push_back(std::move(candidate));
        placed = true;
      }
    }
    if (!placed) {
      throw Error(ErrorCode::InfeasiblePlacement,
                  "object " + std::to_string(i) + " cannot be placed in view of the trajectory");
    }
  }
  return scene;
}

std::optional<PixelRect> object_box(const SimScene& scene, std::size_t object_index, std::int64_t k) {
  return box_of(scene.objects.at(object_index), scene, scene.trajectory.at(static_cast<std::size_t>(k)));
}

Frame render_frame(const SimScene& scene, std::int64_t k, const NoiseConfig& noise,
                   bool detect_this_frame) {
  if (k < 0 || static_cast<std::size_t>(k) >= scene.trajectory.size()) {
    throw Error(ErrorCode::InvalidArgument, "frame " + std::to_string(k) + " is outside the trajectory");
  }
  auto seq = make_seed(scene.seed, static_cast<std::uint64_t>(k), 0xf4a3e);
  std::mt19937_64 rng(seq);
  const double sigma = noise.sigma_at(k);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Frame frame;
  frame.index = k;
  frame.pose = scene.trajectory[static_cast<std::size_t>(k)];
  frame.intrinsics = scene.intrinsics;
  frame.vertical = scene.vertical;
  const Mat3 reported = noise.cov_scale * sigma * sigma * Mat3::Identity();

  auto emit = [&](std::int64_t id, const Point3& exact_map) {
    const Point3 noisy = exact_map + sigma * Vec3(gauss(rng), gauss(rng), gauss(rng));
    if (!(frame.pose.to_camera(noisy).z() > 1e-6)) return;
    if (!in_image(project(noisy, frame.pose, frame.intrinsics), frame.intrinsics)) return;
    frame.features.push_back(FeatureEstimate{id, noisy, reported});
  };

  std::vector<std::optional<PixelRect>> boxes(scene.objects.size());
  std::vector<double> depth(scene.objects.size(), 0.0);
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const SceneObject& obj = scene.objects[i];
    boxes[i] = box_of(obj, scene, frame.pose);
    const Point3 mid = (obj.base + 0.5 * obj.height_m * scene.vertical.vec()) / scene.d_star;
    depth[i] = frame.pose.to_camera(mid).z();
  }

  std::vector<bool> detected(scene.objects.size(), false);
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    if (!boxes[i]) continue;
    const double area = boxes[i]->width() * boxes[i]->height();
    bool occluded = false;
    for (std::size_t j = 0; j < scene.objects.size() && !occluded; ++j) {
      if (j == i || !boxes[j] || depth[j] >= depth[i]) continue;
      occluded = overlap_area(*boxes[i], *boxes[j]) >= scene.occlusion_overlap * area;
    }
    detected[i] = !occluded;
  }

  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const SceneObject& obj = scene.objects[i];
    for (std::size_t j = 0; j < obj.feature_points.size(); ++j) {
      emit(static_cast<std::int64_t>(1000 * (i + 1) + j), obj.feature_points[j] / scene.d_star);
    }
    if (!boxes[i]) continue;
    // Background points seen through the detection window.
    const PixelRect& box = *boxes[i];
    for (int j = 0; j < obj.outliers; ++j) {
      const PixelPoint px{box.u_min + (0.1 + 0.8 * unit(rng)) * box.width(),
                          box.v_min + (0.1 + 0.8 * unit(rng)) * box.height()};
      const Ray3 ray = back_project(px, frame.pose, frame.intrinsics);
      const double z_target = depth[i] * (1.3 + 0.7 * unit(rng));
      const double z_per_unit = (frame.pose.rotation() * ray.direction).z();
      emit(static_cast<std::int64_t>(1000000 + 1000 * i + static_cast<std::size_t>(j)),
           ray.origin + (z_target / z_per_unit) * ray.direction);
    }
  }

  if (detect_this_frame) {
    std::uniform_real_distribution<double> jitter(-noise.box_jitter_px, noise.box_jitter_px);
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
      if (!detected[i]) continue;
      PixelRect rect = *boxes[i];
      if (noise.box_jitter_px > 0.0) {
        rect.u_min += jitter(rng);
        rect.v_min += jitter(rng);
        rect.u_max += jitter(rng);
        rect.v_max += jitter(rng);
        if (!(rect.u_min < rect.u_max) || !(rect.v_min < rect.v_max)) continue;
      }
      frame.detections.push_back(DetectionBox{rect, scene.objects[i].class_id});
    }
  }
  return frame;
}

double true_range(const SimScene& scene, std::int64_t k, std::size_t marker_index) {
  const CameraPose& pose = scene.trajectory.at(static_cast<std::size_t>(k));
  return (scene.markers_metric.at(marker_index) - scene.d_star * pose.center()).norm();
}

SceneConfig preset_scene(std::string_view name) {
  SceneConfig config;
  config.d_star = 2.0;
  const std::array<Eigen::Vector2d, 4> row{Eigen::Vector2d(-0.24, 0.05), Eigen::Vector2d(-0.08, -0.05),
                                           Eigen::Vector2d(0.08, 0.05), Eigen::Vector2d(0.24, -0.05)};
  auto bottles = [&](const std::array<double, 4>& heights, double radius) {
    for (std::size_t i = 0; i < 4; ++i) {
      ObjectSpec o;
      o.class_id = 0;
      o.height_m = heights[i];
      o.radius_m = radius;
      o.ground_position = row[i];
      o.features = 4;
      config.objects.push_back(o);
    }
  };
  if (name == "exp1") {
    bottles({0.30, 0.30, 0.30, 0.30}, 0.035);
  } else if (name == "exp3") {
    bottles({0.20, 0.25, 0.30, 0.33}, 0.035);
  } else if (name == "noiseless") {
    bottles({0.30, 0.30, 0.30, 0.30}, 0.0);
    config.trajectory.wobble_deg = 2.0;
  } else if (name == "exp2") {
    ObjectSpec oven;
    oven.class_id = 1;
    oven.height_m = 0.30;
    oven.radius_m = 0.12;
    oven.ground_position = Eigen::Vector2d(0.0, 0.0);
    oven.features = 8;
    config.objects.push_back(oven);
    config.trajectory.radius_m = 1.3;
  } else {
    throw Error(ErrorCode::InvalidConfig, "unknown scene preset '" + std::string(name) + "'");
  }
  return config;
}

NoiseConfig preset_noise(std::string_view name) {
  NoiseConfig noise;
  if (name == "noiseless") return noise;
  if (name == "exp1" || name == "exp2" || name == "exp3") {
    noise.feature_sigma = 0.02;
    noise.box_jitter_px = 1.0;
    return noise;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown noise preset '" + std::string(name) + "'");
}

}  // namespace scalesense
