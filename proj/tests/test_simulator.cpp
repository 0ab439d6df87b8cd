#include <doctest.h>

#include <cmath>
#include <map>

#include "scalesense/error.hpp"
#include "scalesense/simulator.hpp"

using namespace scalesense;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidArgument;
}

// Camera at the origin looking along +y with world up mapping to image up.
SimScene hand_scene() {
  SimScene scene;
  scene.d_star = 2.0;
  scene.intrinsics = CameraIntrinsics{500, 500, 320, 240, 640, 480};
  Mat3 R;
  R << 1, 0, 0, 0, 0, -1, 0, 1, 0;
  scene.trajectory.push_back(CameraPose::from_rotation(R, Vec3::Zero()));
  for (std::size_t i = 0; i < 4; ++i) {
    scene.markers_metric[i] = Point3(0.1 * static_cast<double>(i), 2.0, -0.2);
    scene.markers_map[i] = scene.markers_metric[i] / scene.d_star;
  }
  return scene;
}

SceneObject pole(const Point3& base, double height) {
  SceneObject o;
  o.base = base;
  o.height_m = height;
  o.feature_points = {base + Vec3(0, 0, 0.5 * height)};
  return o;
}

}  // namespace

TEST_SUITE("simulator") {

TEST_CASE("experiment presets") {
  const SimScene exp1 = generate_scene(preset_scene("exp1"), 1);
  REQUIRE(exp1.objects.size() == 4);
  for (const SceneObject& o : exp1.objects) {
    CHECK(o.height_m == 0.30);
    CHECK(o.class_id == 0);
  }
  CHECK(exp1.d_star == 2.0);

  const SimScene exp3 = generate_scene(preset_scene("exp3"), 1);
  REQUIRE(exp3.objects.size() == 4);
  const double heights[] = {0.20, 0.25, 0.30, 0.33};
  for (std::size_t i = 0; i < 4; ++i) CHECK(exp3.objects[i].height_m == heights[i]);

  CHECK(code_of([] { preset_scene("exp9"); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { preset_noise("exp9"); }) == ErrorCode::InvalidConfig);
  CHECK(preset_noise("noiseless").feature_sigma == 0.0);
}

TEST_CASE("same seed gives bit-identical scenes and frames") {
  const SimScene a = generate_scene(preset_scene("exp1"), 42);
  const SimScene b = generate_scene(preset_scene("exp1"), 42);
  REQUIRE(a.trajectory.size() == b.trajectory.size());
  for (std::size_t k = 0; k < a.trajectory.size(); ++k) CHECK(a.trajectory[k] == b.trajectory[k]);
  for (std::size_t i = 0; i < a.objects.size(); ++i) {
    CHECK(a.objects[i].base == b.objects[i].base);
    CHECK(a.objects[i].feature_points == b.objects[i].feature_points);
  }
  const NoiseConfig noise = preset_noise("exp1");
  for (std::int64_t k : {0, 10, 455, 899}) CHECK(render_frame(a, k, noise, true) == render_frame(b, k, noise, true));

  const SimScene c = generate_scene(preset_scene("exp1"), 43);
  CHECK(!(render_frame(a, 10, noise, true) == render_frame(c, 10, noise, true)));
}

TEST_CASE("noiseless features sit exactly on the objects") {
  SceneConfig config = preset_scene("noiseless");
  for (ObjectSpec& o : config.objects) o.height_m = 0.5;
  const SimScene scene = generate_scene(config, 2);
  for (const SceneObject& o : scene.objects) {
    CHECK((o.top(scene.vertical.vec()) - o.base).norm() / scene.d_star == doctest::Approx(0.25).epsilon(1e-15));
  }
  const Frame frame = render_frame(scene, 50, NoiseConfig{}, true);
  REQUIRE(!frame.features.empty());
  for (const FeatureEstimate& f : frame.features) {
    const auto i = static_cast<std::size_t>(f.id / 1000 - 1);
    const auto j = static_cast<std::size_t>(f.id % 1000);
    CHECK(f.mean == scene.objects[i].feature_points[j] / scene.d_star);
    CHECK(f.covariance == Mat3::Zero());
  }
}

TEST_CASE("reported covariance matches the injected noise") {
  SceneConfig config = preset_scene("exp1");
  config.trajectory.frames = 8000;
  const SimScene scene = generate_scene(config, 7);
  const NoiseConfig noise = preset_noise("exp1");
  Eigen::Vector3d sum_sq = Eigen::Vector3d::Zero();
  std::size_t n = 0;
  for (std::int64_t k = 0; k < config.trajectory.frames; ++k) {
    for (const FeatureEstimate& f : render_frame(scene, k, noise, false).features) {
      const auto i = static_cast<std::size_t>(f.id / 1000 - 1);
      const auto j = static_cast<std::size_t>(f.id % 1000);
      const Vec3 err = f.mean - scene.objects[i].feature_points[j] / scene.d_star;
      sum_sq += err.cwiseProduct(err);
      CHECK(f.covariance == noise.feature_sigma * noise.feature_sigma * Mat3::Identity());
      ++n;
    }
  }
  REQUIRE(n >= 100000);
  for (int axis = 0; axis < 3; ++axis) {
    const double empirical = std::sqrt(sum_sq[axis] / static_cast<double>(n));
    CHECK(std::abs(empirical - noise.feature_sigma) / noise.feature_sigma < 0.05);
  }
}

TEST_CASE("noise schedule") {
  NoiseConfig noise;
  noise.feature_sigma = 0.01;
  CHECK(noise.sigma_at(0) == 0.01);
  noise.initial_sigma_factor = 3.0;
  noise.decay_frames = 100.0;
  CHECK(noise.sigma_at(0) == doctest::Approx(0.03));
  CHECK(noise.sigma_at(100) == doctest::Approx(0.01 * (1.0 + 2.0 * std::exp(-1.0))));
  CHECK(noise.sigma_at(100000) == doctest::Approx(0.01));
  noise.cov_scale = -1.0;
  CHECK(code_of([&] { noise.validate(); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("occluded and out-of-view objects are not detected") {
  SimScene scene = hand_scene();
  scene.objects.push_back(pole(Point3(0.0, 2.0, -0.2), 0.4));    // near, 1 map unit away
  scene.objects.push_back(pole(Point3(0.02, 4.0, -0.2), 0.4));   // far, behind the near one
  scene.objects.push_back(pole(Point3(0.0, -2.0, -0.2), 0.4));   // behind the camera
  scene.objects.push_back(pole(Point3(1.2, 3.0, -0.2), 0.4));    // visible on its own
  for (SceneObject& o : scene.objects) o.radius_m = 0.0;
  scene.objects[0].feature_points.push_back(Point3(0.05, 2.0, 0.0));
  scene.objects[1].feature_points.push_back(Point3(0.04, 4.0, 0.0));
  scene.objects[3].feature_points.push_back(Point3(1.25, 3.0, 0.0));

  CHECK(!object_box(scene, 2, 0));
  const Frame frame = render_frame(scene, 0, NoiseConfig{}, true);
  REQUIRE(frame.detections.size() == 2);
  CHECK(frame.detections[0].rect == *object_box(scene, 0, 0));
  CHECK(frame.detections[1].rect == *object_box(scene, 3, 0));

  // Without detection this frame, the boxes are simply absent.
  CHECK(render_frame(scene, 0, NoiseConfig{}, false).detections.empty());
  CHECK(code_of([&] { render_frame(scene, 1, NoiseConfig{}, true); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("outlier features project inside their object's box") {
  SceneConfig config = preset_scene("exp1");
  for (ObjectSpec& o : config.objects) o.outliers = 2;
  const SimScene scene = generate_scene(config, 3);
  const Frame frame = render_frame(scene, 200, NoiseConfig{}, true);
  std::size_t outliers = 0;
  for (const FeatureEstimate& f : frame.features) {
    if (f.id < 1000000) continue;
    ++outliers;
    const auto i = static_cast<std::size_t>((f.id - 1000000) / 1000);
    const auto box = object_box(scene, i, 200);
    REQUIRE(box);
    const PixelPoint px = project(f.mean, frame.pose, frame.intrinsics);
    CHECK(box->contains_strictly(px, 0.0));
    // Outliers lie behind the object, not on it.
    CHECK(frame.pose.to_camera(f.mean).z() >
          frame.pose.to_camera(scene.objects[i].base / scene.d_star).z() * 1.1);
  }
  CHECK(outliers > 0);
}

TEST_CASE("true marker ranges") {
  SimScene scene = hand_scene();
  scene.markers_metric[0] = Point3(0, 0, 2);
  CHECK(true_range(scene, 0, 0) == 2.0);
  // The camera center is in map units and is scaled to meters.
  scene.trajectory[0] = CameraPose(Eigen::Quaterniond::Identity(), Vec3(0, 0, 0.5));
  CHECK(true_range(scene, 0, 0) == 1.0);
}

TEST_CASE("scene configuration validation") {
  SceneConfig bad = preset_scene("exp1");
  bad.d_star = 0.0;
  CHECK(code_of([&] { generate_scene(bad, 1); }) == ErrorCode::InvalidConfig);
  bad = preset_scene("exp1");
  bad.objects.clear();
  CHECK(code_of([&] { generate_scene(bad, 1); }) == ErrorCode::InvalidConfig);
  bad = preset_scene("exp1");
  bad.objects[0].height_m = -0.1;
  CHECK(code_of([&] { generate_scene(bad, 1); }) == ErrorCode::InvalidConfig);

  SceneConfig far = preset_scene("exp1");
  far.objects[0].ground_position = Eigen::Vector2d(50.0, 50.0);
  CHECK(code_of([&] { generate_scene(far, 1); }) == ErrorCode::InfeasiblePlacement);

  // Random placement finds a spot when none is given.
  SceneConfig random = preset_scene("exp1");
  for (ObjectSpec& o : random.objects) o.ground_position.reset();
  const SimScene scene = generate_scene(random, 9);
  CHECK(scene.objects.size() == 4);
}

TEST_CASE("orbit trajectory keeps the objects in view") {
  SceneConfig config = preset_scene("exp2");
  config.trajectory.kind = TrajectoryKind::Orbit;
  config.trajectory.frames = 360;
  const SimScene scene = generate_scene(config, 4);
  std::size_t seen = 0;
  for (std::int64_t k = 0; k < 360; ++k) seen += object_box(scene, 0, k).has_value();
  CHECK(seen >= 0.8 * 360);
}

}  // TEST_SUITE
