#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <utility>

namespace scalesense {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Map point in dimensionless map units (or meters, for simulator ground truth).
using Point3 = Eigen::Vector3d;

/// Homogeneous image point; third coordinate 0 marks a point at infinity.
using HomogeneousPixel = Eigen::Vector3d;

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  // Image size in pixels; 0 means unbounded (only used by the simulator).
  int width = 0;
  int height = 0;

  Mat3 matrix() const;
  void validate() const;

  friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;
};

/// World->camera rigid transform. The unit quaternion is the stored
/// representation; the rotation matrix is derived from it so that serializing
/// and re-reading a pose reproduces it bit for bit.
class CameraPose {
 public:
  CameraPose();
  CameraPose(const Eigen::Quaterniond& world_to_camera, const Vec3& center);

  static CameraPose from_rotation(const Mat3& world_to_camera, const Vec3& center);

  const Eigen::Quaterniond& orientation() const noexcept { return orientation_; }
  const Mat3& rotation() const noexcept { return rotation_; }
  const Vec3& center() const noexcept { return center_; }

  Vec3 to_camera(const Point3& world) const { return rotation_ * (world - center_); }

  friend bool operator==(const CameraPose& a, const CameraPose& b) {
    return a.orientation_.coeffs() == b.orientation_.coeffs() && a.center_ == b.center_;
  }

 private:
  Eigen::Quaterniond orientation_;
  Mat3 rotation_;
  Vec3 center_;
};

/// Unit vector of the world "up" direction.
class VerticalDirection {
 public:
  VerticalDirection() : v_(0.0, 0.0, 1.0) {}
  explicit VerticalDirection(const Vec3& v);

  const Vec3& vec() const noexcept { return v_; }

  friend bool operator==(const VerticalDirection&, const VerticalDirection&) = default;

 private:
  Vec3 v_;
};

struct PixelPoint {
  double u = 0.0;
  double v = 0.0;

  friend bool operator==(const PixelPoint&, const PixelPoint&) = default;
};

/// a*u + b*v + c = 0 with (a, b) of unit length.
class ImageLine {
 public:
  explicit ImageLine(const Eigen::Vector3d& coefficients);

  double a() const noexcept { return abc_.x(); }
  double b() const noexcept { return abc_.y(); }
  double c() const noexcept { return abc_.z(); }
  const Eigen::Vector3d& coefficients() const noexcept { return abc_; }

  double signed_distance(const PixelPoint& p) const noexcept {
    return abc_.x() * p.u + abc_.y() * p.v + abc_.z();
  }

 private:
  Eigen::Vector3d abc_;
};

struct PixelRect {
  double u_min = 0.0;
  double v_min = 0.0;
  double u_max = 0.0;
  double v_max = 0.0;

  double width() const noexcept { return u_max - u_min; }
  double height() const noexcept { return v_max - v_min; }
  bool contains_strictly(const PixelPoint& p, double margin) const noexcept;

  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

struct DetectionBox {
  PixelRect rect;
  int class_id = 0;

  friend bool operator==(const DetectionBox&, const DetectionBox&) = default;
};

struct Ray3 {
  Point3 origin;
  Vec3 direction;  // unit

  static Ray3 through(const Point3& origin, const Vec3& direction);
};

struct Line3 {
  Point3 point;
  Vec3 direction;  // unit
};

struct FeatureEstimate {
  std::int64_t id = 0;
  Point3 mean = Point3::Zero();
  Mat3 covariance = Mat3::Zero();

  friend bool operator==(const FeatureEstimate& a, const FeatureEstimate& b) {
    return a.id == b.id && a.mean == b.mean && a.covariance == b.covariance;
  }
};

struct ExtremityPair {
  Point3 top;
  Point3 bottom;
};

struct HeightObservation {
  double D = 0.0;
  double sigma_D = 0.0;
  int class_id = 0;
  std::int64_t frame = 0;
  std::int64_t feature_id = 0;
};

struct GeometryOptions {
  double sigma_min = 1e-4;
  double inward_margin_px = 1.0;
};

PixelPoint project(const Point3& p, const CameraPose& pose, const CameraIntrinsics& K);

Ray3 back_project(const PixelPoint& px, const CameraPose& pose, const CameraIntrinsics& K);

HomogeneousPixel vertical_vanishing_point(const CameraPose& pose, const CameraIntrinsics& K,
                                          const VerticalDirection& v);

ImageLine vertical_image_line(const PixelPoint& pi, const HomogeneousPixel& vvp);

/// World-frame normal of the plane spanned by the camera center and `line`.
Vec3 back_projected_plane_normal(const ImageLine& line, const CameraPose& pose,
                                 const CameraIntrinsics& K);

/// Both points lie on the rectangle boundary; order is unspecified.
std::pair<PixelPoint, PixelPoint> clip_line_to_rect(const ImageLine& line, const PixelRect& rect);

Line3 vertical_line_through(const Point3& p, const VerticalDirection& v);

/// Point on `line` closest to the infinite line carrying `ray`.
Point3 ray_line_closest_point(const Ray3& ray, const Line3& line);

ExtremityPair object_extremities(const FeatureEstimate& feat, const DetectionBox& det,
                                 const CameraPose& pose, const CameraIntrinsics& K,
                                 const VerticalDirection& v, const GeometryOptions& opts = {});

double dimensionless_height(const ExtremityPair& pair);

/// Gradient of the extremity distance w.r.t. the top point; unit norm.
Vec3 height_gradient(const ExtremityPair& pair);

double height_sigma(const ExtremityPair& pair, const Mat3& P);

HeightObservation make_observation(const FeatureEstimate& feat, const DetectionBox& det,
                                   const CameraPose& pose, const CameraIntrinsics& K,
                                   const VerticalDirection& v, std::int64_t frame,
                                   const GeometryOptions& opts = {});

}  // namespace scalesense
