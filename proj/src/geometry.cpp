#include "scalesense/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "scalesense/error.hpp"

namespace scalesense {

namespace {

constexpr double kMinDepth = 1e-9;
constexpr double kUnitTol = 1e-9;
constexpr double kParallelTol = 1e-9;
constexpr double kMinClipLength = 1e-6;
constexpr double kMinHeight = 1e-12;
constexpr double kVarianceTol = 1e-12;

bool all_finite(const Vec3& v) { return v.allFinite(); }

void check_orthonormal(const Mat3& R) {
  const Mat3 residual = R.transpose() * R - Mat3::Identity();
  if (!R.allFinite() || residual.cwiseAbs().maxCoeff() > kUnitTol || R.determinant() <= 0.0) {
    throw Error(ErrorCode::InvalidArgument, "rotation is not a proper orthonormal matrix");
  }
}

}  // namespace

Mat3 CameraIntrinsics::matrix() const {
  Mat3 K;
  K << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return K;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy) ||
      !std::isfinite(cx) || !std::isfinite(cy)) {
    throw Error(ErrorCode::InvalidArgument, "intrinsics require finite fx > 0 and fy > 0");
  }
  if (width < 0 || height < 0) {
    throw Error(ErrorCode::InvalidArgument, "image size must be non-negative");
  }
}

CameraPose::CameraPose()
    : orientation_(Eigen::Quaterniond::Identity()),
      rotation_(Mat3::Identity()),
      center_(Vec3::Zero()) {}

CameraPose::CameraPose(const Eigen::Quaterniond& world_to_camera, const Vec3& center)
    : orientation_(world_to_camera), center_(center) {
  if (!orientation_.coeffs().allFinite() || std::abs(orientation_.norm() - 1.0) > kUnitTol) {
    throw Error(ErrorCode::InvalidArgument, "pose quaternion must have unit norm");
  }
  if (!all_finite(center_)) {
    throw Error(ErrorCode::InvalidArgument, "camera center must be finite");
  }
  rotation_ = orientation_.toRotationMatrix();
  check_orthonormal(rotation_);
}

CameraPose CameraPose::from_rotation(const Mat3& world_to_camera, const Vec3& center) {
  check_orthonormal(world_to_camera);
  Eigen::Quaterniond q(world_to_camera);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  return CameraPose(q, center);
}

VerticalDirection::VerticalDirection(const Vec3& v) : v_(v) {
  const double n = v.norm();
  if (!v.allFinite() || n < 1e-12) {
    throw Error(ErrorCode::InvalidArgument, "vertical direction must be a finite nonzero vector");
  }
  // Leave already-unit input untouched so serialized values re-read exactly.
  if (std::abs(n - 1.0) > 1e-12) v_ /= n;
}

ImageLine::ImageLine(const Eigen::Vector3d& coefficients) : abc_(coefficients) {
  const double n = coefficients.head<2>().norm();
  if (!coefficients.allFinite() || n < 1e-300) {
    throw Error(ErrorCode::DegenerateLine, "line has no finite direction");
  }
  abc_ /= n;
}

bool PixelRect::contains_strictly(const PixelPoint& p, double margin) const noexcept {
  return p.u > u_min + margin && p.u < u_max - margin && p.v > v_min + margin &&
         p.v < v_max - margin;
}

Ray3 Ray3::through(const Point3& origin, const Vec3& direction) {
  const double n = direction.norm();
  if (!(n > 0.0)) throw Error(ErrorCode::InvalidArgument, "ray direction must be nonzero");
  return Ray3{origin, direction / n};
}

PixelPoint project(const Point3& p, const CameraPose& pose, const CameraIntrinsics& K) {
  const Vec3 pc = pose.to_camera(p);
  if (!(pc.z() > kMinDepth)) {
    throw Error(ErrorCode::BehindCamera, "point has camera depth " + std::to_string(pc.z()));
  }
  return PixelPoint{K.fx * pc.x() / pc.z() + K.cx, K.fy * pc.y() / pc.z() + K.cy};
}

Ray3 back_project(const PixelPoint& px, const CameraPose& pose, const CameraIntrinsics& K) {
  const Vec3 in_camera = Vec3((px.u - K.cx) / K.fx, (px.v - K.cy) / K.fy, 1.0).normalized();
  return Ray3{pose.center(), pose.rotation().transpose() * in_camera};
}

HomogeneousPixel vertical_vanishing_point(const CameraPose& pose, const CameraIntrinsics& K,
                                          const VerticalDirection& v) {
  return K.matrix() * (pose.rotation() * v.vec());
}

ImageLine vertical_image_line(const PixelPoint& pi, const HomogeneousPixel& vvp) {
  const double scale = vvp.norm();
  if (!(scale > 0.0)) throw Error(ErrorCode::DegenerateLine, "vanishing point is the zero vector");
  const Eigen::Vector3d x(pi.u, pi.v, 1.0);
  const Eigen::Vector3d l = x.cross(vvp / scale);
  if (l.head<2>().norm() <= 1e-12 * x.norm()) {
    throw Error(ErrorCode::DegenerateLine, "image point coincides with the vanishing point");
  }
  return ImageLine(l);
}

Vec3 back_projected_plane_normal(const ImageLine& line, const CameraPose& pose,
                                 const CameraIntrinsics& K) {
  // A camera-frame direction X lies on the plane iff l^T K X = 0.
  return pose.rotation().transpose() * (K.matrix().transpose() * line.coefficients());
}

std::pair<PixelPoint, PixelPoint> clip_line_to_rect(const ImageLine& line, const PixelRect& rect) {
  if (!(rect.width() > 0.0) || !(rect.height() > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "rectangle must have positive width and height");
  }
  // Liang-Barsky on the parametrization p0 + t * dir.
  const double p0[2] = {-line.a() * line.c(), -line.b() * line.c()};
  const double dir[2] = {-line.b(), line.a()};
  const double lo[2] = {rect.u_min, rect.v_min};
  const double hi[2] = {rect.u_max, rect.v_max};

  double t_enter = -std::numeric_limits<double>::infinity();
  double t_exit = std::numeric_limits<double>::infinity();
  double enter_snap = 0.0, exit_snap = 0.0;
  int enter_axis = -1, exit_axis = -1;

  for (int axis = 0; axis < 2; ++axis) {
    if (dir[axis] == 0.0) {
      if (p0[axis] < lo[axis] || p0[axis] > hi[axis]) {
        throw Error(ErrorCode::NoIntersection, "line misses the rectangle");
      }
      continue;
    }
    double t_lo = (lo[axis] - p0[axis]) / dir[axis];
    double t_hi = (hi[axis] - p0[axis]) / dir[axis];
    double bound_lo = lo[axis], bound_hi = hi[axis];
    if (t_lo > t_hi) {
      std::swap(t_lo, t_hi);
      std::swap(bound_lo, bound_hi);
    }
    if (t_lo > t_enter) {
      t_enter = t_lo;
      enter_axis = axis;
      enter_snap = bound_lo;
    }
    if (t_hi < t_exit) {
      t_exit = t_hi;
      exit_axis = axis;
      exit_snap = bound_hi;
    }
  }
  if (t_enter > t_exit) throw Error(ErrorCode::NoIntersection, "line misses the rectangle");
  if (t_exit - t_enter < kMinClipLength) {
    throw Error(ErrorCode::Tangent, "line only grazes the rectangle");
  }

  auto point_at = [&](double t, int axis, double snap) {
    double uv[2] = {p0[0] + t * dir[0], p0[1] + t * dir[1]};
    uv[axis] = snap;
    return PixelPoint{uv[0], uv[1]};
  };
  return {point_at(t_enter, enter_axis, enter_snap), point_at(t_exit, exit_axis, exit_snap)};
}

Line3 vertical_line_through(const Point3& p, const VerticalDirection& v) { return Line3{p, v.vec()}; }

Point3 ray_line_closest_point(const Ray3& ray, const Line3& line) {
  const double b = ray.direction.dot(line.direction);
  if (std::abs(b) >= 1.0 - kParallelTol) {
    throw Error(ErrorCode::ParallelLines, "ray is parallel to the vertical line");
  }
  const Vec3 w0 = ray.origin - line.point;
  const double d = ray.direction.dot(w0);
  const double e = line.direction.dot(w0);
  const double t = (e - b * d) / (1.0 - b * b);
  return line.point + t * line.direction;
}

ExtremityPair object_extremities(const FeatureEstimate& feat, const DetectionBox& det,
                                 const CameraPose& pose, const CameraIntrinsics& K,
                                 const VerticalDirection& v, const GeometryOptions& opts) {
  const PixelPoint pi = project(feat.mean, pose, K);
  if (!det.rect.contains_strictly(pi, opts.inward_margin_px)) {
    throw Error(ErrorCode::FeatureOutsideBox, "feature " + std::to_string(feat.id) +
                                                  " does not project inside the detection");
  }
  const ImageLine lambda = vertical_image_line(pi, vertical_vanishing_point(pose, K, v));
  const auto [first, second] = clip_line_to_rect(lambda, det.rect);

  const Line3 axis = vertical_line_through(feat.mean, v);
  const Point3 a = ray_line_closest_point(back_project(first, pose, K), axis);
  const Point3 b = ray_line_closest_point(back_project(second, pose, K), axis);
  if ((a - b).dot(v.vec()) >= 0.0) return ExtremityPair{a, b};
  return ExtremityPair{b, a};
}

double dimensionless_height(const ExtremityPair& pair) {
  const double D = (pair.top - pair.bottom).norm();
  if (!(D >= kMinHeight)) throw Error(ErrorCode::ZeroHeight, "extremities coincide");
  return D;
}

Vec3 height_gradient(const ExtremityPair& pair) {
  const double D = dimensionless_height(pair);
  return (pair.top - pair.bottom) / D;
}

double height_sigma(const ExtremityPair& pair, const Mat3& P) {
  const Vec3 J = height_gradient(pair);
  double q = J.dot(P * J);
  if (!std::isfinite(q) || q < -kVarianceTol) {
    throw Error(ErrorCode::NonPositiveVariance, "covariance yields a negative height variance");
  }
  q = std::max(q, 0.0);
  // p_t and p_d carry the same, independent covariance.
  return std::sqrt(2.0 * q);
}

HeightObservation make_observation(const FeatureEstimate& feat, const DetectionBox& det,
                                   const CameraPose& pose, const CameraIntrinsics& K,
                                   const VerticalDirection& v, std::int64_t frame,
                                   const GeometryOptions& opts) {
  const ExtremityPair pair = object_extremities(feat, det, pose, K, v, opts);
  HeightObservation obs;
  obs.D = dimensionless_height(pair);
  obs.sigma_D = std::max(height_sigma(pair, feat.covariance), opts.sigma_min);
  obs.class_id = det.class_id;
  obs.frame = frame;
  obs.feature_id = feat.id;
  return obs;
}

}  // namespace scalesense
