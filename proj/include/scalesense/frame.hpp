#pragma once

#include <cstdint>
#include <vector>

#include "scalesense/geometry.hpp"

namespace scalesense {

/// One camera frame as delivered by the SLAM front end: pose and features in
/// map units, plus the detector output (empty on frames where it did not run).
struct Frame {
  std::int64_t index = 0;
  CameraPose pose;
  CameraIntrinsics intrinsics;
  VerticalDirection vertical;
  std::vector<FeatureEstimate> features;
  std::vector<DetectionBox> detections;

  friend bool operator==(const Frame&, const Frame&) = default;
};

}  // namespace scalesense
