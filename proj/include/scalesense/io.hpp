#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scalesense/evaluation.hpp"
#include "scalesense/frame.hpp"
#include "scalesense/inference.hpp"
#include "scalesense/simulator.hpp"

namespace scalesense {

/// Decimal with 17 significant digits; lossless for doubles.
std::string format_double(double value);

// ---------------------------------------------------------------------------
// Frame feed: newline-delimited JSON, one frame per line.
//
// {"frame":k,
//  "pose":{"q":[w,x,y,z],"center":[x,y,z]},
//  "intrinsics":{"fx":..,"fy":..,"cx":..,"cy":..,"width":..,"height":..},
//  "vertical":[x,y,z],
//  "features":[{"id":..,"mean":[x,y,z],"cov":[xx,xy,xz,yy,yz,zz]}],
//  "detections":[{"class_id":..,"rect":[u_min,v_min,u_max,v_max]}]}

std::string write_frame_record(const Frame& frame);
Frame parse_frame_record(std::string_view line, std::size_t line_number = 1);

/// Streaming reader; enforces strictly increasing frame indices.
class FrameStreamReader {
 public:
  explicit FrameStreamReader(std::istream& in) : in_(&in) {}

  /// Next frame, or empty at end of input. Throws ParseError / NonMonotonicFrame.
  std::optional<Frame> next();
  std::size_t line_number() const noexcept { return line_; }

 private:
  std::istream* in_;
  std::size_t line_ = 0;
  std::optional<std::int64_t> last_index_;
};

std::vector<Frame> parse_frame_stream(std::istream& in);
void write_frame_stream(std::ostream& out, std::span<const Frame> frames);

// ---------------------------------------------------------------------------
// Ground-truth sidecar (JSON). Only the evaluator reads it.

struct TruthObject {
  int class_id = 0;
  double height_m = 0.0;
  double radius_m = 0.0;
  Point3 base = Point3::Zero();
};

struct TruthFrame {
  std::int64_t frame = 0;
  Point3 center_map = Point3::Zero();
  std::array<double, kMarkerCount> ranges{};
};

struct GroundTruth {
  double d_star = 0.0;
  Vec3 vertical{0.0, 0.0, 1.0};
  std::vector<TruthObject> objects;
  std::array<Point3, kMarkerCount> markers_metric;
  std::array<Point3, kMarkerCount> markers_map;
  std::vector<TruthFrame> frames;

  const TruthFrame& at_frame(std::int64_t frame) const;
};

GroundTruth make_truth(const SimScene& scene);
std::string write_truth(const GroundTruth& truth);
GroundTruth parse_truth(std::string_view document);

// ---------------------------------------------------------------------------
// CSV traces

inline constexpr std::string_view kPosteriorTraceHeader = "update,frame,d_map,mean_d,variance_d,entropy";
inline constexpr std::string_view kLocalTraceHeader = "update,frame,feature_id,class_id,D,sigma_D,d_local";
inline constexpr std::string_view kErrorCsvHeader =
    "update,frame,d_map,d_local,e1,e2,e3,e4,epsilon,delta1,delta2,delta3,delta4,Delta,Delta_baseline";

void write_posterior_trace(std::ostream& out, std::span<const UpdateRecord> updates);
void write_local_trace(std::ostream& out, std::span<const UpdateRecord> updates);

/// Joins the two traces on the update column.
std::vector<UpdateRecord> parse_traces(std::istream& posterior, std::istream& local);

struct EvaluatedUpdate {
  ErrorSample estimate;  // d = posterior MAP after the update
  double d_local = 0.0;
  double Delta_baseline = 0.0;  // Delta with d fixed at 1
};

void write_error_csv(std::ostream& out, std::span<const EvaluatedUpdate> rows);

}  // namespace scalesense
