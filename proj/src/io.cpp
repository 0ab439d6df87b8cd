#include "scalesense/io.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "scalesense/error.hpp"

namespace scalesense {

namespace {

using nlohmann::json;

void append_vec(std::string& out, std::span<const double> values) {
  out += '[';
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += format_double(values[i]);
  }
  out += ']';
}

void append_vec3(std::string& out, const Vec3& v) { append_vec(out, std::array<double, 3>{v.x(), v.y(), v.z()}); }

/// Field access that reports the offending field with the line number.
class FieldReader {
 public:
  explicit FieldReader(std::size_t line) : line_(line) {}

  [[noreturn]] void fail(const std::string& field, const std::string& reason) const {
    throw ParseError(line_, "field '" + field + "': " + reason);
  }

  const json& member(const json& obj, const char* key, const std::string& path) const {
    if (!obj.is_object()) fail(path, "expected an object");
    const auto it = obj.find(key);
    if (it == obj.end()) fail(path.empty() ? key : path + "." + key, "missing");
    return *it;
  }

  double number(const json& v, const std::string& field) const {
    if (!v.is_number()) fail(field, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(field, "not finite");
    return x;
  }

  std::int64_t integer(const json& v, const std::string& field) const {
    if (!v.is_number_integer()) fail(field, "expected an integer");
    return v.get<std::int64_t>();
  }

  template <std::size_t N>
  std::array<double, N> numbers(const json& v, const std::string& field) const {
    if (!v.is_array() || v.size() != N) fail(field, "expected " + std::to_string(N) + " numbers");
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i) out[i] = number(v[i], field);
    return out;
  }

  Vec3 vec3(const json& v, const std::string& field) const {
    const auto a = numbers<3>(v, field);
    return Vec3(a[0], a[1], a[2]);
  }

 private:
  std::size_t line_;
};

std::string csv_row(std::initializer_list<std::string> cells) {
  std::string row;
  bool first = true;
  for (const std::string& c : cells) {
    if (!first) row += ',';
    row += c;
    first = false;
  }
  row += '\n';
  return row;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double to_double(const std::string& s, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw ParseError(line, "not a number: '" + s + "'");
  return v;
}

std::int64_t to_int(const std::string& s, std::size_t line) {
  std::size_t used = 0;
  std::int64_t v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw ParseError(line, "not an integer: '" + s + "'");
  return v;
}

std::vector<std::vector<std::string>> read_csv(std::istream& in, std::string_view header,
                                               std::size_t columns) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "missing CSV header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) throw ParseError(1, "unexpected CSV header '" + line + "'");
  std::vector<std::vector<std::string>> rows;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv(line);
    if (cells.size() != columns) {
      throw ParseError(number, "expected " + std::to_string(columns) + " columns, got " +
                                   std::to_string(cells.size()));
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string write_frame_record(const Frame& frame) {
  std::string out;
  out.reserve(256 + 160 * frame.features.size());
  out += "{\"frame\":" + std::to_string(frame.index);
  const Eigen::Quaterniond& q = frame.pose.orientation();
  out += ",\"pose\":{\"q\":";
  append_vec(out, std::array<double, 4>{q.w(), q.x(), q.y(), q.z()});
  out += ",\"center\":";
  append_vec3(out, frame.pose.center());
  const CameraIntrinsics& K = frame.intrinsics;
  out += "},\"intrinsics\":{\"fx\":" + format_double(K.fx) + ",\"fy\":" + format_double(K.fy) +
         ",\"cx\":" + format_double(K.cx) + ",\"cy\":" + format_double(K.cy) +
         ",\"width\":" + std::to_string(K.width) + ",\"height\":" + std::to_string(K.height) + "}";
  out += ",\"vertical\":";
  append_vec3(out, frame.vertical.vec());
  out += ",\"features\":[";
  for (std::size_t i = 0; i < frame.features.size(); ++i) {
    const FeatureEstimate& f = frame.features[i];
    if (i) out += ',';
    out += "{\"id\":" + std::to_string(f.id) + ",\"mean\":";
    append_vec3(out, f.mean);
    out += ",\"cov\":";
    const Mat3& P = f.covariance;
    append_vec(out, std::array<double, 6>{P(0, 0), P(0, 1), P(0, 2), P(1, 1), P(1, 2), P(2, 2)});
    out += '}';
  }
  out += "],\"detections\":[";
  for (std::size_t i = 0; i < frame.detections.size(); ++i) {
    const DetectionBox& d = frame.detections[i];
    if (i) out += ',';
    out += "{\"class_id\":" + std::to_string(d.class_id) + ",\"rect\":";
    append_vec(out, std::array<double, 4>{d.rect.u_min, d.rect.v_min, d.rect.u_max, d.rect.v_max});
    out += '}';
  }
  out += "]}";
  return out;
}

Frame parse_frame_record(std::string_view line, std::size_t line_number) {
  const FieldReader r(line_number);
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(line_number, std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) r.fail("", "expected a JSON object");

  Frame frame;
  frame.index = r.integer(r.member(doc, "frame", ""), "frame");

  const json& pose = r.member(doc, "pose", "");
  const auto q = r.numbers<4>(r.member(pose, "q", "pose"), "pose.q");
  const Vec3 center = r.vec3(r.member(pose, "center", "pose"), "pose.center");
  try {
    frame.pose = CameraPose(Eigen::Quaterniond(q[0], q[1], q[2], q[3]), center);
  } catch (const Error& e) {
    r.fail("pose", e.what());
  }

  const json& K = r.member(doc, "intrinsics", "");
  frame.intrinsics.fx = r.number(r.member(K, "fx", "intrinsics"), "intrinsics.fx");
  frame.intrinsics.fy = r.number(r.member(K, "fy", "intrinsics"), "intrinsics.fy");
  frame.intrinsics.cx = r.number(r.member(K, "cx", "intrinsics"), "intrinsics.cx");
  frame.intrinsics.cy = r.number(r.member(K, "cy", "intrinsics"), "intrinsics.cy");
  if (K.contains("width")) frame.intrinsics.width = static_cast<int>(r.integer(K["width"], "intrinsics.width"));
  if (K.contains("height")) frame.intrinsics.height = static_cast<int>(r.integer(K["height"], "intrinsics.height"));
  try {
    frame.intrinsics.validate();
  } catch (const Error& e) {
    r.fail("intrinsics", e.what());
  }

  try {
    frame.vertical = VerticalDirection(r.vec3(r.member(doc, "vertical", ""), "vertical"));
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    r.fail("vertical", e.what());
  }

  const json& features = r.member(doc, "features", "");
  if (!features.is_array()) r.fail("features", "expected an array");
  for (std::size_t i = 0; i < features.size(); ++i) {
    const std::string path = "features[" + std::to_string(i) + "]";
    const json& f = features[i];
    FeatureEstimate feat;
    feat.id = r.integer(r.member(f, "id", path), path + ".id");
    feat.mean = r.vec3(r.member(f, "mean", path), path + ".mean");
    const auto c = r.numbers<6>(r.member(f, "cov", path), path + ".cov");
    feat.covariance << c[0], c[1], c[2], c[1], c[3], c[4], c[2], c[4], c[5];
    const Eigen::SelfAdjointEigenSolver<Mat3> eig(feat.covariance, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-12) r.fail(path + ".cov", "covariance is not positive semidefinite");
    frame.features.push_back(feat);
  }

  const json& detections = r.member(doc, "detections", "");
  if (!detections.is_array()) r.fail("detections", "expected an array");
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const std::string path = "detections[" + std::to_string(i) + "]";
    const json& d = detections[i];
    DetectionBox det;
    det.class_id = static_cast<int>(r.integer(r.member(d, "class_id", path), path + ".class_id"));
    const auto rect = r.numbers<4>(r.member(d, "rect", path), path + ".rect");
    det.rect = PixelRect{rect[0], rect[1], rect[2], rect[3]};
    if (!(det.rect.u_min < det.rect.u_max)) r.fail(path + ".rect", "u_min must be below u_max");
    if (!(det.rect.v_min < det.rect.v_max)) r.fail(path + ".rect", "v_min must be below v_max");
    frame.detections.push_back(det);
  }
  return frame;
}

std::optional<Frame> FrameStreamReader::next() {
  std::string line;
  while (std::getline(*in_, line)) {
    ++line_;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Frame frame = parse_frame_record(line, line_);
    if (last_index_ && frame.index <= *last_index_) {
      throw Error(ErrorCode::NonMonotonicFrame, "line " + std::to_string(line_) + ": frame " +
                                                    std::to_string(frame.index) + " follows frame " +
                                                    std::to_string(*last_index_));
    }
    last_index_ = frame.index;
    return frame;
  }
  return std::nullopt;
}

std::vector<Frame> parse_frame_stream(std::istream& in) {
  FrameStreamReader reader(in);
  std::vector<Frame> frames;
  while (auto frame = reader.next()) frames.push_back(std::move(*frame));
  return frames;
}

void write_frame_stream(std::ostream& out, std::span<const Frame> frames) {
  for (const Frame& f : frames) out << write_frame_record(f) << '\n';
}

const TruthFrame& GroundTruth::at_frame(std::int64_t frame) const {
  if (frame >= 0 && static_cast<std::size_t>(frame) < frames.size() && frames[frame].frame == frame) {
    return frames[frame];
  }
  for (const TruthFrame& f : frames) {
    if (f.frame == frame) return f;
  }
  throw Error(ErrorCode::InvalidArgument, "ground truth has no frame " + std::to_string(frame));
}

GroundTruth make_truth(const SimScene& scene) {
  GroundTruth truth;
  truth.d_star = scene.d_star;
  truth.vertical = scene.vertical.vec();
  for (const SceneObject& o : scene.objects) {
    truth.objects.push_back(TruthObject{o.class_id, o.height_m, o.radius_m, o.base});
  }
  truth.markers_metric = scene.markers_metric;
  truth.markers_map = scene.markers_map;
  for (std::size_t k = 0; k < scene.trajectory.size(); ++k) {
    TruthFrame f;
    f.frame = static_cast<std::int64_t>(k);
    f.center_map = scene.trajectory[k].center();
    for (std::size_t i = 0; i < kMarkerCount; ++i) f.ranges[i] = true_range(scene, f.frame, i);
    truth.frames.push_back(f);
  }
  return truth;
}

std::string write_truth(const GroundTruth& truth) {
  auto vec = [](const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); };
  json objects = json::array();
  for (const TruthObject& o : truth.objects) {
    objects.push_back({{"class_id", o.class_id}, {"height_m", o.height_m}, {"radius_m", o.radius_m},
                       {"base", vec(o.base)}});
  }
  json markers = json::array();
  for (std::size_t i = 0; i < kMarkerCount; ++i) {
    markers.push_back({{"metric", vec(truth.markers_metric[i])}, {"map", vec(truth.markers_map[i])}});
  }
  json frames = json::array();
  for (const TruthFrame& f : truth.frames) {
    frames.push_back({{"frame", f.frame}, {"center_map", vec(f.center_map)},
                      {"ranges", json::array({f.ranges[0], f.ranges[1], f.ranges[2], f.ranges[3]})}});
  }
  json doc{{"d_star", truth.d_star}, {"vertical", vec(truth.vertical)}, {"objects", objects},
           {"markers", markers},     {"frames", frames}};
  return doc.dump(1) + "\n";
}

GroundTruth parse_truth(std::string_view document) {
  const FieldReader r(1);
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ParseError(1, std::string("truth document is not valid JSON: ") + e.what());
  }
  GroundTruth truth;
  truth.d_star = r.number(r.member(doc, "d_star", ""), "d_star");
  truth.vertical = r.vec3(r.member(doc, "vertical", ""), "vertical");
  for (const json& o : r.member(doc, "objects", "")) {
    truth.objects.push_back(TruthObject{static_cast<int>(r.integer(r.member(o, "class_id", "objects"), "class_id")),
                                        r.number(r.member(o, "height_m", "objects"), "height_m"),
                                        r.number(r.member(o, "radius_m", "objects"), "radius_m"),
                                        r.vec3(r.member(o, "base", "objects"), "base")});
  }
  const json& markers = r.member(doc, "markers", "");
  if (!markers.is_array() || markers.size() != kMarkerCount) r.fail("markers", "expected 4 markers");
  for (std::size_t i = 0; i < kMarkerCount; ++i) {
    truth.markers_metric[i] = r.vec3(r.member(markers[i], "metric", "markers"), "markers.metric");
    truth.markers_map[i] = r.vec3(r.member(markers[i], "map", "markers"), "markers.map");
  }
  for (const json& f : r.member(doc, "frames", "")) {
    TruthFrame tf;
    tf.frame = r.integer(r.member(f, "frame", "frames"), "frames.frame");
    tf.center_map = r.vec3(r.member(f, "center_map", "frames"), "frames.center_map");
    tf.ranges = r.numbers<kMarkerCount>(r.member(f, "ranges", "frames"), "frames.ranges");
    truth.frames.push_back(tf);
  }
  return truth;
}

void write_posterior_trace(std::ostream& out, std::span<const UpdateRecord> updates) {
  out << kPosteriorTraceHeader << '\n';
  for (const UpdateRecord& u : updates) {
    out << csv_row({std::to_string(u.update), std::to_string(u.posterior.frame),
                    format_double(u.posterior.map_d), format_double(u.posterior.mean_d),
                    format_double(u.posterior.variance_d), format_double(u.posterior.entropy)});
  }
}

void write_local_trace(std::ostream& out, std::span<const UpdateRecord> updates) {
  out << kLocalTraceHeader << '\n';
  for (const UpdateRecord& u : updates) {
    out << csv_row({std::to_string(u.update), std::to_string(u.local.frame),
                    std::to_string(u.local.feature_id), std::to_string(u.local.class_id),
                    format_double(u.local.D), format_double(u.local.sigma_D),
                    format_double(u.local.d_local)});
  }
}

std::vector<UpdateRecord> parse_traces(std::istream& posterior, std::istream& local) {
  const auto post_rows = read_csv(posterior, kPosteriorTraceHeader, 6);
  const auto local_rows = read_csv(local, kLocalTraceHeader, 7);
  std::map<std::int64_t, UpdateRecord> by_update;
  for (std::size_t i = 0; i < post_rows.size(); ++i) {
    const auto& c = post_rows[i];
    const std::size_t line = i + 2;
    UpdateRecord rec;
    rec.update = static_cast<std::size_t>(to_int(c[0], line));
    rec.posterior.frame = to_int(c[1], line);
    rec.posterior.map_d = to_double(c[2], line);
    rec.posterior.mean_d = to_double(c[3], line);
    rec.posterior.variance_d = to_double(c[4], line);
    rec.posterior.entropy = to_double(c[5], line);
    rec.posterior.update_count = rec.update;
    by_update[static_cast<std::int64_t>(rec.update)] = rec;
  }
  for (std::size_t i = 0; i < local_rows.size(); ++i) {
    const auto& c = local_rows[i];
    const std::size_t line = i + 2;
    const std::int64_t update = to_int(c[0], line);
    const auto it = by_update.find(update);
    if (it == by_update.end()) {
      throw ParseError(line, "local trace update " + std::to_string(update) + " has no posterior row");
    }
    LocalEstimate& l = it->second.local;
    l.frame = to_int(c[1], line);
    l.feature_id = to_int(c[2], line);
    l.class_id = static_cast<int>(to_int(c[3], line));
    l.D = to_double(c[4], line);
    l.sigma_D = to_double(c[5], line);
    l.d_local = to_double(c[6], line);
  }
  std::vector<UpdateRecord> out;
  out.reserve(by_update.size());
  for (auto& [update, rec] : by_update) out.push_back(rec);
  return out;
}

void write_error_csv(std::ostream& out, std::span<const EvaluatedUpdate> rows) {
  out << kErrorCsvHeader << '\n';
  for (const EvaluatedUpdate& r : rows) {
    const ErrorSample& s = r.estimate;
    out << csv_row({std::to_string(s.update), std::to_string(s.frame), format_double(s.d_used),
                    format_double(r.d_local), format_double(s.e[0]), format_double(s.e[1]),
                    format_double(s.e[2]), format_double(s.e[3]), format_double(s.epsilon),
                    format_double(s.delta[0]), format_double(s.delta[1]), format_double(s.delta[2]),
                    format_double(s.delta[3]), format_double(s.Delta), format_double(r.Delta_baseline)});
  }
}

}  // namespace scalesense
