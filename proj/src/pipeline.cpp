#include "scalesense/pipeline.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "scalesense/error.hpp"

namespace scalesense {

namespace {

using nlohmann::json;

constexpr double kConvergedPct = 3.0;

[[noreturn]] void invalid(const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); }

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) invalid(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) invalid("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    invalid(where + "." + key + " has the wrong type");
  }
}

Vec3 read_vec3(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3) invalid(where + " must be an array of 3 numbers");
  try {
    return Vec3(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
  } catch (const json::exception&) {
    invalid(where + " must hold numbers");
  }
}

Eigen::Vector2d read_vec2(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2) invalid(where + " must be an array of 2 numbers");
  try {
    return Eigen::Vector2d(v[0].get<double>(), v[1].get<double>());
  } catch (const json::exception&) {
    invalid(where + " must hold numbers");
  }
}

SceneConfig parse_scene(const json& s) {
  check_keys(s, "scene",
             {"preset", "d_star", "vertical", "objects", "placement_radius_m", "min_separation_m",
              "min_visible_fraction", "occlusion_overlap", "trajectory", "markers", "camera"});
  SceneConfig scene;
  if (s.contains("preset")) {
    if (!s["preset"].is_string()) invalid("scene.preset must be a string");
    scene = preset_scene(s["preset"].get<std::string>());
  } else if (!s.contains("objects")) {
    invalid("scene needs a preset or an objects list");
  }
  read(s, "d_star", scene.d_star, "scene");
  if (s.contains("vertical")) scene.vertical = read_vec3(s["vertical"], "scene.vertical");
  read(s, "placement_radius_m", scene.placement_radius_m, "scene");
  read(s, "min_separation_m", scene.min_separation_m, "scene");
  read(s, "min_visible_fraction", scene.min_visible_fraction, "scene");
  read(s, "occlusion_overlap", scene.occlusion_overlap, "scene");

  if (s.contains("objects")) {
    if (!s["objects"].is_array()) invalid("scene.objects must be an array");
    scene.objects.clear();
    for (const json& o : s["objects"]) {
      check_keys(o, "scene.objects[]", {"class_id", "height_m", "radius_m", "position", "features", "outliers"});
      ObjectSpec spec;
      read(o, "class_id", spec.class_id, "object");
      read(o, "height_m", spec.height_m, "object");
      read(o, "radius_m", spec.radius_m, "object");
      read(o, "features", spec.features, "object");
      read(o, "outliers", spec.outliers, "object");
      if (o.contains("position")) spec.ground_position = read_vec2(o["position"], "object.position");
      scene.objects.push_back(spec);
    }
  }
  if (s.contains("trajectory")) {
    const json& t = s["trajectory"];
    check_keys(t, "scene.trajectory",
               {"kind", "frames", "radius_m", "height_m", "target_height_m", "arc_deg", "sweeps", "wobble_deg"});
    TrajectoryConfig& tc = scene.trajectory;
    if (t.contains("kind")) {
      const std::string kind = t["kind"].is_string() ? t["kind"].get<std::string>() : "";
      if (kind == "arc") tc.kind = TrajectoryKind::Arc;
      else if (kind == "orbit") tc.kind = TrajectoryKind::Orbit;
      else invalid("scene.trajectory.kind must be \"arc\" or \"orbit\"");
    }
    read(t, "frames", tc.frames, "trajectory");
    read(t, "radius_m", tc.radius_m, "trajectory");
    read(t, "height_m", tc.height_m, "trajectory");
    read(t, "target_height_m", tc.target_height_m, "trajectory");
    read(t, "arc_deg", tc.arc_deg, "trajectory");
    read(t, "sweeps", tc.sweeps, "trajectory");
    read(t, "wobble_deg", tc.wobble_deg, "trajectory");
  }
  if (s.contains("markers")) {
    const json& m = s["markers"];
    check_keys(m, "scene.markers", {"center", "size_m"});
    if (m.contains("center")) scene.markers.ground_center = read_vec2(m["center"], "markers.center");
    read(m, "size_m", scene.markers.size_m, "markers");
  }
  if (s.contains("camera")) {
    const json& c = s["camera"];
    check_keys(c, "scene.camera", {"fx", "fy", "cx", "cy", "width", "height"});
    read(c, "fx", scene.camera.fx, "camera");
    read(c, "fy", scene.camera.fy, "camera");
    read(c, "cx", scene.camera.cx, "camera");
    read(c, "cy", scene.camera.cy, "camera");
    read(c, "width", scene.camera.width, "camera");
    read(c, "height", scene.camera.height, "camera");
  }
  return scene;
}

NoiseConfig parse_noise(const json& n) {
  check_keys(n, "noise",
             {"preset", "feature_sigma", "box_jitter_px", "cov_scale", "initial_sigma_factor", "decay_frames"});
  NoiseConfig noise;
  if (n.contains("preset")) {
    if (!n["preset"].is_string()) invalid("noise.preset must be a string");
    noise = preset_noise(n["preset"].get<std::string>());
  }
  read(n, "feature_sigma", noise.feature_sigma, "noise");
  read(n, "box_jitter_px", noise.box_jitter_px, "noise");
  read(n, "cov_scale", noise.cov_scale, "noise");
  read(n, "initial_sigma_factor", noise.initial_sigma_factor, "noise");
  read(n, "decay_frames", noise.decay_frames, "noise");
  return noise;
}

}  // namespace

void RunConfig::validate() const {
  scene.validate();
  noise.validate();
  if (cadence < 1) invalid("estimator.cadence must be at least 1");
  if (detect_every < 1) invalid("detect_every must be at least 1");
  if (!(grid.d_min > 0.0) || !(grid.d_min < grid.d_max)) invalid("estimator needs 0 < d_min < d_max");
  if (grid.n_bins < 2) invalid("estimator.n_bins must be at least 2");
  if (!(estimator.geometry.sigma_min > 0.0)) invalid("estimator.sigma_min must be positive");
  if (!(estimator.geometry.inward_margin_px >= 0.0)) invalid("estimator.inward_margin_px must be non-negative");
  if (estimator.sigma_gate && !(*estimator.sigma_gate > 0.0)) invalid("estimator.sigma_gate must be positive");
  if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0)) invalid("burn_in_fraction must lie in [0, 1)");
}

RunConfig parse_run_config(std::string_view document, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    invalid(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(doc, "config", {"seed", "scene", "noise", "detect_every", "estimator", "priors", "burn_in_fraction"});

  RunConfig config;
  read(doc, "seed", config.seed, "config");
  read(doc, "detect_every", config.detect_every, "config");
  read(doc, "burn_in_fraction", config.burn_in_fraction, "config");
  if (doc.contains("scene")) config.scene = parse_scene(doc["scene"]);
  if (doc.contains("noise")) config.noise = parse_noise(doc["noise"]);
  if (doc.contains("estimator")) {
    const json& e = doc["estimator"];
    check_keys(e, "estimator",
               {"d_min", "d_max", "n_bins", "spacing", "cadence", "sigma_min", "inward_margin_px", "sigma_gate"});
    read(e, "d_min", config.grid.d_min, "estimator");
    read(e, "d_max", config.grid.d_max, "estimator");
    read(e, "n_bins", config.grid.n_bins, "estimator");
    if (e.contains("spacing")) {
      const std::string spacing = e["spacing"].is_string() ? e["spacing"].get<std::string>() : "";
      if (spacing == "log") config.grid.spacing = GridSpacing::Logarithmic;
      else if (spacing == "linear") config.grid.spacing = GridSpacing::Linear;
      else invalid("estimator.spacing must be \"log\" or \"linear\"");
    }
    read(e, "cadence", config.cadence, "estimator");
    read(e, "sigma_min", config.estimator.geometry.sigma_min, "estimator");
    read(e, "inward_margin_px", config.estimator.geometry.inward_margin_px, "estimator");
    if (e.contains("sigma_gate") && !e["sigma_gate"].is_null()) {
      double gate = 0.0;
      read(e, "sigma_gate", gate, "estimator");
      config.estimator.sigma_gate = gate;
    }
  }
  if (doc.contains("priors")) {
    if (!doc["priors"].is_string()) invalid("priors must be a path string");
    std::filesystem::path p = doc["priors"].get<std::string>();
    config.priors = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  }
  config.validate();
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str(), path.parent_path());
}

void apply_environment(RunConfig& config) {
  const char* seed = std::getenv("SCALESENSE_SEED");
  if (seed == nullptr || *seed == '\0') return;
  char* end = nullptr;
  const unsigned long long value = std::strtoull(seed, &end, 10);
  if (end == nullptr || *end != '\0') invalid(std::string("SCALESENSE_SEED is not an integer: ") + seed);
  config.seed = value;
}

std::string_view run_config_schema() {
  return R"(Run configuration (JSON):
{
  "seed": <uint>,                       // overridden by SCALESENSE_SEED, then --seed
  "priors": "<path to prior file>",     // relative to the config file
  "burn_in_fraction": 0.35,
  "detect_every": 1,                    // simulator detection frames
  "scene": {"preset": "exp1|exp2|exp3|noiseless", "d_star": 2.0, "vertical": [0,0,1],
            "objects": [{"class_id": 0, "height_m": 0.3, "radius_m": 0.035,
                         "position": [x, y], "features": 3, "outliers": 0}],
            "trajectory": {"kind": "arc|orbit", "frames": 900, "radius_m": 1.0, "height_m": 0.18,
                           "target_height_m": 0.15, "arc_deg": 80, "sweeps": 2, "wobble_deg": 1},
            "markers": {"center": [x, y], "size_m": 0.2},
            "camera": {"fx": 525, "fy": 525, "cx": 320, "cy": 240, "width": 640, "height": 480}},
  "noise": {"preset": "...", "feature_sigma": 0.02, "box_jitter_px": 1, "cov_scale": 1,
            "initial_sigma_factor": 1, "decay_frames": 0},
  "estimator": {"d_min": 0.05, "d_max": 20, "n_bins": 4096, "spacing": "log|linear",
                "cadence": 10, "sigma_min": 1e-4, "inward_margin_px": 1, "sigma_gate": null}
}
Prior file (JSON): {"classes": [{"id": 0, "name": "bottle", "bins": [{"height_m": 0.3, "prob": 1.0}]}]}
)";
}

SimulationOutput simulate(const RunConfig& config) {
  SimulationOutput out;
  out.scene = generate_scene(config.scene, config.seed);
  const auto n = static_cast<std::int64_t>(out.scene.trajectory.size());
  out.frames.reserve(static_cast<std::size_t>(n));
  for (std::int64_t k = 0; k < n; ++k) {
    out.frames.push_back(render_frame(out.scene, k, config.noise, k % config.detect_every == 0));
  }
  out.truth = make_truth(out.scene);
  return out;
}

EstimateOutput run_estimate(const RunConfig& config, const FrameSource& next_frame,
                            const PriorRegistry& priors) {
  ScaleEstimator estimator(
      ScaleGrid::uniform(config.grid.d_min, config.grid.d_max, config.grid.n_bins, config.grid.spacing),
      priors, config.estimator);
  EstimateOutput out;
  out.initial = estimator.current(0);
  out.final_snapshot = out.initial;
  while (std::optional<Frame> frame = next_frame()) {
    ++out.frames_read;
    if (frame->index % config.cadence != 0) continue;
    out.consumed_frames.push_back(frame->index);
    FrameResult result = estimator.process_frame(*frame);
    out.final_snapshot = result.snapshot;
    out.updates.insert(out.updates.end(), result.updates.begin(), result.updates.end());
  }
  out.diagnostics = estimator.diagnostics();
  return out;
}

EstimateOutput run_estimate(const RunConfig& config, std::span<const Frame> frames,
                            const PriorRegistry& priors) {
  std::size_t i = 0;
  return run_estimate(
      config,
      [&]() -> std::optional<Frame> {
        if (i == frames.size()) return std::nullopt;
        return frames[i++];
      },
      priors);
}

EvaluateOutput run_evaluate(std::span<const UpdateRecord> updates, const GroundTruth& truth,
                            double burn_in_fraction) {
  EvaluateOutput out;
  std::vector<ErrorSample> samples;
  for (const UpdateRecord& u : updates) {
    const TruthFrame& tf = truth.at_frame(u.posterior.frame);
    EvaluatedUpdate row;
    row.estimate = marker_errors(u.posterior.map_d, truth.markers_map, tf.center_map, tf.ranges);
    row.estimate.update = u.update;
    row.estimate.frame = u.posterior.frame;
    row.d_local = u.local.d_local;
    row.Delta_baseline = marker_errors(1.0, truth.markers_map, tf.center_map, tf.ranges).Delta;
    samples.push_back(row.estimate);
    out.rows.push_back(row);
  }
  out.burn_in = burn_in_from_fraction(samples, burn_in_fraction);
  if (!samples.empty()) {
    out.report = convergence_report(samples, out.burn_in);
    out.converged_at = updates_to_converge(samples, kConvergedPct);
  }
  return out;
}

std::string format_report(const EstimateOutput* estimate, const EvaluateOutput& evaluation,
                          const GroundTruth& truth) {
  std::ostringstream os;
  os << "true scale d*            : " << format_double(truth.d_star) << '\n';
  if (estimate != nullptr) {
    const Diagnostics& d = estimate->diagnostics;
    os << "frames read / consumed   : " << estimate->frames_read << " / " << estimate->consumed_frames.size() << '\n';
    os << "posterior updates        : " << estimate->updates.size() << '\n';
    os << "candidate pairs          : " << d.candidate_pairs << '\n';
    os << "dropped observations     : " << d.dropped_total();
    for (const auto& [code, count] : d.dropped) os << "  " << to_string(code) << "=" << count;
    os << '\n';
    os << "unknown-class detections : " << d.unknown_class << '\n';
    os << "gated / degenerate       : " << d.gated << " / " << d.degenerate_updates << '\n';
    os << "final MAP d              : " << format_double(estimate->final_snapshot.map_d) << '\n';
    os << "final posterior mean/std : " << format_double(estimate->final_snapshot.mean_d) << " / "
       << format_double(std::sqrt(estimate->final_snapshot.variance_d)) << '\n';
  }
  if (!evaluation.rows.empty()) {
    const double final_d = evaluation.rows.back().estimate.d_used;
    os << "final relative scale err : " << format_double(100.0 * std::abs(final_d - truth.d_star) / truth.d_star)
       << " %\n";
  }
  os << "burn-in update           : " << evaluation.burn_in << '\n';
  if (evaluation.report) {
    const ConvergenceReport& r = *evaluation.report;
    os << "samples after burn-in    : " << r.samples << '\n';
    os << "median abs error (m)     : " << format_double(r.median_abs) << "  std " << format_double(r.std_abs) << '\n';
    os << "median rel error (%)     : " << format_double(r.median_rel) << "  std " << format_double(r.std_rel) << '\n';
  } else {
    os << "no updates to evaluate\n";
  }
  if (evaluation.converged_at) {
    os << "Delta <= 3 % from update : " << *evaluation.converged_at << '\n';
  } else if (!evaluation.rows.empty()) {
    os << "Delta <= 3 % from update : never\n";
  }
  return os.str();
}

}  // namespace scalesense
