#include <sstream>
#include <string>

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "scalesense/error.hpp"
#include "scalesense/pipeline.hpp"

namespace py = pybind11;
using namespace scalesense;

namespace {

py::dict snapshot_dict(const PosteriorSnapshot& s) {
  py::dict d;
  d["frame"] = s.frame;
  d["map_d"] = s.map_d;
  d["mean_d"] = s.mean_d;
  d["variance_d"] = s.variance_d;
  d["entropy"] = s.entropy;
  d["update_count"] = s.update_count;
  return d;
}

py::dict report_dict(const ConvergenceReport& r) {
  py::dict d;
  d["burn_in"] = r.burn_in;
  d["samples"] = r.samples;
  d["median_abs"] = r.median_abs;
  d["std_abs"] = r.std_abs;
  d["median_rel"] = r.median_rel;
  d["std_rel"] = r.std_rel;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Metric scale estimation for monocular SLAM maps";

  static py::exception<Error> error_type(m, "ScaleSenseError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type.ptr())(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  // Geometry ---------------------------------------------------------------
  py::class_<CameraIntrinsics>(m, "CameraIntrinsics")
      .def(py::init([](double fx, double fy, double cx, double cy, int width, int height) {
             CameraIntrinsics K{fx, fy, cx, cy, width, height};
             K.validate();
             return K;
           }),
           py::arg("fx"), py::arg("fy"), py::arg("cx"), py::arg("cy"), py::arg("width") = 0, py::arg("height") = 0)
      .def_readonly("fx", &CameraIntrinsics::fx)
      .def_readonly("fy", &CameraIntrinsics::fy)
      .def_readonly("cx", &CameraIntrinsics::cx)
      .def_readonly("cy", &CameraIntrinsics::cy)
      .def_readonly("width", &CameraIntrinsics::width)
      .def_readonly("height", &CameraIntrinsics::height)
      .def("matrix", &CameraIntrinsics::matrix);

  py::class_<CameraPose>(m, "CameraPose")
      .def(py::init<>())
      .def(py::init([](const Eigen::Vector4d& wxyz, const Vec3& center) {
             return CameraPose(Eigen::Quaterniond(wxyz[0], wxyz[1], wxyz[2], wxyz[3]), center);
           }),
           py::arg("quaternion_wxyz"), py::arg("center"))
      .def_static("from_rotation", &CameraPose::from_rotation, py::arg("rotation"), py::arg("center"))
      .def_property_readonly("rotation", &CameraPose::rotation)
      .def_property_readonly("center", &CameraPose::center)
      .def_property_readonly("quaternion_wxyz", [](const CameraPose& p) {
        const Eigen::Quaterniond& q = p.orientation();
        return Eigen::Vector4d(q.w(), q.x(), q.y(), q.z());
      });

  py::class_<VerticalDirection>(m, "VerticalDirection")
      .def(py::init<>())
      .def(py::init<const Vec3&>())
      .def_property_readonly("vec", &VerticalDirection::vec);

  py::class_<PixelRect>(m, "PixelRect")
      .def(py::init<double, double, double, double>(), py::arg("u_min"), py::arg("v_min"), py::arg("u_max"),
           py::arg("v_max"))
      .def_readwrite("u_min", &PixelRect::u_min)
      .def_readwrite("v_min", &PixelRect::v_min)
      .def_readwrite("u_max", &PixelRect::u_max)
      .def_readwrite("v_max", &PixelRect::v_max);

  py::class_<DetectionBox>(m, "DetectionBox")
      .def(py::init<PixelRect, int>(), py::arg("rect"), py::arg("class_id") = 0)
      .def_readwrite("rect", &DetectionBox::rect)
      .def_readwrite("class_id", &DetectionBox::class_id);

  py::class_<FeatureEstimate>(m, "FeatureEstimate")
      .def(py::init<std::int64_t, Point3, Mat3>(), py::arg("id"), py::arg("mean"), py::arg("covariance"))
      .def_readwrite("id", &FeatureEstimate::id)
      .def_readwrite("mean", &FeatureEstimate::mean)
      .def_readwrite("covariance", &FeatureEstimate::covariance);

  py::class_<HeightObservation>(m, "HeightObservation")
      .def(py::init([](double D, double sigma_D, int class_id) {
             HeightObservation o;
             o.D = D;
             o.sigma_D = sigma_D;
             o.class_id = class_id;
             return o;
           }),
           py::arg("D"), py::arg("sigma_D"), py::arg("class_id") = 0)
      .def_readonly("D", &HeightObservation::D)
      .def_readonly("sigma_D", &HeightObservation::sigma_D)
      .def_readonly("class_id", &HeightObservation::class_id)
      .def_readonly("frame", &HeightObservation::frame)
      .def_readonly("feature_id", &HeightObservation::feature_id);

  m.def(
      "project",
      [](const Point3& p, const CameraPose& pose, const CameraIntrinsics& K) {
        const PixelPoint px = project(p, pose, K);
        return py::make_tuple(px.u, px.v);
      },
      py::arg("point"), py::arg("pose"), py::arg("intrinsics"));
  m.def(
      "back_project",
      [](double u, double v, const CameraPose& pose, const CameraIntrinsics& K) {
        const Ray3 r = back_project(PixelPoint{u, v}, pose, K);
        return py::make_tuple(r.origin, r.direction);
      },
      py::arg("u"), py::arg("v"), py::arg("pose"), py::arg("intrinsics"));
  m.def("vertical_vanishing_point", &vertical_vanishing_point, py::arg("pose"), py::arg("intrinsics"),
        py::arg("vertical"));
  m.def(
      "dimensionless_height",
      [](const Point3& top, const Point3& bottom) { return dimensionless_height(ExtremityPair{top, bottom}); },
      py::arg("top"), py::arg("bottom"));
  m.def(
      "height_sigma",
      [](const Point3& top, const Point3& bottom, const Mat3& P) {
        return height_sigma(ExtremityPair{top, bottom}, P);
      },
      py::arg("top"), py::arg("bottom"), py::arg("covariance"));
  m.def(
      "make_observation",
      [](const FeatureEstimate& f, const DetectionBox& det, const CameraPose& pose, const CameraIntrinsics& K,
         const VerticalDirection& v, std::int64_t frame) { return make_observation(f, det, pose, K, v, frame); },
      py::arg("feature"), py::arg("detection"), py::arg("pose"), py::arg("intrinsics"), py::arg("vertical"),
      py::arg("frame") = 0);

  // Priors -----------------------------------------------------------------
  py::class_<PriorRegistry>(m, "PriorRegistry")
      .def("__len__", &PriorRegistry::size)
      .def("class_ids",
           [](const PriorRegistry& r) {
             std::vector<int> ids;
             for (const auto& [id, hist] : r.classes()) ids.push_back(id);
             return ids;
           })
      .def("bins", [](const PriorRegistry& r, int class_id) {
        std::vector<std::pair<double, double>> out;
        for (const HeightBin& b : r.lookup(class_id).bins) out.emplace_back(b.height_m, b.prob);
        return out;
      });
  m.def("load_priors", [](const std::string& doc) { return load_priors(doc); }, py::arg("document"));
  m.def("load_priors_file", &load_priors_file, py::arg("path"));

  // Inference --------------------------------------------------------------
  py::enum_<GridSpacing>(m, "GridSpacing")
      .value("LINEAR", GridSpacing::Linear)
      .value("LOG", GridSpacing::Logarithmic);

  py::class_<ScaleGrid>(m, "ScaleGrid")
      .def_static("uniform", &ScaleGrid::uniform, py::arg("d_min"), py::arg("d_max"), py::arg("n_bins"),
                  py::arg("spacing") = GridSpacing::Logarithmic)
      .def("__len__", &ScaleGrid::size)
      .def_property_readonly("centers", [](const ScaleGrid& g) { return std::vector<double>(g.centers().begin(), g.centers().end()); })
      .def_property_readonly("edges", [](const ScaleGrid& g) { return std::vector<double>(g.edges().begin(), g.edges().end()); })
      .def_property_readonly("log_weights",
                             [](const ScaleGrid& g) {
                               return std::vector<double>(g.log_weights().begin(), g.log_weights().end());
                             })
      .def("masses", &ScaleGrid::masses)
      .def("total_mass", &ScaleGrid::total_mass)
      .def("apply_likelihood", [](ScaleGrid& g, const std::vector<double>& L) { g.apply_likelihood(L); },
           py::arg("likelihood"));

  m.def(
      "observation_likelihood",
      [](const HeightObservation& o, const PriorRegistry& reg, const ScaleGrid& g) {
        return observation_likelihood(o, reg.lookup(o.class_id), g);
      },
      py::arg("observation"), py::arg("priors"), py::arg("grid"));
  m.def("map_estimate", &map_estimate, py::arg("grid"));
  m.def(
      "posterior_stats",
      [](const ScaleGrid& g) {
        const PosteriorStats s = posterior_stats(g);
        return py::make_tuple(s.mean, s.variance, s.entropy);
      },
      py::arg("grid"));

  // Pipeline ---------------------------------------------------------------
  py::class_<RunConfig>(m, "RunConfig")
      .def_readwrite("seed", &RunConfig::seed)
      .def_readwrite("cadence", &RunConfig::cadence)
      .def_readwrite("burn_in_fraction", &RunConfig::burn_in_fraction)
      .def_property(
          "priors", [](const RunConfig& c) { return c.priors.string(); },
          [](RunConfig& c, const std::string& p) { c.priors = p; })
      .def_property_readonly("d_star", [](const RunConfig& c) { return c.scene.d_star; })
      .def_property_readonly("frames", [](const RunConfig& c) { return c.scene.trajectory.frames; });
  m.def("parse_run_config", [](const std::string& doc, const std::string& base_dir) {
    return parse_run_config(doc, base_dir);
  }, py::arg("document"), py::arg("base_dir") = "");
  m.def("load_run_config", &load_run_config, py::arg("path"));
  m.def("run_config_schema", [] { return std::string(run_config_schema()); });

  py::class_<SimulationOutput>(m, "Simulation")
      .def_property_readonly("frame_count", [](const SimulationOutput& s) { return s.frames.size(); })
      .def_property_readonly("d_star", [](const SimulationOutput& s) { return s.truth.d_star; })
      .def("frame_feed",
           [](const SimulationOutput& s) {
             std::ostringstream out;
             write_frame_stream(out, s.frames);
             return out.str();
           })
      .def("truth_json", [](const SimulationOutput& s) { return write_truth(s.truth); });
  m.def("simulate", &simulate, py::arg("config"));

  py::class_<EstimateOutput>(m, "Estimate")
      .def_property_readonly("update_count", [](const EstimateOutput& e) { return e.updates.size(); })
      .def_property_readonly("consumed_frames", [](const EstimateOutput& e) { return e.consumed_frames; })
      .def_property_readonly("initial", [](const EstimateOutput& e) { return snapshot_dict(e.initial); })
      .def_property_readonly("final", [](const EstimateOutput& e) { return snapshot_dict(e.final_snapshot); })
      .def_property_readonly("map_trace",
                             [](const EstimateOutput& e) {
                               std::vector<double> out;
                               for (const UpdateRecord& u : e.updates) out.push_back(u.posterior.map_d);
                               return out;
                             })
      .def_property_readonly("local_trace",
                             [](const EstimateOutput& e) {
                               std::vector<double> out;
                               for (const UpdateRecord& u : e.updates) out.push_back(u.local.d_local);
                               return out;
                             })
      .def("posterior_csv",
           [](const EstimateOutput& e) {
             std::ostringstream out;
             write_posterior_trace(out, e.updates);
             return out.str();
           })
      .def("local_csv", [](const EstimateOutput& e) {
        std::ostringstream out;
        write_local_trace(out, e.updates);
        return out.str();
      });
  m.def(
      "estimate",
      [](const RunConfig& config, const SimulationOutput& sim, const PriorRegistry& priors) {
        return run_estimate(config, sim.frames, priors);
      },
      py::arg("config"), py::arg("simulation"), py::arg("priors"));
  m.def(
      "estimate_feed",
      [](const RunConfig& config, const std::string& feed, const PriorRegistry& priors) {
        std::istringstream in(feed);
        FrameStreamReader reader(in);
        return run_estimate(config, [&] { return reader.next(); }, priors);
      },
      py::arg("config"), py::arg("feed"), py::arg("priors"));

  py::class_<EvaluateOutput>(m, "Evaluation")
      .def_readonly("burn_in", &EvaluateOutput::burn_in)
      .def_readonly("converged_at", &EvaluateOutput::converged_at)
      .def_property_readonly("report",
                             [](const EvaluateOutput& e) -> py::object {
                               if (!e.report) return py::none();
                               return report_dict(*e.report);
                             })
      .def_property_readonly("relative_errors",
                             [](const EvaluateOutput& e) {
                               std::vector<double> out;
                               for (const EvaluatedUpdate& r : e.rows) out.push_back(r.estimate.Delta);
                               return out;
                             })
      .def_property_readonly("baseline_errors",
                             [](const EvaluateOutput& e) {
                               std::vector<double> out;
                               for (const EvaluatedUpdate& r : e.rows) out.push_back(r.Delta_baseline);
                               return out;
                             })
      .def("errors_csv", [](const EvaluateOutput& e) {
        std::ostringstream out;
        write_error_csv(out, e.rows);
        return out.str();
      });
  m.def(
      "evaluate",
      [](const EstimateOutput& est, const SimulationOutput& sim, double burn_in_fraction) {
        return run_evaluate(est.updates, sim.truth, burn_in_fraction);
      },
      py::arg("estimate"), py::arg("simulation"), py::arg("burn_in_fraction") = 0.35);
}
