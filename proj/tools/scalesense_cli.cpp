// Command-line front end: simulate -> estimate -> evaluate.
//
// Exit codes: 0 success, 1 validation failure, 2 I/O failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "scalesense/error.hpp"
#include "scalesense/pipeline.hpp"

namespace fs = std::filesystem;
using namespace scalesense;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

void require_file(const fs::path& path, const char* what) {
  if (path.empty()) throw Error(ErrorCode::InvalidConfig, std::string("no ") + what + " given");
  if (!fs::is_regular_file(path)) {
    throw Error(ErrorCode::InvalidConfig, std::string(what) + " not found: " + path.string());
  }
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  return in;
}

std::string slurp(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

template <typename Writer>
void write_file(const fs::path& path, Writer&& writer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  writer(out);
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

void make_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
}

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
};

RunConfig resolve_config(const CommonArgs& args) {
  RunConfig config;
  if (!args.config.empty()) {
    require_file(args.config, "config file");
    config = load_run_config(args.config);
  }
  apply_environment(config);
  if (args.seed) config.seed = *args.seed;
  return config;
}

PriorRegistry load_configured_priors(const RunConfig& config, const std::string& override_path) {
  const fs::path path = override_path.empty() ? config.priors : fs::path(override_path);
  require_file(path, "prior file");
  return load_priors_file(path);
}

void do_simulate(const RunConfig& config, const fs::path& out_dir) {
  const SimulationOutput sim = simulate(config);
  make_out_dir(out_dir);
  write_file(out_dir / "scene.jsonl", [&](std::ostream& os) { write_frame_stream(os, sim.frames); });
  write_file(out_dir / "truth.json", [&](std::ostream& os) { os << write_truth(sim.truth); });
  std::cout << "wrote " << sim.frames.size() << " frames to " << (out_dir / "scene.jsonl").string()
            << " and ground truth to " << (out_dir / "truth.json").string() << '\n';
}

EstimateOutput do_estimate(const RunConfig& config, const PriorRegistry& priors,
                           const fs::path& frames_path, const fs::path& out_dir) {
  require_file(frames_path, "frame feed");
  std::ifstream in = open_in(frames_path);
  FrameStreamReader reader(in);
  EstimateOutput est = run_estimate(config, [&] { return reader.next(); }, priors);
  make_out_dir(out_dir);
  write_file(out_dir / "posterior_trace.csv", [&](std::ostream& os) { write_posterior_trace(os, est.updates); });
  write_file(out_dir / "local_trace.csv", [&](std::ostream& os) { write_local_trace(os, est.updates); });
  std::cout << "applied " << est.updates.size() << " updates over " << est.consumed_frames.size()
            << " detection frames; final MAP d = " << format_double(est.final_snapshot.map_d)
            << "; dropped " << est.diagnostics.dropped_total() << " observations\n";
  return est;
}

void do_evaluate(const RunConfig& config, const fs::path& trace_dir, const fs::path& truth_path,
                 const fs::path& out_dir, const EstimateOutput* estimate) {
  require_file(truth_path, "truth file");
  require_file(trace_dir / "posterior_trace.csv", "posterior trace");
  require_file(trace_dir / "local_trace.csv", "local trace");
  const GroundTruth truth = parse_truth(slurp(truth_path));
  std::ifstream post = open_in(trace_dir / "posterior_trace.csv");
  std::ifstream local = open_in(trace_dir / "local_trace.csv");
  const std::vector<UpdateRecord> updates = parse_traces(post, local);
  const EvaluateOutput eval = run_evaluate(updates, truth, config.burn_in_fraction);
  make_out_dir(out_dir);
  write_file(out_dir / "errors.csv", [&](std::ostream& os) { write_error_csv(os, eval.rows); });
  const std::string report = format_report(estimate, eval, truth);
  write_file(out_dir / "report.txt", [&](std::ostream& os) { os << report; });
  std::cout << report;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Metric scale estimation for monocular SLAM maps from object detections"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string frames_path, priors_path, truth_path, trace_dir;

  auto add_common = [&](CLI::App* cmd, bool config_required) {
    auto* opt = cmd->add_option("--config", args.config, "run configuration (JSON)");
    if (config_required) opt->required();
    cmd->add_option("--seed", args.seed, "override the configured seed");
    cmd->add_option("--out", args.out, "output directory")->capture_default_str();
  };

  CLI::App* simulate_cmd = app.add_subcommand("simulate", "generate scene.jsonl and truth.json");
  add_common(simulate_cmd, true);

  CLI::App* estimate_cmd = app.add_subcommand("estimate", "run the scale estimator over a frame feed");
  add_common(estimate_cmd, false);
  estimate_cmd->add_option("--frames", frames_path, "frame feed (JSONL)")->required();
  estimate_cmd->add_option("--priors", priors_path, "prior file; defaults to the config's");

  CLI::App* evaluate_cmd = app.add_subcommand("evaluate", "score traces against ground truth");
  add_common(evaluate_cmd, false);
  evaluate_cmd->add_option("--traces", trace_dir, "directory with posterior_trace.csv and local_trace.csv")
      ->required();
  evaluate_cmd->add_option("--truth", truth_path, "ground-truth sidecar")->required();

  CLI::App* run_all_cmd = app.add_subcommand("run-all", "simulate, estimate and evaluate");
  add_common(run_all_cmd, true);
  run_all_cmd->add_option("--priors", priors_path, "prior file; defaults to the config's");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help() << '\n' << run_config_schema();
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code != 0) std::cerr << '\n' << run_config_schema();
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    const RunConfig config = resolve_config(args);
    const fs::path out_dir = args.out;
    if (simulate_cmd->parsed()) {
      do_simulate(config, out_dir);
    } else if (estimate_cmd->parsed()) {
      const PriorRegistry priors = load_configured_priors(config, priors_path);
      do_estimate(config, priors, frames_path, out_dir);
    } else if (evaluate_cmd->parsed()) {
      do_evaluate(config, trace_dir, truth_path, out_dir, nullptr);
    } else if (run_all_cmd->parsed()) {
      const PriorRegistry priors = load_configured_priors(config, priors_path);
      do_simulate(config, out_dir);
      const EstimateOutput est = do_estimate(config, priors, out_dir / "scene.jsonl", out_dir);
      do_evaluate(config, out_dir, out_dir / "truth.json", out_dir, &est);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    if (e.code() == ErrorCode::InvalidConfig) std::cerr << '\n' << run_config_schema();
    return e.code() == ErrorCode::Io ? kExitIo : kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return 0;
}
