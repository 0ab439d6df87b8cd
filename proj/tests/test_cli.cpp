#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Run {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Sandbox {
 public:
  Sandbox() {
    root_ = fs::temp_directory_path() / ("scalesense_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  ~Sandbox() { fs::remove_all(root_); }

  const fs::path& root() const { return root_; }

  fs::path write(const std::string& name, const std::string& text) const {
    const fs::path p = root_ / name;
    std::ofstream(p, std::ios::binary) << text;
    return p;
  }

  Run run(const std::string& args, const std::string& env = "") const {
    const fs::path out = root_ / "stdout.txt", err = root_ / "stderr.txt";
    const std::string cmd = env + " \"" SCALESENSE_CLI_PATH "\" " + args + " > \"" + out.string() + "\" 2> \"" +
                            err.string() + "\"";
    const int status = std::system(cmd.c_str());
    Run r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  // A short Exp-1 run so each invocation stays fast.
  fs::path small_config(const std::string& priors = SCALESENSE_CONFIG_DIR "/priors_exp1.json") const {
    return write("config.json", R"({"seed": 5, "priors": ")" + priors + R"(",
      "scene": {"preset": "exp1", "trajectory": {"frames": 200}}, "noise": {"preset": "exp1"}})");
  }

 private:
  fs::path root_;
  static inline int counter_ = 0;
};

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("run-all writes every artifact") {
  Sandbox box;
  const Run r = box.run("run-all --config \"" + box.small_config().string() + "\" --out \"" +
                        (box.root() / "a").string() + "\"");
  CHECK(r.exit_code == 0);
  for (const char* name : {"scene.jsonl", "truth.json", "posterior_trace.csv", "local_trace.csv", "errors.csv",
                           "report.txt"}) {
    CAPTURE(name);
    CHECK(fs::is_regular_file(box.root() / "a" / name));
  }
  CHECK(slurp(box.root() / "a" / "errors.csv").rfind("update,frame,d_map,d_local,e1", 0) == 0);
  CHECK(r.out.find("median rel error") != std::string::npos);
}

TEST_CASE("same seed and config give byte-identical traces") {
  Sandbox box;
  const std::string config = box.small_config().string();
  REQUIRE(box.run("run-all --config \"" + config + "\" --out \"" + (box.root() / "a").string() + "\"").exit_code == 0);
  REQUIRE(box.run("run-all --config \"" + config + "\" --out \"" + (box.root() / "b").string() + "\"").exit_code == 0);
  for (const char* name : {"scene.jsonl", "posterior_trace.csv", "local_trace.csv", "errors.csv", "report.txt"}) {
    CAPTURE(name);
    CHECK(slurp(box.root() / "a" / name) == slurp(box.root() / "b" / name));
  }

  // The seed flag wins over the environment, which wins over the file.
  REQUIRE(box.run("simulate --config \"" + config + "\" --out \"" + (box.root() / "c").string() + "\"",
                  "SCALESENSE_SEED=6")
              .exit_code == 0);
  REQUIRE(box.run("simulate --config \"" + config + "\" --seed 6 --out \"" + (box.root() / "d").string() + "\"",
                  "SCALESENSE_SEED=7")
              .exit_code == 0);
  CHECK(slurp(box.root() / "c" / "scene.jsonl") == slurp(box.root() / "d" / "scene.jsonl"));
  CHECK(slurp(box.root() / "c" / "scene.jsonl") != slurp(box.root() / "a" / "scene.jsonl"));
}

TEST_CASE("subcommands compose to the same result as run-all") {
  Sandbox box;
  const std::string config = box.small_config().string();
  const std::string all = (box.root() / "all").string(), step = (box.root() / "step").string();
  REQUIRE(box.run("run-all --config \"" + config + "\" --out \"" + all + "\"").exit_code == 0);
  REQUIRE(box.run("simulate --config \"" + config + "\" --out \"" + step + "\"").exit_code == 0);
  REQUIRE(box.run("estimate --config \"" + config + "\" --frames \"" + step + "/scene.jsonl\" --out \"" + step + "\"")
              .exit_code == 0);
  REQUIRE(box.run("evaluate --traces \"" + step + "\" --truth \"" + step + "/truth.json\" --out \"" + step + "\"")
              .exit_code == 0);
  CHECK(slurp(box.root() / "all" / "posterior_trace.csv") == slurp(box.root() / "step" / "posterior_trace.csv"));
  CHECK(slurp(box.root() / "all" / "errors.csv") == slurp(box.root() / "step" / "errors.csv"));
}

TEST_CASE("missing prior file is a validation failure naming the path") {
  Sandbox box;
  const std::string missing = (box.root() / "no_such_priors.json").string();
  const Run r = box.run("run-all --config \"" + box.small_config(missing).string() + "\" --out \"" +
                        (box.root() / "a").string() + "\"");
  CHECK(r.exit_code == 1);
  CHECK(r.err.find(missing) != std::string::npos);
  CHECK(!fs::exists(box.root() / "a" / "scene.jsonl"));
}

TEST_CASE("usage errors print the config schema") {
  Sandbox box;
  const Run unknown = box.run("run-all --config x.json --frobnicate");
  CHECK(unknown.exit_code == 1);
  CHECK(unknown.err.find("Run configuration") != std::string::npos);

  const Run none = box.run("");
  CHECK(none.exit_code == 1);

  const Run help = box.run("--help");
  CHECK(help.exit_code == 0);
  CHECK(help.out.find("run-all") != std::string::npos);
  CHECK(help.out.find("Run configuration") != std::string::npos);

  const Run bad_config = box.run("simulate --config \"" + box.write("bad.json", R"({"colour": 1})").string() + "\"");
  CHECK(bad_config.exit_code == 1);
  CHECK(bad_config.err.find("colour") != std::string::npos);
}

TEST_CASE("input and output failures") {
  Sandbox box;
  const std::string config = box.small_config().string();

  // The output path is an existing file, so the directory cannot be created.
  const fs::path blocker = box.write("blocker", "x");
  CHECK(box.run("simulate --config \"" + config + "\" --out \"" + blocker.string() + "/sub\"").exit_code == 2);

  const Run no_frames = box.run("estimate --config \"" + config + "\" --frames \"" + (box.root() / "nope.jsonl").string() + "\"");
  CHECK(no_frames.exit_code == 1);
  CHECK(no_frames.err.find("nope.jsonl") != std::string::npos);

  const fs::path garbled = box.write("garbled.jsonl", "{\"frame\": 0}\n");
  const Run parse = box.run("estimate --config \"" + config + "\" --frames \"" + garbled.string() + "\" --out \"" +
                            box.root().string() + "\"");
  CHECK(parse.exit_code == 1);
  CHECK(parse.err.find("line 1") != std::string::npos);
}

}  // TEST_SUITE
