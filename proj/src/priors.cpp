#include "scalesense/priors.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "scalesense/error.hpp"

namespace scalesense {

namespace {

using nlohmann::json;

constexpr double kSumBand = 1e-6;

[[noreturn]] void malformed(const std::string& why) { throw Error(ErrorCode::MalformedPrior, why); }

double number_field(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_number()) malformed(where + ": missing numeric '" + key + "'");
  return it->get<double>();
}

}  // namespace

void validate_histogram(HeightHistogram& hist) {
  const std::string where = "class " + std::to_string(hist.class_id);
  if (hist.bins.empty()) malformed(where + ": histogram has no bins");
  double sum = 0.0;
  for (std::size_t i = 0; i < hist.bins.size(); ++i) {
    const HeightBin& bin = hist.bins[i];
    if (!std::isfinite(bin.height_m) || bin.height_m <= 0.0) {
      malformed(where + ": non-positive height " + std::to_string(bin.height_m));
    }
    if (!std::isfinite(bin.prob) || bin.prob < 0.0) {
      malformed(where + ": negative probability " + std::to_string(bin.prob));
    }
    if (i > 0 && !(bin.height_m > hist.bins[i - 1].height_m)) {
      malformed(where + ": heights must be strictly increasing");
    }
    sum += bin.prob;
  }
  if (std::abs(sum - 1.0) > kSumBand) {
    malformed(where + ": probabilities sum to " + std::to_string(sum));
  }
  if (sum != 1.0) {
    for (HeightBin& bin : hist.bins) bin.prob /= sum;
  }
}

PriorRegistry::PriorRegistry(std::vector<HeightHistogram> histograms) {
  for (HeightHistogram& hist : histograms) {
    validate_histogram(hist);
    const int id = hist.class_id;
    if (!by_class_.emplace(id, std::move(hist)).second) {
      malformed("duplicate class id " + std::to_string(id));
    }
  }
}

const HeightHistogram& PriorRegistry::lookup(int class_id) const {
  const HeightHistogram* hist = find(class_id);
  if (hist == nullptr) {
    throw Error(ErrorCode::UnknownClass, "no height prior for class " + std::to_string(class_id));
  }
  return *hist;
}

const HeightHistogram* PriorRegistry::find(int class_id) const noexcept {
  const auto it = by_class_.find(class_id);
  return it == by_class_.end() ? nullptr : &it->second;
}

PriorRegistry load_priors(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    malformed(std::string("prior document does not parse: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("classes") || !doc["classes"].is_array()) {
    malformed("prior document needs a 'classes' array");
  }
  std::vector<HeightHistogram> histograms;
  for (const json& entry : doc["classes"]) {
    if (!entry.is_object() || !entry.contains("id") || !entry["id"].is_number_integer()) {
      malformed("class entry needs an integer 'id'");
    }
    HeightHistogram hist;
    hist.class_id = entry["id"].get<int>();
    const std::string where = "class " + std::to_string(hist.class_id);
    if (entry.contains("name")) {
      if (!entry["name"].is_string()) malformed(where + ": 'name' must be a string");
      hist.class_name = entry["name"].get<std::string>();
    }
    if (!entry.contains("bins") || !entry["bins"].is_array()) {
      malformed(where + ": missing 'bins' array");
    }
    for (const json& bin : entry["bins"]) {
      if (!bin.is_object()) malformed(where + ": bin must be an object");
      hist.bins.push_back(
          HeightBin{number_field(bin, "height_m", where), number_field(bin, "prob", where)});
    }
    histograms.push_back(std::move(hist));
  }
  return PriorRegistry(std::move(histograms));
}

PriorRegistry load_priors_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open prior file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return load_priors(buffer.str());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string dump_priors(const PriorRegistry& registry) {
  json classes = json::array();
  for (const auto& [id, hist] : registry.classes()) {
    json bins = json::array();
    for (const HeightBin& bin : hist.bins) bins.push_back({{"height_m", bin.height_m}, {"prob", bin.prob}});
    classes.push_back({{"id", id}, {"name", hist.class_name}, {"bins", bins}});
  }
  return json{{"classes", classes}}.dump(2);
}

}  // namespace scalesense
