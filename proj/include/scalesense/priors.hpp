#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace scalesense {

struct HeightBin {
  double height_m = 0.0;
  double prob = 0.0;

  friend bool operator==(const HeightBin&, const HeightBin&) = default;
};

/// Discretized class height prior p_c(H). Heights strictly increasing, probabilities sum to 1.
struct HeightHistogram {
  int class_id = 0;
  std::string class_name;
  std::vector<HeightBin> bins;

  friend bool operator==(const HeightHistogram&, const HeightHistogram&) = default;
};

/// Immutable after construction; safe to share across threads.
class PriorRegistry {
 public:
  PriorRegistry() = default;
  explicit PriorRegistry(std::vector<HeightHistogram> histograms);

  /// Throws Error(UnknownClass).
  const HeightHistogram& lookup(int class_id) const;
  /// nullptr for unregistered classes.
  const HeightHistogram* find(int class_id) const noexcept;

  std::size_t size() const noexcept { return by_class_.size(); }
  const std::map<int, HeightHistogram>& classes() const noexcept { return by_class_; }

 private:
  std::map<int, HeightHistogram> by_class_;
};

/// Validates one histogram in place: positive increasing heights, non-negative
/// probabilities, sum within 1e-6 of one (renormalized). Throws MalformedPrior.
void validate_histogram(HeightHistogram& hist);

/// Parses `{"classes":[{"id":..,"name":..,"bins":[{"height_m":..,"prob":..}]}]}`.
PriorRegistry load_priors(std::string_view document);
PriorRegistry load_priors_file(const std::filesystem::path& path);

std::string dump_priors(const PriorRegistry& registry);

}  // namespace scalesense
