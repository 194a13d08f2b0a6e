#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pddllm/scene.hpp"

namespace pddllm {

// Scalar interval with independently open/closed ends. Discretization cells
// are [lo, hi) except the last cell of a range, which is closed at the top.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool lo_open = false;
  bool hi_closed = false;

  bool contains(double v) const {
    const bool above = lo_open ? v > lo : v >= lo;
    const bool below = hi_closed ? v <= hi : v < hi;
    return above && below;
  }
  double mid() const { return 0.5 * (lo + hi); }
  bool operator==(const Interval&) const = default;
};

// A continuous state variable: a unary property of one object or a signed
// pairwise difference between two objects, with bounded range and an
// interval length u used to partition it.
struct FeatureDef {
  std::string name;
  int arity = 1;  // 1 = unary property, 2 = pairwise difference
  double lo = 0.0;
  double hi = 0.0;
  double u = 0.0;
  std::string units;

  void validate() const {
    if (lo >= hi) throw std::invalid_argument("feature " + name + ": lo must be < hi");
    if (u <= 0.0 || u > hi - lo + 1e-12)
      throw std::invalid_argument("feature " + name + ": u outside (0, hi-lo]");
  }
  std::size_t interval_count() const;
};

// A named group of features evaluated over the same argument tuple.
struct FeatureFamily {
  std::string name;
  int arity = 1;
  std::vector<FeatureDef> features;
};

struct DegenerateFeature : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SubspaceCapExceeded : std::runtime_error {
  SubspaceCapExceeded(std::uint64_t required_cap, std::uint64_t cap)
      : std::runtime_error("subspace count " + std::to_string(required_cap) +
                           " exceeds cap " + std::to_string(cap)),
        required(required_cap) {}
  std::uint64_t required;
};

// One cell of the discretized feature space.
struct Subspace {
  std::map<std::string, std::pair<int, Interval>> cells;  // feature -> (index, bounds)
  std::optional<bool> feasible;

  int index_of(const std::string& feature) const { return cells.at(feature).first; }
  const Interval& bounds_of(const std::string& feature) const {
    return cells.at(feature).second;
  }
};

// Smallest non-zero |vi - vj| over all value pairs. Throws DegenerateFeature
// when every value is identical.
double compute_d_min(std::span<const double> values);

// Contiguous cover of [lo, hi] by ceil((hi-lo)/u) cells, half-open except
// the last, which is clipped to hi and closed.
std::vector<Interval> discretize(const FeatureDef& feature);

// Index of the cell containing v, or nullopt when v is outside the range.
std::optional<std::size_t> cell_index(const FeatureDef& feature, double v);

// Cartesian product of the per-feature cells in deterministic lexicographic
// order (first feature most significant). Throws SubspaceCapExceeded.
std::vector<Subspace> enumerate_subspaces(const std::vector<FeatureDef>& features,
                                          std::uint64_t cap = 1'000'000);

// Samples n points uniformly over the feature ranges, realizes each as a
// scene derived from the template (first object varied, second as the
// reference for pairwise features) and marks each touched cell feasible iff
// at least one of its samples passes check_feasible. Untouched cells keep an
// unset flag.
std::vector<Subspace> sample_and_filter(const std::vector<FeatureDef>& features,
                                        const Scene& scene_template, std::size_t n,
                                        std::uint64_t seed,
                                        std::uint64_t cap = 1'000'000);

// ---- feature evaluation ------------------------------------------------

bool is_known_feature(const std::string& name);

// Value of a feature for the given objects (one id for unary features, two
// for pairwise ones). Throws on unknown features or objects.
double feature_value(const std::string& feature, const Scene& scene,
                     std::span<const std::string> args);

// Applies a sampled feature value to `target`, relative to `reference` for
// pairwise features. Used when realizing sampled states as scenes.
void apply_feature_value(const std::string& feature, double value,
                         ObjectState& target, const ObjectState* reference,
                         double table_height);

// ---- complexity estimators ----------------------------------------------

struct PartitionSpec {
  std::uint64_t partitions_per_dim = 1;  // n_p
  std::uint64_t dims = 1;                // n_dim
};

// Sum over types of n_p^n_dim. Throws std::overflow_error past 2^63.
std::uint64_t derivation_complexity(std::span<const PartitionSpec> types);

struct ComplexityValue {
  bool exact = true;
  std::uint64_t value = 0;  // meaningful when exact
  double log10_value = 0.0;
};

// (m*n)^l, reported as log10 once it leaves the native integer range.
ComplexityValue planning_complexity(std::uint64_t actions, std::uint64_t objects,
                                    std::uint64_t plan_length);

// ---- config file ---------------------------------------------------------

// JSON feature config; `u` may be the literal "d_min", resolved against a
// demonstration before use (marked here by u == 0 with d_min_requested).
struct FeatureConfigEntry {
  FeatureDef def;
  bool d_min_requested = false;
};
struct FeatureFamilyConfig {
  std::string name;
  int arity = 1;
  std::vector<FeatureConfigEntry> features;
};
std::vector<FeatureFamilyConfig> load_feature_config(const std::string& path);
std::vector<FeatureFamilyConfig> feature_config_from_json_text(const std::string& text);

}  // namespace pddllm
