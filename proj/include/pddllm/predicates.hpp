#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pddllm/features.hpp"
#include "pddllm/scene.hpp"

namespace pddllm {

// Interval union over one feature; a value satisfies the constraint when it
// falls in any member interval.
struct FeatureConstraint {
  std::string feature;
  std::vector<Interval> intervals;

  bool contains(double v) const {
    for (const auto& iv : intervals)
      if (iv.contains(v)) return true;
    return false;
  }
};

enum class HigherOp { negation, forall, forall_not, exists };

struct HigherOrderForm {
  HigherOp op = HigherOp::negation;
  std::string base;
  int position = 0;  // quantified argument position of the base predicate
};

enum class PredicateOrder { first, higher };
enum class PredicateOrigin { summarized, derived, refined };

struct PredicateDef {
  std::string name;
  int arity = 2;
  std::vector<std::string> param_roles;
  std::vector<FeatureConstraint> constraint;  // conjunction; empty for higher-order
  PredicateOrder order = PredicateOrder::first;
  bool relevant = true;
  PredicateOrigin origin = PredicateOrigin::summarized;
  std::optional<HigherOrderForm> form;
  bool planning_enabled = true;  // exists-forms are kept but disabled by default
};

struct GroundAtom {
  std::string predicate;
  std::vector<std::string> args;

  auto operator<=>(const GroundAtom&) const = default;
  std::string str() const;
};

// Set of ground atoms under a canonical (sorted) ordering.
struct LogicalState {
  std::vector<GroundAtom> atoms;  // sorted, unique

  void insert(GroundAtom atom);
  bool contains(const GroundAtom& atom) const;
  void normalize();
  bool operator==(const LogicalState&) const = default;

  static LogicalState set_union(const LogicalState& a, const LogicalState& b);
  static std::vector<GroundAtom> difference(const LogicalState& a, const LogicalState& b);
};

class PredicateLibrary {
 public:
  PredicateLibrary() = default;
  explicit PredicateLibrary(std::vector<FeatureDef> features) : features_(std::move(features)) {}

  // Throws on duplicate names or violated invariants.
  void add(PredicateDef def);
  bool has(const std::string& name) const;
  const PredicateDef& at(const std::string& name) const;
  const std::vector<PredicateDef>& predicates() const { return defs_; }
  std::vector<const PredicateDef*> relevant_predicates() const;

  const std::vector<FeatureDef>& features() const { return features_; }
  const FeatureDef* find_feature(const std::string& name) const;
  void set_features(std::vector<FeatureDef> f) { features_ = std::move(f); }

  bool empty() const { return defs_.empty(); }
  std::size_t size() const { return defs_.size(); }

 private:
  std::vector<PredicateDef> defs_;
  std::vector<FeatureDef> features_;
};

// True iff every bound feature value lies in its constraint union
// (first-order), or per operator semantics for higher-order forms.
// Quantifiers range over scene objects distinct from the fixed arguments.
bool eval_predicate(const PredicateLibrary& library, const PredicateDef& p,
                    std::span<const std::string> args, const Scene& scene);
bool eval_predicate(const PredicateLibrary& library, const std::string& name,
                    std::span<const std::string> args, const Scene& scene);

// All true ground atoms of relevant, planning-enabled predicates over all
// argument tuples (distinct objects for binary predicates), sorted.
LogicalState ground_state(const Scene& scene, const PredicateLibrary& library);

struct DeriveOptions {
  std::vector<int> forall_positions = {0};
  bool enable_exists = false;
};

// Extends a library with the systematic higher-order forms of its
// first-order predicates: not_<p> for unary and binary bases, and
// forall_<pos>_<p> / forall_<pos>_not_<p> for binary bases (plus
// exists_<pos>_<p> when enabled; those are generated with planning
// disabled). Derived forms inherit the base predicate's relevance.
PredicateLibrary derive_higher_order(const PredicateLibrary& library,
                                     const DeriveOptions& options = {});

struct RefineDirective {
  enum class Kind { merge, subdivide };
  Kind kind = Kind::merge;
  std::string feature;
  std::vector<int> merge_indices;  // contiguous member-interval indices
  int subdivide_index = 0;
  int factor = 2;
};

// Merges contiguous member intervals or splits one into `factor` even
// parts. Coverage of the feature range is preserved; origin becomes refined.
PredicateDef refine_intervals(const PredicateDef& p, const RefineDirective& directive);

// ---- library file --------------------------------------------------------

std::string library_to_json_text(const PredicateLibrary& library);
PredicateLibrary library_from_json_text(const std::string& text);
void save_library(const PredicateLibrary& library, const std::string& path);
PredicateLibrary load_library(const std::string& path);

}  // namespace pddllm
