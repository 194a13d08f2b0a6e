#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pddllm/induction.hpp"
#include "pddllm/loca.hpp"
#include "pddllm/pddl.hpp"

namespace pddllm {

enum class TaskCategory {
  stacking,
  unstacking,
  rearrangement,
  alignment,
  color_classification,
  tower_of_hanoi,
};

std::string to_string(TaskCategory category);
std::optional<TaskCategory> category_from_string(const std::string& name);

struct TaskSpec {
  TaskCategory category = TaskCategory::stacking;
  int n_objects = 3;
  std::uint64_t seed = 0;
  double time_limit_seconds = 50.0;

  void validate() const;  // n_objects within the category's generator range
};

// Names the library predicates that goals are written against; resolved
// structurally from the constraint shapes so generated goals survive
// arbitrary surface naming.
struct CanonicalBindings {
  std::string stacked_on = "above";
  std::string on_table = "on_table";
  std::string beside = "right_of";
  std::string clear_of = "forall_0_not_above";
  std::string not_resting_on_any = "forall_1_not_above";
  std::string not_stacked_on = "not_above";
  std::string not_on_table = "not_on_table";
  std::string similar_color = "similar_color";
};

CanonicalBindings bind_canonical(const PredicateLibrary& library);

struct GeneratedTask {
  TaskSpec spec;
  Scene scene;
  pddl::Problem problem;
  bool symbolic_only = false;  // tower-of-hanoi runs against the puzzle domain
};

// Seeded feasible initial scene plus a goal expressed over the bound
// predicate names. Hanoi tasks target the shipped puzzle domain instead.
GeneratedTask generate_task(const TaskSpec& spec,
                            const CanonicalBindings& bindings = CanonicalBindings{});

// Classic three-peg puzzle domain used by the tower-of-hanoi category.
const pddl::Domain& hanoi_domain();

// ---- demonstration fixtures -------------------------------------------

struct DemoOptions {
  int blocks = 3;
  std::size_t min_steps = 1000;
  std::uint64_t seed = 1;
};

Trajectory make_stack_demo(const DemoOptions& options = {});
Trajectory make_unstack_demo(const DemoOptions& options = {});
Trajectory make_align_demo(const DemoOptions& options = {});
Trajectory make_color_demo(const DemoOptions& options = {});

// ---- pipeline runs ----------------------------------------------------

enum class TaskOutcome { success, solve_timeout, no_plan, execution_failed, induction_failed };
std::string to_string(TaskOutcome outcome);

struct BenchRow {
  TaskSpec spec;
  TaskOutcome outcome = TaskOutcome::induction_failed;
  std::size_t plan_length = 0;
  double wall_ms = 0.0;
  int replans = 0;
  std::uint64_t tokens = 0;  // per-task cost; solving itself consumes none
  std::size_t executed_actions = 0;
  std::size_t aligned_actions = 0;
};

struct BenchConfig {
  InductionConfig induction;
  int repeats = 1;
  std::string transcript_path;  // JSONL transcript when non-empty
};

struct BenchReport {
  std::vector<BenchRow> rows;
  std::uint64_t induction_tokens = 0;
  std::uint64_t induction_calls = 0;
  std::string winner_signature;
  std::map<std::string, int> vote_classes;
  std::vector<std::string> eliminations;
  bool induction_ok = false;

  double success_rate() const;
  double success_stderr() const;
  std::size_t total_executed() const;
  std::size_t total_aligned() const;
};

// Induces one domain from the demonstrations (k parallel candidates plus the
// vote), then solves and executes every task under the shared time budget.
BenchReport run_pipeline(const std::vector<Trajectory>& demos,
                         const std::vector<TaskSpec>& tasks, const BenchConfig& config,
                         SummarizerBackend& backend);

std::string report_to_csv(const BenchReport& report);
// mask_timing replaces wall-clock fields with zeros; byte-identical reports
// are only promised for the masked form
std::string report_to_json(const BenchReport& report, bool mask_timing = false);

// success-vs-object-count series, one row per (category, n)
std::string report_series_csv(const BenchReport& report);

// ---- domain quality -----------------------------------------------------

struct DomainQuality {
  double missing_predicates_pct = 0.0;
  double redundant_predicates_pct = 0.0;
  double missing_actions_pct = 0.0;
  double redundant_actions_pct = 0.0;
};

// Missing: reference elements absent from the generated domain. Redundant:
// generated elements whose removal leaves every validation problem solvable
// (established by ablate-and-solve); elements named by a problem's init or
// goal are never redundant.
DomainQuality score_domain(const pddl::Domain& generated, const pddl::Domain& reference,
                           const std::vector<pddl::Problem>& validation_problems,
                           double solve_budget_seconds = 5.0);

// ---- noise robustness ----------------------------------------------------

struct NoiseReport {
  std::vector<double> levels_pct;
  struct Row {
    std::string predicate;
    std::vector<double> accuracy_mean;
    std::vector<double> accuracy_stderr;
  };
  std::vector<Row> rows;
  Row overall;
};

// Balanced true/false trials per relevant binary positional predicate;
// positions perturbed by uniform noise scaled to each object's largest size
// dimension. Accuracy is agreement with the unperturbed truth value.
NoiseReport noise_study(const PredicateLibrary& library, const std::vector<double>& levels_pct,
                        std::uint64_t seed, int trials_per_side = 25, int repeats = 3);

std::string noise_report_to_csv(const NoiseReport& report);

}  // namespace pddllm
