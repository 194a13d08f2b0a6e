#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pddllm/pddl.hpp"
#include "pddllm/predicates.hpp"
#include "pddllm/scene.hpp"

namespace pddllm {

// One interval constraint on the placement of the target object, tied to a
// feature over (target, reference) or over the target alone. Constraints
// from a negated effect carry the complement flag: the grouped conjunction
// must NOT hold.
struct PoseConstraint {
  std::string feature;
  std::vector<Interval> intervals;
  std::string arg0;
  std::string arg1;  // empty for unary features
};

struct ConstraintGroup {
  bool complement = false;
  std::vector<PoseConstraint> constraints;  // conjunction over one effect atom
};

struct ConstraintSet {
  std::string target_object;
  std::vector<ConstraintGroup> groups;
  pddl::GroundAction source_action;
  std::vector<GroundAtom> add_atoms;     // instantiated effects, for post checks
  std::vector<GroundAtom> delete_atoms;

  bool empty() const { return groups.empty(); }
};

struct UngroundableEffect : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Interval constraints of every first-order predicate in the action's add
// effects, bound to the action's objects. Negation forms contribute their
// base constraints as a complement group; quantified forms contribute
// nothing and are checked after placement. Throws UngroundableEffect when
// the adds reference no groundable constraint at all or do not share a
// common object to move.
ConstraintSet constraints_for_action(const pddl::GroundAction& action,
                                     const pddl::Domain& domain,
                                     const PredicateLibrary& library);

// Seeded rejection sampling over the constraint boxes. A candidate pose is
// accepted iff the moved scene is feasible and every add effect of the
// source action (including quantified forms) evaluates true in it. Returns
// nullopt when max_samples candidates were rejected.
std::optional<TargetPose> solve_placement(const ConstraintSet& cs, const Scene& scene,
                                          const PredicateLibrary& library,
                                          std::uint64_t seed, std::size_t max_samples = 2000);

struct Waypoint {
  double x = 0.0, y = 0.0, z = 0.0, yaw = 0.0;
};

struct ExecutionSegment {
  pddl::GroundAction action;
  Scene scene_after;
  std::vector<Waypoint> waypoints;  // lift - translate - lower path of the moved object
};

enum class ExecutionOutcome { success, failed };

struct ExecutionTrace {
  std::vector<ExecutionSegment> segments;
  ExecutionOutcome outcome = ExecutionOutcome::failed;
  std::size_t failed_step = 0;
  std::string failure_reason;  // timeout | no-plan | unsatisfiable | ...
  int replans = 0;
  std::vector<std::size_t> replan_steps;  // executed-step counts at each replan

  // semantic alignment counters: every executed action's add effects must
  // hold and its delete effects must not, in the scene it produced
  std::size_t executed_actions = 0;
  std::size_t aligned_actions = 0;

  Scene final_scene;
};

struct ExecutionOptions {
  double budget_seconds = 50.0;
  std::uint64_t seed = 0;
  std::size_t max_placement_samples = 2000;
  int max_replans = 25;
};

// Executes the plan step by step: constraint retrieval, placement solving,
// kinematic lift-translate-lower motion with waypoint collision checks, then
// placement. Any step failure re-grounds the current scene and re-solves
// symbolically; the loop runs until the goal scene grounds to the goal
// state, the budget is exhausted, or no plan exists.
ExecutionTrace execute_plan(const pddl::Plan& plan, const Scene& scene,
                            const pddl::Domain& domain, const PredicateLibrary& library,
                            const pddl::Problem& problem, const ExecutionOptions& options);

std::string trace_to_json_text(const ExecutionTrace& trace);
void save_trace(const ExecutionTrace& trace, const std::string& path);

}  // namespace pddllm
