#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pddllm/pddl.hpp"
#include "pddllm/predicates.hpp"
#include "pddllm/scene.hpp"

namespace pddllm {

// Demonstration mapped into logical space; consecutive duplicate states are
// collapsed.
struct LogicalTrajectory {
  std::vector<LogicalState> states;
  std::string source;
};

struct Transition {
  LogicalState pre;
  LogicalState post;
};

// Grounds every step of the trajectory and deduplicates consecutive equal
// states. Output length never exceeds the step count.
LogicalTrajectory ground_trajectory(const Trajectory& traj, const PredicateLibrary& library);

// Consecutive (pre, post) pairs; empty for trajectories of length <= 1.
std::vector<Transition> extract_transitions(const LogicalTrajectory& lt);

// Chooses a schema name for a lifted transition; backed by the summarizer.
using ActionNamer =
    std::function<std::string(const LogicalState& pre, const LogicalState& post)>;

// Lifts one state transition into a parameterized schema. Objects appearing
// in changed atoms become parameters ordered by first appearance in the
// added atoms, then the deleted ones; the precondition keeps the pre-state
// atoms fully expressible over those parameters. Throws when pre == post.
pddl::ActionSchema lift_transition(const Transition& transition, const ActionNamer& namer);

// Composes relevant predicates and schemas into a planning domain.
// Duplicate schemas (identical canonical form) collapse to one; schemas that
// share a name and effect signature but differ in preconditions are merged
// by intersecting their preconditions, so repeated executions of the same
// action in different contexts generalize instead of accumulating variants.
pddl::Domain compose_domain(const PredicateLibrary& library,
                            const std::vector<pddl::ActionSchema>& schemas,
                            const std::string& name);

}  // namespace pddllm
