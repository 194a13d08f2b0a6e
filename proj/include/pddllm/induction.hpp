#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pddllm/actions.hpp"
#include "pddllm/pddl.hpp"
#include "pddllm/predicates.hpp"
#include "pddllm/scene.hpp"
#include "pddllm/summarizer.hpp"

namespace pddllm {

struct InductionConfig {
  int prompts = 10;  // parallel candidate generations
  std::uint64_t seed = 0;
  std::size_t samples_per_family = 1000;
  double u_scale = 1.0;  // u = u_scale * d_min
  std::vector<int> forall_positions = {0, 1};
  bool enable_exists = false;
  std::uint64_t subspace_cap = 1'000'000;
  double validation_budget_seconds = 5.0;
  int relevance_votes = 3;
  std::string domain_name = "induced";
};

struct InductionTask {
  std::vector<Trajectory> demos;
  InductionConfig config;
};

enum class EliminationReason { none, syntax, incomplete, goal_unreached, timeout, backend };
std::string to_string(EliminationReason reason);

struct CandidateDomain {
  pddl::Domain domain;
  PredicateLibrary library;
  std::vector<std::string> provenance;  // transcript of the calls that built it
  enum class Status { unvalidated, valid, eliminated } status = Status::unvalidated;
  EliminationReason reason = EliminationReason::none;
  std::string detail;
};

// Steps of the demonstration that are statically at rest; transport frames
// where an object hangs in the gripper do not pass the feasibility rules and
// are excluded from d_min estimation and cell observation.
std::vector<const Scene*> resting_steps(const Trajectory& demo);

// Builds the default feature families (relative position, table support,
// relative color, relative size) from the demonstrations: per-feature u from
// d_min of the observed values, ranges anchored so observed values sit at
// cell centers and extended to cover the workspace. Degenerate features are
// dropped; empty families vanish.
std::vector<FeatureFamily> build_feature_families(const std::vector<Trajectory>& demos,
                                                  double u_scale);

// Same, but resolving "d_min" entries of an explicit config file.
std::vector<FeatureFamily> resolve_feature_config(
    const std::vector<FeatureFamilyConfig>& config, const std::vector<Trajectory>& demos,
    double u_scale);

// One full pass from demonstrations to an unvalidated candidate: observe and
// sample subspaces, summarize them into named predicates, derive the
// higher-order forms, re-classify relevance, ground the demonstrations, lift
// transitions into schemas and compose the domain. Throws InductionError.
struct InductionError : std::runtime_error {
  InductionError(EliminationReason r, const std::string& message)
      : std::runtime_error(message), reason(r) {}
  EliminationReason reason;
};

CandidateDomain run_single_induction(const InductionTask& task, SummarizerBackend& backend,
                                     std::uint64_t seed);

// The planning problem a demonstration solves: first logical state as init,
// the conjunction of the final state's atoms as goal.
pddl::Problem replay_problem(const LogicalTrajectory& lt,
                             const std::vector<std::string>& objects,
                             const std::string& domain_name, const std::string& name);

// k independent candidate generations, each validated by emitting, parsing
// and solving the demonstrations' own replay problems. Failures are recorded
// as eliminations, never thrown.
std::vector<CandidateDomain> generate_candidates(const InductionTask& task, int k,
                                                 SummarizerBackend& backend,
                                                 std::uint64_t seed);

struct VoteOutcome {
  bool ok = false;
  CandidateDomain winner;               // meaningful when ok
  std::map<std::string, int> classes;   // structural signature -> count (valid only)
  std::string failure;                  // set when every candidate was eliminated
};

// Majority vote over the valid candidates, compared by a structural
// signature that ignores surface naming. Strict plurality wins; ties break
// by a seeded uniform choice. Schemas unused by every solved replay problem
// are pruned from the winner.
VoteOutcome vote(const std::vector<CandidateDomain>& candidates, std::uint64_t seed,
                 SummarizerBackend* backend = nullptr, const InductionTask* task = nullptr);

enum class Relevance { relevant, irrelevant };

// Aggregates per-prompt verdicts by majority; ties resolve by seeded choice.
Relevance classify_relevance(const std::string& predicate, const std::string& task_description,
                             SummarizerBackend& backend, int votes, std::uint64_t seed);

// Candidate equivalence key: domain structure with predicate names replaced
// by constraint-level signatures from the library.
std::string candidate_signature(const CandidateDomain& candidate);

}  // namespace pddllm
