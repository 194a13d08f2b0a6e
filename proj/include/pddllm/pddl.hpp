#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pddllm/predicates.hpp"

namespace pddllm::pddl {

// Atom over variables (?x) or object names.
struct Atom {
  std::string predicate;
  std::vector<std::string> args;

  auto operator<=>(const Atom&) const = default;
  std::string str() const;
};

struct Literal {
  Atom atom;
  bool negated = false;

  auto operator<=>(const Literal&) const = default;
};

// Universally quantified literal: (forall (?v) lit). The quantified variable
// ranges over all problem objects.
struct QuantifiedLiteral {
  std::string variable;
  Literal literal;

  auto operator<=>(const QuantifiedLiteral&) const = default;
};

struct ActionSchema {
  std::string name;
  std::vector<std::string> params;  // "?a", "?b", ...
  std::vector<Literal> precondition;
  std::vector<QuantifiedLiteral> precondition_forall;
  std::vector<Atom> add_effects;
  std::vector<Atom> delete_effects;

  void validate() const;  // vars bound, add/delete disjoint
  bool operator==(const ActionSchema&) const = default;
};

struct PredicateDecl {
  std::string name;
  int arity = 0;

  auto operator<=>(const PredicateDecl&) const = default;
};

struct Domain {
  std::string name;
  std::vector<PredicateDecl> predicates;
  std::vector<ActionSchema> actions;

  const PredicateDecl* find_predicate(const std::string& n) const;
  const ActionSchema* find_action(const std::string& n) const;
  void validate() const;  // declared names unique, actions reference declared predicates
  bool operator==(const Domain&) const = default;
};

// Goal formula: conjunction / negation / forall over atoms.
struct Condition {
  enum class Kind { atom, negation, conjunction, forall };
  Kind kind = Kind::atom;
  Atom atom;                        // kind == atom
  std::string variable;             // kind == forall
  std::vector<Condition> children;  // negation: 1, conjunction: n, forall: 1

  static Condition make_atom(Atom a);
  static Condition make_not(Condition c);
  static Condition make_and(std::vector<Condition> cs);
  static Condition make_forall(std::string var, Condition c);
  bool operator==(const Condition&) const = default;
};

struct Problem {
  std::string name;
  std::string domain_name;
  std::vector<std::string> objects;
  std::vector<Atom> init;
  Condition goal = Condition::make_and({});
};

struct GroundAction {
  std::string schema;
  std::vector<std::string> args;

  std::string str() const;
  auto operator<=>(const GroundAction&) const = default;
};

struct PlanStats {
  std::uint64_t nodes_expanded = 0;
  double wall_seconds = 0.0;
};

struct Plan {
  std::vector<GroundAction> steps;
  PlanStats stats;
};

// ---- parse / emit ----------------------------------------------------

struct ParseError : std::runtime_error {
  ParseError(const std::string& message, int line, int column);
  int line;
  int column;
};

Domain parse_domain(const std::string& text);
Problem parse_problem(const std::string& text);
Domain load_domain(const std::string& path);
Problem load_problem(const std::string& path);

// Canonical formatting: sorted declarations and actions, fixed indentation.
// parse(emit(d)) == canonical(d).
std::string emit_domain(const Domain& domain);
std::string emit_problem(const Problem& problem);

// Canonical form used for equality and voting: declarations sorted, literal
// lists sorted, parameters alpha-renamed.
Domain canonical(const Domain& domain);

// Structural signature that ignores all surface names (predicates renamed by
// their structural role, actions sorted); two domains that differ only in
// naming produce the same signature.
std::string structural_signature(const Domain& domain);

// ---- grounding ---------------------------------------------------------

struct GroundedInstance {
  GroundAction action;
  std::vector<Atom> pre_pos;
  std::vector<Atom> pre_neg;
  std::vector<Atom> add;
  std::vector<Atom> del;
  bool trivially_inapplicable = false;  // a positive precondition can never hold
};

// All parameter bindings with pairwise-distinct objects per action. Throws
// std::length_error when the instance count exceeds the cap.
std::vector<GroundedInstance> ground(const Domain& domain,
                                     const std::vector<std::string>& objects,
                                     std::uint64_t cap = 1'000'000);

// ---- solving ------------------------------------------------------------

enum class SolveStatus { found, no_plan, timeout };

struct SolveResult {
  SolveStatus status = SolveStatus::no_plan;
  Plan plan;  // meaningful when status == found
};

struct SolveOptions {
  double budget_seconds = 50.0;
  enum class Mode { bfs, greedy } mode = Mode::bfs;  // greedy: delete-relaxation heuristic
  std::uint64_t ground_cap = 1'000'000;
};

// Throws std::invalid_argument when the problem is not semantically valid
// against the domain (undeclared predicates, unknown objects, arity errors).
void validate_problem(const Problem& problem, const Domain& domain);

// Uniform-cost breadth-first search with duplicate elimination; returned
// plans are shortest. All outcomes are values.
SolveResult solve(const Problem& problem, const Domain& domain,
                  const SolveOptions& options = {});

struct ValidationResult {
  bool ok = true;
  std::optional<std::size_t> failed_step;  // empty + !ok means the goal failed
  std::string detail;
};

// Simulates the plan symbolically, checking every precondition and final
// goal satisfaction.
ValidationResult validate(const Plan& plan, const Problem& problem, const Domain& domain);

// Closed-world evaluation of a goal condition against a state.
bool holds(const Condition& goal, const LogicalState& state,
           const std::vector<std::string>& objects);

}  // namespace pddllm::pddl
