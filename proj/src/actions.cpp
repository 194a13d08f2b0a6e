#include "pddllm/actions.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace pddllm {

using pddl::ActionSchema;
using pddl::Atom;
using pddl::Domain;
using pddl::Literal;

LogicalTrajectory ground_trajectory(const Trajectory& traj, const PredicateLibrary& library) {
  if (library.relevant_predicates().empty())
    throw std::invalid_argument("ground_trajectory: no relevant predicates in library");

  LogicalTrajectory out;
  out.source = traj.task_description;
  for (const auto& step : traj.steps) {
    LogicalState state = ground_state(step.scene, library);
    if (out.states.empty() || !(out.states.back() == state))
      out.states.push_back(std::move(state));
  }
  return out;
}

std::vector<Transition> extract_transitions(const LogicalTrajectory& lt) {
  std::vector<Transition> out;
  for (std::size_t i = 0; i + 1 < lt.states.size(); ++i)
    out.push_back({lt.states[i], lt.states[i + 1]});
  return out;
}

namespace {

Atom to_pddl(const GroundAtom& atom) { return {atom.predicate, atom.args}; }

Atom lift_atom(const GroundAtom& atom, const std::map<std::string, std::string>& vars) {
  Atom out = to_pddl(atom);
  for (auto& a : out.args) a = vars.at(a);
  return out;
}

bool fully_bound(const GroundAtom& atom, const std::map<std::string, std::string>& vars) {
  return std::all_of(atom.args.begin(), atom.args.end(),
                     [&](const std::string& a) { return vars.contains(a); });
}

std::string variable_name(std::size_t index) {
  if (index < 26) return std::string("?") + static_cast<char>('a' + index);
  return "?v" + std::to_string(index);
}

}  // namespace

ActionSchema lift_transition(const Transition& transition, const ActionNamer& namer) {
  const auto added = LogicalState::difference(transition.post, transition.pre);
  const auto deleted = LogicalState::difference(transition.pre, transition.post);
  if (added.empty() && deleted.empty())
    throw std::invalid_argument("lift_transition: states are identical");

  // parameters by first appearance: added atoms first, then deleted
  std::map<std::string, std::string> vars;
  ActionSchema schema;
  auto bind = [&](const std::vector<GroundAtom>& atoms) {
    for (const auto& atom : atoms)
      for (const auto& obj : atom.args)
        if (!vars.contains(obj)) {
          const std::string v = variable_name(vars.size());
          vars[obj] = v;
          schema.params.push_back(v);
        }
  };
  bind(added);
  bind(deleted);

  for (const auto& atom : added) schema.add_effects.push_back(lift_atom(atom, vars));
  for (const auto& atom : deleted) schema.delete_effects.push_back(lift_atom(atom, vars));

  // Pre-state atoms whose objects all map to parameters; atoms touching
  // other objects cannot be lifted without inventing constants.
  for (const auto& atom : transition.pre.atoms)
    if (!atom.args.empty() && fully_bound(atom, vars))
      schema.precondition.push_back({lift_atom(atom, vars), false});

  std::sort(schema.precondition.begin(), schema.precondition.end());
  std::sort(schema.add_effects.begin(), schema.add_effects.end());
  std::sort(schema.delete_effects.begin(), schema.delete_effects.end());

  schema.name = namer(transition.pre, transition.post);
  schema.validate();
  return schema;
}

namespace {

// name + alpha-renamed effect lists; schemas agreeing here describe the same
// action observed under different circumstances
std::string effect_signature(const ActionSchema& schema) {
  ActionSchema copy = schema;
  Domain tmp;
  tmp.actions.push_back(copy);
  const Domain canon = pddl::canonical(tmp);
  const auto& a = canon.actions[0];
  std::string sig = a.name + "/" + std::to_string(a.params.size());
  for (const auto& atom : a.add_effects) sig += "+" + atom.str();
  for (const auto& atom : a.delete_effects) sig += "-" + atom.str();
  return sig;
}

std::string full_signature(const ActionSchema& schema) {
  Domain tmp;
  tmp.actions.push_back(schema);
  const Domain canon = pddl::canonical(tmp);
  const auto& a = canon.actions[0];
  std::string sig = effect_signature(schema);
  for (const auto& lit : a.precondition)
    sig += (lit.negated ? "!" : "?") + lit.atom.str();
  return sig;
}

ActionSchema intersect_preconditions(const ActionSchema& a, const ActionSchema& b) {
  // align b's parameters onto a's by position (same effect signature
  // guarantees positional correspondence after canonicalization)
  Domain da, db;
  da.actions.push_back(a);
  db.actions.push_back(b);
  const ActionSchema ca = pddl::canonical(da).actions[0];
  const ActionSchema cb = pddl::canonical(db).actions[0];

  ActionSchema merged = ca;
  merged.precondition.clear();
  std::set<Literal> other(cb.precondition.begin(), cb.precondition.end());
  for (const auto& lit : ca.precondition)
    if (other.contains(lit)) merged.precondition.push_back(lit);
  return merged;
}

}  // namespace

Domain compose_domain(const PredicateLibrary& library,
                      const std::vector<ActionSchema>& schemas, const std::string& name) {
  Domain domain;
  domain.name = name;

  std::set<std::string> referenced;
  for (const auto& schema : schemas) {
    auto note = [&](const Atom& atom) {
      if (!library.has(atom.predicate))
        throw std::invalid_argument("schema " + schema.name +
                                    " references unknown predicate " + atom.predicate);
      referenced.insert(atom.predicate);
    };
    for (const auto& lit : schema.precondition) note(lit.atom);
    for (const auto& q : schema.precondition_forall) note(q.literal.atom);
    for (const auto& atom : schema.add_effects) note(atom);
    for (const auto& atom : schema.delete_effects) note(atom);
  }

  for (const auto& p : library.predicates())
    if ((p.relevant && p.planning_enabled) || referenced.contains(p.name))
      domain.predicates.push_back({p.name, p.arity});

  // dedupe identical schemas, merge same-effect variants
  std::map<std::string, ActionSchema> by_effect;
  std::set<std::string> seen_exact;
  std::vector<std::string> order;
  for (const auto& schema : schemas) {
    const std::string exact = full_signature(schema);
    if (seen_exact.contains(exact)) continue;
    seen_exact.insert(exact);
    const std::string sig = effect_signature(schema);
    auto it = by_effect.find(sig);
    if (it == by_effect.end()) {
      by_effect.emplace(sig, schema);
      order.push_back(sig);
    } else {
      it->second = intersect_preconditions(it->second, schema);
    }
  }

  std::set<std::string> used_names;
  for (const auto& sig : order) {
    ActionSchema schema = by_effect.at(sig);
    std::string base = schema.name;
    int suffix = 2;
    while (used_names.contains(schema.name)) schema.name = base + "_" + std::to_string(suffix++);
    used_names.insert(schema.name);
    domain.actions.push_back(std::move(schema));
  }

  domain.validate();
  return domain;
}

}  // namespace pddllm
