#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <map>
#include <queue>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "pddllm/pddl.hpp"

namespace pddllm::pddl {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Atom substitute(const Atom& atom, const std::map<std::string, std::string>& binding) {
  Atom out = atom;
  for (auto& a : out.args) {
    auto it = binding.find(a);
    if (it != binding.end()) a = it->second;
  }
  return out;
}

std::uint64_t count_permutations(std::size_t n, std::size_t k) {
  std::uint64_t total = 1;
  for (std::size_t i = 0; i < k; ++i) total *= (n - i);
  return total;
}

}  // namespace

std::vector<GroundedInstance> ground(const Domain& domain,
                                     const std::vector<std::string>& objects,
                                     std::uint64_t cap) {
  if (objects.empty()) throw std::invalid_argument("ground: object list is empty");

  std::uint64_t total = 0;
  for (const auto& action : domain.actions) {
    if (action.params.size() > objects.size()) continue;
    total += count_permutations(objects.size(), action.params.size());
    if (total > cap)
      throw std::length_error("grounding would produce " + std::to_string(total) +
                              " instances, cap is " + std::to_string(cap));
  }

  std::vector<GroundedInstance> out;
  out.reserve(total);

  for (const auto& action : domain.actions) {
    if (action.params.size() > objects.size()) continue;

    std::vector<std::string> chosen(action.params.size());
    std::vector<bool> used(objects.size(), false);

    auto instantiate = [&]() {
      std::map<std::string, std::string> binding;
      for (std::size_t i = 0; i < action.params.size(); ++i)
        binding[action.params[i]] = chosen[i];

      GroundedInstance inst;
      inst.action = {action.name, chosen};
      for (const auto& lit : action.precondition) {
        const Atom atom = substitute(lit.atom, binding);
        (lit.negated ? inst.pre_neg : inst.pre_pos).push_back(atom);
      }
      for (const auto& q : action.precondition_forall) {
        for (const auto& obj : objects) {
          auto extended = binding;
          extended[q.variable] = obj;
          const Atom atom = substitute(q.literal.atom, extended);
          (q.literal.negated ? inst.pre_neg : inst.pre_pos).push_back(atom);
        }
      }
      for (const auto& a : action.add_effects) inst.add.push_back(substitute(a, binding));
      for (const auto& d : action.delete_effects) inst.del.push_back(substitute(d, binding));
      out.push_back(std::move(inst));
    };

    // distinct-object bindings, lexicographic over the object list
    auto recurse = [&](auto&& self, std::size_t depth) -> void {
      if (depth == action.params.size()) {
        instantiate();
        return;
      }
      for (std::size_t i = 0; i < objects.size(); ++i) {
        if (used[i]) continue;
        used[i] = true;
        chosen[depth] = objects[i];
        self(self, depth + 1);
        used[i] = false;
      }
    };
    recurse(recurse, 0);
  }
  return out;
}

void validate_problem(const Problem& problem, const Domain& domain) {
  std::set<std::string> objects(problem.objects.begin(), problem.objects.end());
  auto check_atom = [&](const Atom& atom, const char* where) {
    const PredicateDecl* decl = domain.find_predicate(atom.predicate);
    if (!decl)
      throw std::invalid_argument(std::string(where) + " uses undeclared predicate " +
                                  atom.predicate);
    if (static_cast<int>(atom.args.size()) != decl->arity)
      throw std::invalid_argument(std::string(where) + ": arity mismatch for " +
                                  atom.predicate);
    for (const auto& a : atom.args)
      if (!a.starts_with("?") && !objects.contains(a))
        throw std::invalid_argument(std::string(where) + " uses unknown object " + a);
  };
  for (const auto& atom : problem.init) check_atom(atom, "init");

  auto walk = [&](auto&& self, const Condition& c) -> void {
    if (c.kind == Condition::Kind::atom)
      check_atom(c.atom, "goal");
    else
      for (const auto& child : c.children) self(self, child);
  };
  walk(walk, problem.goal);
}

bool holds(const Condition& goal, const LogicalState& state,
           const std::vector<std::string>& objects) {
  switch (goal.kind) {
    case Condition::Kind::atom:
      return state.contains({goal.atom.predicate, goal.atom.args});
    case Condition::Kind::negation:
      return !holds(goal.children[0], state, objects);
    case Condition::Kind::conjunction:
      for (const auto& child : goal.children)
        if (!holds(child, state, objects)) return false;
      return true;
    case Condition::Kind::forall: {
      for (const auto& obj : objects) {
        Condition bound = goal.children[0];
        auto bind = [&](auto&& self, Condition& c) -> void {
          if (c.kind == Condition::Kind::atom) {
            for (auto& a : c.atom.args)
              if (a == goal.variable) a = obj;
          }
          for (auto& child : c.children) self(self, child);
        };
        bind(bind, bound);
        if (!holds(bound, state, objects)) return false;
      }
      return true;
    }
  }
  return false;
}

// ---- search ----------------------------------------------------------------

namespace {

using StateBits = std::vector<std::uint64_t>;

struct StateHash {
  std::size_t operator()(const StateBits& s) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto w : s) {
      h ^= w;
      h *= 0x100000001b3ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

class AtomTable {
 public:
  int intern(const Atom& atom) {
    auto it = ids_.find(atom);
    if (it != ids_.end()) return it->second;
    const int id = static_cast<int>(atoms_.size());
    ids_.emplace(atom, id);
    atoms_.push_back(atom);
    return id;
  }
  std::optional<int> find(const Atom& atom) const {
    auto it = ids_.find(atom);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t size() const { return atoms_.size(); }

 private:
  std::map<Atom, int> ids_;
  std::vector<Atom> atoms_;
};

struct CompiledAction {
  std::size_t instance_index;
  std::vector<int> pre_pos;
  std::vector<int> pre_neg;
  std::vector<int> add;
  std::vector<int> del;
};

struct CompiledGoal {
  // expanded condition tree with atom ids (-1 = atom outside the universe)
  enum class Kind { atom, negation, conjunction };
  Kind kind = Kind::atom;
  int atom_id = -1;
  std::vector<CompiledGoal> children;
};

bool bit(const StateBits& s, int id) {
  return (s[static_cast<std::size_t>(id) >> 6] >> (id & 63)) & 1;
}
void set_bit(StateBits& s, int id) { s[static_cast<std::size_t>(id) >> 6] |= 1ULL << (id & 63); }
void clear_bit(StateBits& s, int id) {
  s[static_cast<std::size_t>(id) >> 6] &= ~(1ULL << (id & 63));
}

CompiledGoal compile_goal(const Condition& goal, const std::vector<std::string>& objects,
                          const AtomTable& atoms) {
  CompiledGoal out;
  switch (goal.kind) {
    case Condition::Kind::atom: {
      out.kind = CompiledGoal::Kind::atom;
      const auto id = atoms.find(goal.atom);
      out.atom_id = id ? *id : -1;
      return out;
    }
    case Condition::Kind::negation:
      out.kind = CompiledGoal::Kind::negation;
      out.children.push_back(compile_goal(goal.children[0], objects, atoms));
      return out;
    case Condition::Kind::conjunction:
      out.kind = CompiledGoal::Kind::conjunction;
      for (const auto& child : goal.children)
        out.children.push_back(compile_goal(child, objects, atoms));
      return out;
    case Condition::Kind::forall: {
      out.kind = CompiledGoal::Kind::conjunction;
      for (const auto& obj : objects) {
        Condition bound = goal.children[0];
        auto bind = [&](auto&& self, Condition& c) -> void {
          if (c.kind == Condition::Kind::atom) {
            for (auto& a : c.atom.args)
              if (a == goal.variable) a = obj;
          }
          for (auto& child : c.children) self(self, child);
        };
        bind(bind, bound);
        out.children.push_back(compile_goal(bound, objects, atoms));
      }
      return out;
    }
  }
  return out;
}

bool goal_satisfied(const CompiledGoal& goal, const StateBits& state) {
  switch (goal.kind) {
    case CompiledGoal::Kind::atom:
      return goal.atom_id >= 0 && bit(state, goal.atom_id);
    case CompiledGoal::Kind::negation:
      return !goal_satisfied(goal.children[0], state);
    case CompiledGoal::Kind::conjunction:
      for (const auto& child : goal.children)
        if (!goal_satisfied(child, state)) return false;
      return true;
  }
  return false;
}

// Additive delete-relaxation heuristic for the optional greedy mode.
int h_add(const StateBits& state, const std::vector<CompiledAction>& actions,
          const CompiledGoal& goal, std::size_t atom_count) {
  constexpr int kInf = 1 << 20;
  std::vector<int> cost(atom_count, kInf);
  for (std::size_t i = 0; i < atom_count; ++i)
    if (bit(state, static_cast<int>(i))) cost[i] = 0;

  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& a : actions) {
      int pre = 0;
      for (int p : a.pre_pos) {
        if (cost[p] >= kInf) {
          pre = kInf;
          break;
        }
        pre += cost[p];
      }
      if (pre >= kInf) continue;
      for (int add : a.add) {
        if (pre + 1 < cost[add]) {
          cost[add] = pre + 1;
          changed = true;
        }
      }
    }
  }

  // sum positive goal atom costs; treat non-atoms structurally
  int total = 0;
  auto walk = [&](auto&& self, const CompiledGoal& g) -> void {
    switch (g.kind) {
      case CompiledGoal::Kind::atom:
        if (g.atom_id >= 0) total += std::min(cost[g.atom_id], kInf / 4);
        else total += kInf / 4;
        return;
      case CompiledGoal::Kind::negation:
        return;  // relaxed: negations assumed reachable
      case CompiledGoal::Kind::conjunction:
        for (const auto& child : g.children) self(self, child);
        return;
    }
  };
  walk(walk, goal);
  return total;
}

}  // namespace

SolveResult solve(const Problem& problem, const Domain& domain, const SolveOptions& options) {
  const auto start = Clock::now();
  validate_problem(problem, domain);

  SolveResult result;
  if (options.budget_seconds <= 0.0) {
    result.status = SolveStatus::timeout;
    return result;
  }

  const auto instances = ground(domain, problem.objects, options.ground_cap);

  AtomTable atoms;
  for (const auto& atom : problem.init) atoms.intern(atom);
  for (const auto& inst : instances)
    for (const auto& atom : inst.add) atoms.intern(atom);

  std::vector<CompiledAction> actions;
  actions.reserve(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    CompiledAction ca;
    ca.instance_index = i;
    bool applicable = true;
    for (const auto& atom : inst.pre_pos) {
      const auto id = atoms.find(atom);
      if (!id) {
        applicable = false;  // positive precondition can never hold
        break;
      }
      ca.pre_pos.push_back(*id);
    }
    if (!applicable) continue;
    for (const auto& atom : inst.pre_neg) {
      const auto id = atoms.find(atom);
      if (id) ca.pre_neg.push_back(*id);  // unknown atoms are always false
    }
    for (const auto& atom : inst.add) ca.add.push_back(*atoms.find(atom));
    for (const auto& atom : inst.del) {
      const auto id = atoms.find(atom);
      if (id) ca.del.push_back(*id);
    }
    std::sort(ca.pre_pos.begin(), ca.pre_pos.end());
    ca.pre_pos.erase(std::unique(ca.pre_pos.begin(), ca.pre_pos.end()), ca.pre_pos.end());
    std::sort(ca.pre_neg.begin(), ca.pre_neg.end());
    ca.pre_neg.erase(std::unique(ca.pre_neg.begin(), ca.pre_neg.end()), ca.pre_neg.end());
    actions.push_back(std::move(ca));
  }

  const std::size_t words = (atoms.size() + 63) / 64;
  StateBits init(words, 0);
  for (const auto& atom : problem.init) set_bit(init, *atoms.find(atom));

  const CompiledGoal goal = compile_goal(problem.goal, problem.objects, atoms);

  struct Node {
    StateBits state;
    std::int64_t parent;
    std::size_t via;  // instance index
  };
  std::deque<Node> nodes;
  std::unordered_set<StateBits, StateHash> closed;

  auto extract = [&](std::int64_t index) {
    Plan plan;
    std::vector<std::size_t> via;
    while (index > 0) {
      via.push_back(nodes[static_cast<std::size_t>(index)].via);
      index = nodes[static_cast<std::size_t>(index)].parent;
    }
    std::reverse(via.begin(), via.end());
    for (auto v : via) plan.steps.push_back(instances[v].action);
    return plan;
  };

  auto applicable = [&](const CompiledAction& a, const StateBits& s) {
    for (int p : a.pre_pos)
      if (!bit(s, p)) return false;
    for (int p : a.pre_neg)
      if (bit(s, p)) return false;
    return true;
  };

  auto successor = [&](const CompiledAction& a, const StateBits& s) {
    StateBits next = s;
    for (int d : a.del) clear_bit(next, d);
    for (int ad : a.add) set_bit(next, ad);
    return next;
  };

  nodes.push_back({init, -1, 0});
  closed.insert(init);

  std::uint64_t expanded = 0;
  const bool greedy = options.mode == SolveOptions::Mode::greedy;

  // (h, node index) priority queue for the greedy mode
  using Entry = std::pair<int, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open_greedy;
  std::deque<std::size_t> open_bfs;
  if (greedy)
    open_greedy.emplace(h_add(init, actions, goal, atoms.size()), 0);
  else
    open_bfs.push_back(0);

  while (greedy ? !open_greedy.empty() : !open_bfs.empty()) {
    std::size_t index;
    if (greedy) {
      index = open_greedy.top().second;
      open_greedy.pop();
    } else {
      index = open_bfs.front();
      open_bfs.pop_front();
    }

    if (goal_satisfied(goal, nodes[index].state)) {
      result.status = SolveStatus::found;
      result.plan = extract(static_cast<std::int64_t>(index));
      result.plan.stats.nodes_expanded = expanded;
      result.plan.stats.wall_seconds = seconds_since(start);
      return result;
    }

    ++expanded;
    if ((expanded & 0x1ff) == 0 && seconds_since(start) > options.budget_seconds) {
      result.status = SolveStatus::timeout;
      return result;
    }

    const StateBits current = nodes[index].state;
    for (const auto& a : actions) {
      if (!applicable(a, current)) continue;
      StateBits next = successor(a, current);
      if (closed.contains(next)) continue;
      closed.insert(next);
      nodes.push_back({std::move(next), static_cast<std::int64_t>(index), a.instance_index});
      const std::size_t child = nodes.size() - 1;
      if (greedy)
        open_greedy.emplace(h_add(nodes[child].state, actions, goal, atoms.size()), child);
      else
        open_bfs.push_back(child);
    }
  }

  result.status = SolveStatus::no_plan;
  return result;
}

ValidationResult validate(const Plan& plan, const Problem& problem, const Domain& domain) {
  ValidationResult result;

  LogicalState state;
  for (const auto& atom : problem.init) state.insert({atom.predicate, atom.args});

  for (std::size_t step = 0; step < plan.steps.size(); ++step) {
    const auto& ga = plan.steps[step];
    const ActionSchema* schema = domain.find_action(ga.schema);
    if (!schema) {
      result.ok = false;
      result.failed_step = step;
      result.detail = "unknown action " + ga.schema;
      return result;
    }
    if (schema->params.size() != ga.args.size()) {
      result.ok = false;
      result.failed_step = step;
      result.detail = "argument count mismatch for " + ga.schema;
      return result;
    }
    std::map<std::string, std::string> binding;
    for (std::size_t i = 0; i < schema->params.size(); ++i)
      binding[schema->params[i]] = ga.args[i];

    auto fail = [&](const std::string& detail) {
      result.ok = false;
      result.failed_step = step;
      result.detail = detail;
    };

    for (const auto& lit : schema->precondition) {
      const Atom atom = substitute(lit.atom, binding);
      const bool present = state.contains({atom.predicate, atom.args});
      if (present == lit.negated) {
        fail("precondition " + atom.str() + " violated by " + ga.str());
        return result;
      }
    }
    for (const auto& q : schema->precondition_forall) {
      for (const auto& obj : problem.objects) {
        auto extended = binding;
        extended[q.variable] = obj;
        const Atom atom = substitute(q.literal.atom, extended);
        const bool present = state.contains({atom.predicate, atom.args});
        if (present == q.literal.negated) {
          fail("quantified precondition violated by " + ga.str());
          return result;
        }
      }
    }

    for (const auto& d : schema->delete_effects) {
      const Atom atom = substitute(d, binding);
      auto& atoms = state.atoms;
      const GroundAtom key{atom.predicate, atom.args};
      atoms.erase(std::remove(atoms.begin(), atoms.end(), key), atoms.end());
    }
    for (const auto& a : schema->add_effects) {
      const Atom atom = substitute(a, binding);
      state.insert({atom.predicate, atom.args});
    }
  }

  if (!holds(problem.goal, state, problem.objects)) {
    result.ok = false;
    result.detail = "goal not satisfied after plan execution";
  }
  return result;
}

}  // namespace pddllm::pddl
