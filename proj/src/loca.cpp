#include "pddllm/loca.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "pddllm/rng.hpp"

namespace pddllm {

using nlohmann::json;
using pddl::GroundAction;

namespace {

using Clock = std::chrono::steady_clock;

std::vector<GroundAtom> instantiate_effects(const pddl::ActionSchema& schema,
                                            const GroundAction& action,
                                            const std::vector<pddl::Atom>& atoms) {
  std::map<std::string, std::string> binding;
  for (std::size_t i = 0; i < schema.params.size(); ++i)
    binding[schema.params[i]] = action.args[i];
  std::vector<GroundAtom> out;
  for (const auto& atom : atoms) {
    GroundAtom ga{atom.predicate, atom.args};
    for (auto& a : ga.args) {
      auto it = binding.find(a);
      if (it != binding.end()) a = it->second;
    }
    out.push_back(std::move(ga));
  }
  return out;
}

// First-order base whose constraints an effect atom contributes, or nullptr
// for quantified forms (checked after placement).
const PredicateDef* constraint_base(const PredicateLibrary& library, const std::string& name,
                                    bool& complement) {
  const PredicateDef& p = library.at(name);
  if (p.order == PredicateOrder::first) {
    complement = false;
    return &p;
  }
  if (p.form->op == HigherOp::negation) {
    const PredicateDef& base = library.at(p.form->base);
    if (base.order == PredicateOrder::first) {
      complement = true;
      return &base;
    }
  }
  return nullptr;
}

}  // namespace

ConstraintSet constraints_for_action(const GroundAction& action, const pddl::Domain& domain,
                                     const PredicateLibrary& library) {
  const pddl::ActionSchema* schema = domain.find_action(action.schema);
  if (!schema) throw std::invalid_argument("unknown action " + action.schema);
  if (schema->params.size() != action.args.size())
    throw std::invalid_argument("argument count mismatch for " + action.schema);

  ConstraintSet cs;
  cs.source_action = action;
  cs.add_atoms = instantiate_effects(*schema, action, schema->add_effects);
  cs.delete_atoms = instantiate_effects(*schema, action, schema->delete_effects);

  bool saw_quantified_only = false;
  std::vector<std::vector<std::string>> group_objects;
  for (const auto& atom : cs.add_atoms) {
    bool complement = false;
    const PredicateDef* base = constraint_base(library, atom.predicate, complement);
    if (!base) {
      saw_quantified_only = true;
      continue;
    }
    ConstraintGroup group;
    group.complement = complement;
    for (const auto& c : base->constraint) {
      PoseConstraint pc;
      pc.feature = c.feature;
      pc.intervals = c.intervals;
      pc.arg0 = atom.args.empty() ? "" : atom.args[0];
      pc.arg1 = atom.args.size() > 1 ? atom.args[1] : "";
      group.constraints.push_back(std::move(pc));
    }
    if (!group.constraints.empty()) {
      group_objects.push_back(atom.args);
      cs.groups.push_back(std::move(group));
    }
  }

  if (cs.groups.empty()) {
    if (saw_quantified_only)
      throw UngroundableEffect("action " + action.str() +
                               ": effects carry no first-order constraint to ground");
    cs.target_object = action.args.empty() ? "" : action.args[0];
    return cs;  // no-op placement
  }

  // the moved object must appear in every constraint-bearing effect
  std::set<std::string> common(group_objects.front().begin(), group_objects.front().end());
  for (const auto& objs : group_objects) {
    std::set<std::string> next;
    for (const auto& o : objs)
      if (common.contains(o)) next.insert(o);
    common = std::move(next);
  }
  if (common.empty())
    throw UngroundableEffect("action " + action.str() +
                             ": effect constraints share no object to move");

  // prefer a shared object that leads an effect atom
  std::string target;
  for (const auto& objs : group_objects)
    if (!objs.empty() && common.contains(objs.front())) {
      target = objs.front();
      break;
    }
  if (target.empty()) target = *common.begin();
  cs.target_object = target;
  return cs;
}

namespace {

struct AxisSampler {
  // value interval union over the feature, mapped onto a pose axis
  std::vector<Interval> intervals;
  int axis = 0;             // 0:x 1:y 2:z
  double base = 0.0;        // reference coordinate
  double sign = 1.0;        // target = base + sign * value
  bool height_mode = false; // z_above_table: z = table + v + h/2
};

int axis_of(const std::string& feature) {
  if (feature == "delta_x" || feature == "pos_x") return 0;
  if (feature == "delta_y" || feature == "pos_y") return 1;
  return 2;
}

bool positional(const std::string& feature) {
  return feature.starts_with("delta_x") || feature.starts_with("delta_y") ||
         feature.starts_with("delta_z") || feature == "z_above_table" ||
         feature.starts_with("pos_");
}

double sample_union(Rng& rng, const std::vector<Interval>& intervals) {
  double total = 0.0;
  for (const auto& iv : intervals) total += iv.hi - iv.lo;
  double pick = rng.uniform(0.0, total);
  for (const auto& iv : intervals) {
    const double len = iv.hi - iv.lo;
    if (pick <= len) return iv.lo + pick;
    pick -= len;
  }
  return intervals.back().hi;
}

bool group_holds(const ConstraintGroup& group, const Scene& scene) {
  for (const auto& pc : group.constraints) {
    std::vector<std::string> args = {pc.arg0};
    if (!pc.arg1.empty()) args.push_back(pc.arg1);
    const double v = feature_value(pc.feature, scene, args);
    bool inside = false;
    for (const auto& iv : pc.intervals)
      if (iv.contains(v)) inside = true;
    if (!inside) return false;
  }
  return true;
}

}  // namespace

std::optional<TargetPose> solve_placement(const ConstraintSet& cs, const Scene& scene,
                                          const PredicateLibrary& library, std::uint64_t seed,
                                          std::size_t max_samples) {
  if (cs.target_object.empty() && cs.groups.empty()) return std::nullopt;
  const ObjectState& target = scene.at(cs.target_object.empty() ? cs.source_action.args.at(0)
                                                                : cs.target_object);

  if (cs.groups.empty())
    return TargetPose{target.position.x, target.position.y, target.position.z, target.yaw};

  // positive constraints shape the sampling box; complements only reject
  std::vector<AxisSampler> samplers;
  for (const auto& group : cs.groups) {
    if (group.complement) continue;
    for (const auto& pc : group.constraints) {
      if (!positional(pc.feature)) continue;
      AxisSampler sampler;
      sampler.intervals = pc.intervals;
      sampler.axis = axis_of(pc.feature);
      if (pc.feature == "z_above_table") {
        sampler.height_mode = true;
      } else if (pc.feature.starts_with("pos_")) {
        sampler.base = 0.0;
      } else {
        // delta feature: value = f(arg0) - f(arg1)
        const bool target_is_first = pc.arg0 == cs.target_object;
        const ObjectState& reference =
            scene.at(target_is_first ? pc.arg1 : pc.arg0);
        const double ref_coord = sampler.axis == 0   ? reference.position.x
                                 : sampler.axis == 1 ? reference.position.y
                                                     : reference.position.z;
        sampler.base = ref_coord;
        sampler.sign = target_is_first ? 1.0 : -1.0;
      }
      samplers.push_back(std::move(sampler));
    }
  }

  Rng rng(seed);
  const Aabb& ws = scene.workspace;
  const Vec3 half = target.size * 0.5;

  for (std::size_t attempt = 0; attempt < max_samples; ++attempt) {
    TargetPose pose{rng.uniform(ws.lo.x + half.x, ws.hi.x - half.x),
                    rng.uniform(ws.lo.y + half.y, ws.hi.y - half.y),
                    rng.uniform(ws.lo.z + half.z, ws.hi.z - half.z), target.yaw};
    bool axis_set[3] = {false, false, false};
    for (const auto& sampler : samplers) {
      if (axis_set[sampler.axis]) continue;  // first positive constraint wins the axis
      const double v = sample_union(rng, sampler.intervals);
      double coord;
      if (sampler.height_mode)
        coord = scene.table_height + v + half.z;
      else
        coord = sampler.base + sampler.sign * v;
      if (sampler.axis == 0) pose.x = coord;
      else if (sampler.axis == 1) pose.y = coord;
      else pose.z = coord;
      axis_set[sampler.axis] = true;
    }

    PlacementResult placed = apply_placement(scene, target.id, pose);
    if (!placed.ok()) continue;
    const Scene& moved = *placed.scene;

    bool ok = true;
    for (const auto& group : cs.groups) {
      const bool holds = group_holds(group, moved);
      if (group.complement == holds) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;

    for (const auto& atom : cs.add_atoms) {
      if (!eval_predicate(library, atom.predicate, atom.args, moved)) {
        ok = false;
        break;
      }
    }
    if (ok) return pose;
  }
  return std::nullopt;
}

// ---- execution --------------------------------------------------------------

namespace {

double transit_height(const Scene& scene, const ObjectState& moved) {
  double top = scene.table_height;
  for (const auto& o : scene.objects) top = std::max(top, o.top());
  const double clearance = 0.03;
  const double z = top + clearance + moved.size.z * 0.5;
  return std::min(z, scene.workspace.hi.z - moved.size.z * 0.5);
}

bool segment_collides(const Scene& scene, const std::string& id, const Vec3& from,
                      const Vec3& to) {
  const ObjectState& moved = scene.at(id);
  constexpr int kSamples = 8;
  for (int i = 0; i <= kSamples; ++i) {
    const double t = static_cast<double>(i) / kSamples;
    ObjectState ghost = moved;
    ghost.position = lerp(from, to, t);
    for (const auto& other : scene.objects) {
      if (other.id == id) continue;
      if (penetration_depth(ghost.box(), other.box()) > kPenetrationTol) return true;
    }
  }
  return false;
}

std::vector<Waypoint> motion_waypoints(const Scene& scene, const std::string& id,
                                       const TargetPose& pose, bool& collision) {
  const ObjectState& moved = scene.at(id);
  const Vec3 start = moved.position;
  const Vec3 goal{pose.x, pose.y, pose.z};
  const double tz = std::max({transit_height(scene, moved), start.z, goal.z});
  const Vec3 up{start.x, start.y, tz};
  const Vec3 across{goal.x, goal.y, tz};

  collision = segment_collides(scene, id, start, up) ||
              segment_collides(scene, id, up, across) ||
              segment_collides(scene, id, across, goal);

  std::vector<Waypoint> waypoints;
  for (const Vec3& p : {start, up, across, goal})
    waypoints.push_back({p.x, p.y, p.z, pose.yaw});
  return waypoints;
}

}  // namespace

ExecutionTrace execute_plan(const pddl::Plan& plan, const Scene& scene,
                            const pddl::Domain& domain, const PredicateLibrary& library,
                            const pddl::Problem& problem, const ExecutionOptions& options) {
  const auto start = Clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - start).count(); };
  auto remaining = [&] { return options.budget_seconds - elapsed(); };

  ExecutionTrace trace;
  trace.final_scene = scene;
  if (options.budget_seconds <= 0.0) {
    trace.failure_reason = "timeout";
    return trace;
  }

  Scene current = scene;
  std::vector<GroundAction> steps = plan.steps;
  std::size_t index = 0;
  std::uint64_t placement_counter = 0;

  auto fail = [&](const std::string& reason) {
    trace.outcome = ExecutionOutcome::failed;
    trace.failed_step = trace.executed_actions;
    trace.failure_reason = reason;
    trace.final_scene = current;
    return trace;
  };

  auto replan = [&](const std::string& why) -> bool {
    if (trace.replans >= options.max_replans) return false;
    ++trace.replans;
    trace.replan_steps.push_back(trace.executed_actions);
    (void)why;
    pddl::Problem updated = problem;
    updated.init.clear();
    for (const auto& atom : ground_state(current, library).atoms)
      updated.init.push_back({atom.predicate, atom.args});
    pddl::SolveOptions solve_options;
    solve_options.budget_seconds = remaining();
    const auto result = pddl::solve(updated, domain, solve_options);
    if (result.status != pddl::SolveStatus::found) return false;
    steps = result.plan.steps;
    index = 0;
    return true;
  };

  while (true) {
    if (remaining() <= 0.0) return fail("timeout");

    if (index >= steps.size()) {
      // plan exhausted: the goal scene must ground to the goal state
      const LogicalState state = ground_state(current, library);
      if (pddl::holds(problem.goal, state, problem.objects)) {
        trace.outcome = ExecutionOutcome::success;
        trace.final_scene = current;
        return trace;
      }
      if (!replan("goal not reached")) return fail("no-plan");
      continue;
    }

    const GroundAction action = steps[index];
    ConstraintSet cs;
    try {
      cs = constraints_for_action(action, domain, library);
    } catch (const UngroundableEffect& e) {
      return fail(std::string("ungroundable-effect: ") + e.what());
    }

    if (cs.groups.empty() && cs.add_atoms.empty()) {
      // nothing to place; deletions must already follow from geometry
      bool aligned = true;
      for (const auto& atom : cs.delete_atoms)
        if (eval_predicate(library, atom.predicate, atom.args, current)) aligned = false;
      ++trace.executed_actions;
      if (aligned) {
        ++trace.aligned_actions;
        ++index;
        continue;
      }
      if (!replan("no-op step left deletions satisfied")) return fail("no-plan");
      continue;
    }

    const auto pose = solve_placement(cs, current, library,
                                      derive_seed(options.seed, "placement", placement_counter++),
                                      options.max_placement_samples);
    if (!pose) {
      if (!replan("placement unsatisfiable")) return fail("unsatisfiable");
      continue;
    }

    bool collision = false;
    auto waypoints = motion_waypoints(current, cs.target_object, *pose, collision);
    if (collision) {
      if (!replan("motion collides")) return fail("collision");
      continue;
    }

    PlacementResult placed = apply_placement(current, cs.target_object, *pose);
    if (!placed.ok()) {
      if (!replan("placement rejected")) return fail("unsatisfiable");
      continue;
    }
    current = std::move(*placed.scene);

    bool aligned = true;
    for (const auto& atom : cs.add_atoms)
      if (!eval_predicate(library, atom.predicate, atom.args, current)) aligned = false;
    for (const auto& atom : cs.delete_atoms)
      if (eval_predicate(library, atom.predicate, atom.args, current)) aligned = false;
    ++trace.executed_actions;
    if (aligned) ++trace.aligned_actions;

    ExecutionSegment segment;
    segment.action = action;
    segment.scene_after = current;
    segment.waypoints = std::move(waypoints);
    trace.segments.push_back(std::move(segment));

    if (!aligned) {
      if (!replan("post-state diverged from effects")) return fail("misaligned");
      continue;
    }
    ++index;
  }
}

std::string trace_to_json_text(const ExecutionTrace& trace) {
  json segments = json::array();
  for (const auto& seg : trace.segments) {
    json waypoints = json::array();
    for (const auto& w : seg.waypoints) waypoints.push_back(json::array({w.x, w.y, w.z, w.yaw}));
    json pose = json::array();
    if (!seg.waypoints.empty()) {
      const Waypoint& last = seg.waypoints.back();
      pose = json::array({last.x, last.y, last.z, last.yaw});
    }
    segments.push_back(json{{"action", seg.action.str()},
                            {"pose", pose},
                            {"waypoints", waypoints}});
  }
  json j{{"outcome", trace.outcome == ExecutionOutcome::success ? "success" : "failed"},
         {"replans", trace.replans},
         {"replan_steps", trace.replan_steps},
         {"executed_actions", trace.executed_actions},
         {"aligned_actions", trace.aligned_actions},
         {"segments", segments}};
  if (trace.outcome != ExecutionOutcome::success) {
    j["failed_step"] = trace.failed_step;
    j["failure_reason"] = trace.failure_reason;
  }
  return j.dump(2) + "\n";
}

void save_trace(const ExecutionTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << trace_to_json_text(trace);
}

}  // namespace pddllm
