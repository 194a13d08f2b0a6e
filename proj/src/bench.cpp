#include "pddllm/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

namespace pddllm {

using nlohmann::json;
using pddl::Atom;
using pddl::Condition;
using pddl::Problem;

namespace {

constexpr double kCube = 0.04;

using Clock = std::chrono::steady_clock;
double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

Scene base_scene() {
  Scene scene;
  scene.workspace = {{0.0, 0.0, 0.0}, {0.6, 0.6, 0.4}};
  scene.table_height = 0.0;
  return scene;
}

const std::vector<Vec3>& palette() {
  static const std::vector<Vec3> colors = {
      {0.9, 0.1, 0.1}, {0.1, 0.9, 0.1}, {0.1, 0.1, 0.9}, {0.9, 0.9, 0.1}, {0.9, 0.1, 0.9},
      {0.1, 0.9, 0.9}, {0.8, 0.5, 0.2}, {0.5, 0.2, 0.8}, {0.2, 0.8, 0.5}, {0.7, 0.7, 0.7},
      {0.6, 0.3, 0.1}, {0.3, 0.1, 0.6}, {0.1, 0.6, 0.3}, {0.8, 0.2, 0.5}, {0.5, 0.8, 0.2},
      {0.2, 0.5, 0.8}, {0.4, 0.4, 0.9}, {0.9, 0.4, 0.4}, {0.4, 0.9, 0.4}, {0.6, 0.6, 0.2}};
  return colors;
}

ObjectState make_block(const std::string& id, double x, double y, double z, const Vec3& color) {
  ObjectState block;
  block.id = id;
  block.position = {x, y, z};
  block.size = {kCube, kCube, kCube};
  block.color = color;
  return block;
}

// Builds continuous recordings: the moved block follows a lift-translate-
// lower path sampled densely enough to reach the requested step count.
class DemoBuilder {
 public:
  DemoBuilder(Scene scene, std::string task) : scene_(std::move(scene)) {
    traj_.task_description = std::move(task);
    push();
  }

  void hold(int steps) {
    for (int i = 0; i < steps; ++i) push();
  }

  void move_block(const std::string& id, const Vec3& target, int steps) {
    ObjectState* moved = nullptr;
    for (auto& o : scene_.objects)
      if (o.id == id) moved = &o;
    if (!moved) throw std::invalid_argument("demo: unknown block " + id);

    const Vec3 start = moved->position;
    const double tz = 0.30;
    const Vec3 up{start.x, start.y, tz};
    const Vec3 across{target.x, target.y, tz};
    const int leg = std::max(steps / 3, 2);
    for (int i = 1; i <= leg; ++i) {
      moved->position = lerp(start, up, static_cast<double>(i) / leg);
      push();
    }
    for (int i = 1; i <= leg; ++i) {
      moved->position = lerp(up, across, static_cast<double>(i) / leg);
      push();
    }
    for (int i = 1; i <= leg; ++i) {
      moved->position = lerp(across, target, static_cast<double>(i) / leg);
      push();
    }
    moved->position = target;
  }

  Trajectory finish(std::size_t min_steps) {
    while (traj_.steps.size() < min_steps) push();
    return traj_;
  }

 private:
  void push() {
    Trajectory::Step step;
    step.t = 0.01 * static_cast<double>(traj_.steps.size());
    step.scene = scene_;
    const ObjectState& last = scene_.objects.front();
    step.ee = {last.position.x, last.position.y, last.position.z + 0.06, 0.0};
    traj_.steps.push_back(std::move(step));
  }

  Scene scene_;
  Trajectory traj_;
};

}  // namespace

Trajectory make_stack_demo(const DemoOptions& options) {
  Scene scene = base_scene();
  const int n = std::max(options.blocks, 2);
  for (int i = 0; i < n; ++i)
    scene.objects.push_back(make_block("b" + std::to_string(i + 1), 0.10 + 0.08 * i,
                                       (i % 2) ? 0.18 : 0.10, kCube / 2,
                                       palette()[i % palette().size()]));
  scene.sort_objects();

  DemoBuilder demo(scene, "stack the blocks into a tower");
  const int moves = n - 1;
  const int per_move = static_cast<int>(options.min_steps) / std::max(moves, 1) + 60;
  const Vec3 base = scene.at("b1").position;
  demo.hold(30);
  for (int i = 2; i <= n; ++i) {
    const double z = kCube / 2 + kCube * (i - 1);
    demo.move_block("b" + std::to_string(i), {base.x, base.y, z}, per_move - 60);
    demo.hold(30);
  }
  return demo.finish(options.min_steps);
}

Trajectory make_unstack_demo(const DemoOptions& options) {
  Scene scene = base_scene();
  const int n = std::max(options.blocks, 2);
  // b<n> on the table, b1 on top
  for (int i = 0; i < n; ++i)
    scene.objects.push_back(make_block("b" + std::to_string(i + 1), 0.18, 0.18,
                                       kCube / 2 + kCube * (n - 1 - i),
                                       palette()[i % palette().size()]));
  scene.sort_objects();

  DemoBuilder demo(scene, "unstack the blocks onto the table");
  const int moves = n - 1;
  const int per_move = static_cast<int>(options.min_steps) / std::max(moves, 1) + 60;
  demo.hold(30);
  for (int i = 1; i < n; ++i) {
    const double x = 0.18 + 0.16 * i;
    const double y = (i % 2) ? 0.10 : 0.26;
    demo.move_block("b" + std::to_string(i), {x, y, kCube / 2}, per_move - 60);
    demo.hold(30);
  }
  return demo.finish(options.min_steps);
}

Trajectory make_align_demo(const DemoOptions& options) {
  Scene scene = base_scene();
  const int n = std::max(options.blocks, 2);
  for (int i = 0; i < n; ++i)
    scene.objects.push_back(make_block("b" + std::to_string(i + 1), 0.10 + 0.16 * i,
                                       0.10 + 0.08 * i, kCube / 2,
                                       palette()[i % palette().size()]));
  scene.sort_objects();

  DemoBuilder demo(scene, "align the blocks in a row");
  const int moves = n - 1;
  const int per_move = static_cast<int>(options.min_steps) / std::max(moves, 1) + 60;
  const Vec3 base = scene.at("b1").position;
  demo.hold(30);
  for (int i = 2; i <= n; ++i) {
    demo.move_block("b" + std::to_string(i),
                    {base.x + kCube * (i - 1), base.y, kCube / 2}, per_move - 60);
    demo.hold(30);
  }
  return demo.finish(options.min_steps);
}

Trajectory make_color_demo(const DemoOptions& options) {
  Scene scene = base_scene();
  const int reds = std::max(options.blocks - 1, 2);
  for (int i = 0; i < reds; ++i)
    scene.objects.push_back(make_block("r" + std::to_string(i + 1), 0.10 + 0.16 * i, 0.10,
                                       kCube / 2, {0.9, 0.1, 0.1}));
  scene.objects.push_back(make_block("z1", 0.18, 0.26, kCube / 2, {0.1, 0.1, 0.9}));
  scene.sort_objects();

  DemoBuilder demo(scene, "sort the blocks into stacks by color");
  const int per_move = static_cast<int>(options.min_steps) / std::max(reds - 1, 1) + 60;
  const Vec3 base = scene.at("r1").position;
  demo.hold(30);
  for (int i = 2; i <= reds; ++i) {
    demo.move_block("r" + std::to_string(i), {base.x, base.y, kCube / 2 + kCube * (i - 1)},
                    per_move - 60);
    demo.hold(30);
  }
  return demo.finish(options.min_steps);
}

// ---- canonical bindings ------------------------------------------------

namespace {

bool interval_union_contains(const std::vector<Interval>& ivs, double v) {
  for (const auto& iv : ivs)
    if (iv.contains(v)) return true;
  return false;
}

bool all_positive(const std::vector<Interval>& ivs) {
  return std::all_of(ivs.begin(), ivs.end(), [](const Interval& iv) { return iv.lo >= 0.0; });
}

const FeatureConstraint* constraint_on(const PredicateDef& p, const std::string& feature) {
  for (const auto& c : p.constraint)
    if (c.feature == feature) return &c;
  return nullptr;
}

}  // namespace

CanonicalBindings bind_canonical(const PredicateLibrary& library) {
  CanonicalBindings bindings;
  std::string stacked, on_table, beside, similar;

  for (const auto& p : library.predicates()) {
    if (p.order != PredicateOrder::first || !p.relevant) continue;
    if (p.arity == 2) {
      const FeatureConstraint* dz = constraint_on(p, "delta_z");
      const FeatureConstraint* dx = constraint_on(p, "delta_x");
      const FeatureConstraint* dy = constraint_on(p, "delta_y");
      if (dz && all_positive(dz->intervals) && !interval_union_contains(dz->intervals, 0.0) &&
          (!dx || interval_union_contains(dx->intervals, 0.0)) &&
          (!dy || interval_union_contains(dy->intervals, 0.0)) && stacked.empty())
        stacked = p.name;
      if (dx && all_positive(dx->intervals) && !interval_union_contains(dx->intervals, 0.0) &&
          (!dy || interval_union_contains(dy->intervals, 0.0)) &&
          (!dz || interval_union_contains(dz->intervals, 0.0)) && beside.empty())
        beside = p.name;
      const FeatureConstraint* dr = constraint_on(p, "delta_color_r");
      if (dr && interval_union_contains(dr->intervals, 0.0) && similar.empty()) {
        bool all_zero = true;
        for (const auto& c : p.constraint)
          if (!interval_union_contains(c.intervals, 0.0)) all_zero = false;
        if (all_zero) similar = p.name;
      }
    }
    if (p.arity == 1) {
      const FeatureConstraint* h = constraint_on(p, "z_above_table");
      if (h && interval_union_contains(h->intervals, 0.0) && on_table.empty()) on_table = p.name;
    }
  }

  if (!stacked.empty()) bindings.stacked_on = stacked;
  if (!on_table.empty()) bindings.on_table = on_table;
  if (!beside.empty()) bindings.beside = beside;
  if (!similar.empty()) bindings.similar_color = similar;

  // higher-order companions of the stacking relation
  for (const auto& p : library.predicates()) {
    if (p.order != PredicateOrder::higher || !p.form) continue;
    if (p.form->base == bindings.stacked_on) {
      if (p.form->op == HigherOp::negation) bindings.not_stacked_on = p.name;
      if (p.form->op == HigherOp::forall_not && p.form->position == 0)
        bindings.clear_of = p.name;
      if (p.form->op == HigherOp::forall_not && p.form->position == 1)
        bindings.not_resting_on_any = p.name;
    }
    if (p.form->base == bindings.on_table && p.form->op == HigherOp::negation)
      bindings.not_on_table = p.name;
  }
  return bindings;
}

// ---- task generation ---------------------------------------------------

std::string to_string(TaskCategory category) {
  switch (category) {
    case TaskCategory::stacking: return "stacking";
    case TaskCategory::unstacking: return "unstacking";
    case TaskCategory::rearrangement: return "rearrangement";
    case TaskCategory::alignment: return "alignment";
    case TaskCategory::color_classification: return "color-classification";
    case TaskCategory::tower_of_hanoi: return "tower-of-hanoi";
  }
  return "unknown";
}

std::optional<TaskCategory> category_from_string(const std::string& name) {
  for (TaskCategory c :
       {TaskCategory::stacking, TaskCategory::unstacking, TaskCategory::rearrangement,
        TaskCategory::alignment, TaskCategory::color_classification,
        TaskCategory::tower_of_hanoi})
    if (to_string(c) == name) return c;
  return std::nullopt;
}

void TaskSpec::validate() const {
  int lo = 3, hi = 20;
  if (category == TaskCategory::tower_of_hanoi) hi = 10;
  if (category == TaskCategory::alignment) hi = 8;  // a spaced row must fit the table
  if (n_objects < lo || n_objects > hi)
    throw std::invalid_argument("task " + to_string(category) + ": n_objects " +
                                std::to_string(n_objects) + " outside [" + std::to_string(lo) +
                                ", " + std::to_string(hi) + "]");
  if (time_limit_seconds <= 0.0)
    throw std::invalid_argument("task time limit must be positive");
}

const pddl::Domain& hanoi_domain() {
  static const pddl::Domain domain = [] {
    pddl::ActionSchema move;
    move.name = "move";
    move.params = {"?disc", "?from", "?to"};
    move.precondition = {{{"smaller", {"?to", "?disc"}}, false},
                         {{"on", {"?disc", "?from"}}, false},
                         {{"clear", {"?disc"}}, false},
                         {{"clear", {"?to"}}, false}};
    move.add_effects = {{"clear", {"?from"}}, {"on", {"?disc", "?to"}}};
    move.delete_effects = {{"clear", {"?to"}}, {"on", {"?disc", "?from"}}};

    pddl::Domain d;
    d.name = "hanoi";
    d.predicates = {{"clear", 1}, {"on", 2}, {"smaller", 2}};
    d.actions.push_back(std::move(move));
    d.validate();
    return d;
  }();
  return domain;
}

namespace {

std::vector<Vec3> scatter_slots(Rng& rng, int n, double x_max = 0.52) {
  std::vector<Vec3> slots;
  for (double x = 0.08; x <= x_max + 1e-9; x += 0.10)
    for (double y = 0.08; y <= 0.52 + 1e-9; y += 0.10) slots.push_back({x, y, kCube / 2});
  for (std::size_t i = slots.size(); i > 1; --i)
    std::swap(slots[i - 1], slots[rng.uniform_index(i)]);
  slots.resize(static_cast<std::size_t>(n));
  return slots;
}

std::vector<int> permutation(Rng& rng, int n) {
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = perm.size(); i > 1; --i)
    std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
  return perm;
}

std::vector<std::vector<int>> random_towers(Rng& rng, int n) {
  const std::vector<int> perm = permutation(rng, n);
  std::vector<std::vector<int>> towers;
  std::size_t i = 0;
  while (i < perm.size()) {
    const std::size_t height = 1 + rng.uniform_index(3);  // 1..3 blocks
    std::vector<int> tower;
    for (std::size_t k = 0; k < height && i < perm.size(); ++k) tower.push_back(perm[i++]);
    towers.push_back(std::move(tower));
  }
  return towers;
}

std::string block_id(int index) { return "b" + std::to_string(index + 1); }

Scene towers_scene(Rng& rng, const std::vector<std::vector<int>>& towers, int n,
                   const std::vector<Vec3>& colors) {
  Scene scene = base_scene();
  auto slots = scatter_slots(rng, static_cast<int>(towers.size()));
  for (std::size_t t = 0; t < towers.size(); ++t) {
    for (std::size_t level = 0; level < towers[t].size(); ++level) {
      const int b = towers[t][level];
      scene.objects.push_back(make_block(block_id(b), slots[t].x, slots[t].y,
                                         kCube / 2 + kCube * static_cast<double>(level),
                                         colors[static_cast<std::size_t>(b)]));
    }
  }
  (void)n;
  scene.sort_objects();
  return scene;
}

Condition chain_goal(const std::vector<std::vector<int>>& towers,
                     const CanonicalBindings& bindings, bool with_table_atoms) {
  std::vector<Condition> atoms;
  for (const auto& tower : towers) {
    if (with_table_atoms)
      atoms.push_back(Condition::make_atom({bindings.on_table, {block_id(tower[0])}}));
    for (std::size_t level = 0; level + 1 < tower.size(); ++level)
      atoms.push_back(Condition::make_atom(
          {bindings.stacked_on, {block_id(tower[level + 1]), block_id(tower[level])}}));
  }
  return Condition::make_and(std::move(atoms));
}

GeneratedTask hanoi_task(const TaskSpec& spec) {
  GeneratedTask task;
  task.spec = spec;
  task.symbolic_only = true;

  const int n = spec.n_objects;
  Problem problem;
  problem.name = "hanoi_" + std::to_string(n);
  problem.domain_name = "hanoi";
  for (int i = 1; i <= n; ++i) problem.objects.push_back("d" + std::to_string(i));
  problem.objects.insert(problem.objects.end(), {"peg1", "peg2", "peg3"});

  // d1 is the largest disc and rests on peg1
  problem.init.push_back({"on", {"d1", "peg1"}});
  for (int i = 2; i <= n; ++i)
    problem.init.push_back({"on", {"d" + std::to_string(i), "d" + std::to_string(i - 1)}});
  problem.init.push_back({"clear", {"d" + std::to_string(n)}});
  problem.init.push_back({"clear", {"peg2"}});
  problem.init.push_back({"clear", {"peg3"}});
  for (int i = 1; i <= n; ++i)
    for (const char* peg : {"peg1", "peg2", "peg3"})
      problem.init.push_back({"smaller", {peg, "d" + std::to_string(i)}});
  for (int i = 1; i <= n; ++i)
    for (int j = i + 1; j <= n; ++j)
      problem.init.push_back({"smaller", {"d" + std::to_string(i), "d" + std::to_string(j)}});

  std::vector<Condition> goal;
  goal.push_back(Condition::make_atom({"on", {"d1", "peg3"}}));
  for (int i = 2; i <= n; ++i)
    goal.push_back(
        Condition::make_atom({"on", {"d" + std::to_string(i), "d" + std::to_string(i - 1)}}));
  Problem with_goal = problem;
  with_goal.goal = Condition::make_and(std::move(goal));
  task.problem = std::move(with_goal);

  // decorative desk scene: three pads with the discs stacked on the first
  Scene scene = base_scene();
  const double pad_x[3] = {0.12, 0.30, 0.48};
  for (int pegno = 0; pegno < 3; ++pegno) {
    ObjectState pad;
    pad.id = "peg" + std::to_string(pegno + 1);
    pad.position = {pad_x[pegno], 0.30, 0.005};
    pad.size = {0.08, 0.08, 0.01};
    pad.color = {0.4, 0.3, 0.2};
    scene.objects.push_back(pad);
  }
  double z = 0.01;
  for (int i = 1; i <= n; ++i) {
    const double side = 0.07 - 0.005 * (i - 1);
    ObjectState disc;
    disc.id = "d" + std::to_string(i);
    disc.position = {pad_x[0], 0.30, z + 0.01};
    disc.size = {side, side, 0.02};
    disc.color = palette()[static_cast<std::size_t>(i - 1) % palette().size()];
    scene.objects.push_back(disc);
    z += 0.02;
  }
  scene.sort_objects();
  task.scene = std::move(scene);
  return task;
}

}  // namespace

GeneratedTask generate_task(const TaskSpec& spec, const CanonicalBindings& bindings) {
  spec.validate();
  if (spec.category == TaskCategory::tower_of_hanoi) return hanoi_task(spec);

  Rng rng(derive_seed(spec.seed, "task", static_cast<std::uint64_t>(spec.category)));
  const int n = spec.n_objects;

  std::vector<Vec3> colors;
  for (int i = 0; i < n; ++i) colors.push_back(palette()[static_cast<std::size_t>(i) % palette().size()]);

  GeneratedTask task;
  task.spec = spec;
  Problem problem;
  problem.domain_name = "induced";
  for (int i = 0; i < n; ++i) problem.objects.push_back(block_id(i));

  switch (spec.category) {
    case TaskCategory::stacking: {
      Scene scene = base_scene();
      const auto slots = scatter_slots(rng, n);
      for (int i = 0; i < n; ++i)
        scene.objects.push_back(
            make_block(block_id(i), slots[static_cast<std::size_t>(i)].x,
                       slots[static_cast<std::size_t>(i)].y, kCube / 2,
                       colors[static_cast<std::size_t>(i)]));
      scene.sort_objects();
      const auto perm = permutation(rng, n);
      std::vector<std::vector<int>> tower = {perm};
      problem.name = "stacking_" + std::to_string(spec.seed);
      problem.goal = chain_goal(tower, bindings, false);
      task.scene = std::move(scene);
      break;
    }
    case TaskCategory::unstacking: {
      const auto towers = random_towers(rng, n);
      task.scene = towers_scene(rng, towers, n, colors);
      problem.name = "unstacking_" + std::to_string(spec.seed);
      std::vector<Condition> atoms;
      for (int i = 0; i < n; ++i)
        atoms.push_back(Condition::make_atom({bindings.on_table, {block_id(i)}}));
      problem.goal = Condition::make_and(std::move(atoms));
      break;
    }
    case TaskCategory::rearrangement: {
      const auto initial = random_towers(rng, n);
      task.scene = towers_scene(rng, initial, n, colors);
      const auto target = random_towers(rng, n);
      problem.name = "rearrangement_" + std::to_string(spec.seed);
      problem.goal = chain_goal(target, bindings, true);
      break;
    }
    case TaskCategory::alignment: {
      Scene scene = base_scene();
      const auto slots = scatter_slots(rng, n, 0.22);  // keep room for the row
      for (int i = 0; i < n; ++i)
        scene.objects.push_back(
            make_block(block_id(i), slots[static_cast<std::size_t>(i)].x,
                       slots[static_cast<std::size_t>(i)].y, kCube / 2,
                       colors[static_cast<std::size_t>(i)]));
      scene.sort_objects();
      const auto perm = permutation(rng, n);
      problem.name = "alignment_" + std::to_string(spec.seed);
      std::vector<Condition> atoms;
      for (std::size_t i = 0; i + 1 < perm.size(); ++i)
        atoms.push_back(Condition::make_atom(
            {bindings.beside, {block_id(perm[i + 1]), block_id(perm[i])}}));
      problem.goal = Condition::make_and(std::move(atoms));
      break;
    }
    case TaskCategory::color_classification: {
      Scene scene = base_scene();
      const auto slots = scatter_slots(rng, n);
      std::vector<std::vector<int>> groups(2);
      for (int i = 0; i < n; ++i) {
        const int group = i % 2;
        groups[static_cast<std::size_t>(group)].push_back(i);
        const Vec3 color = group == 0 ? Vec3{0.9, 0.1, 0.1} : Vec3{0.1, 0.1, 0.9};
        scene.objects.push_back(make_block(block_id(i), slots[static_cast<std::size_t>(i)].x,
                                           slots[static_cast<std::size_t>(i)].y, kCube / 2,
                                           color));
      }
      scene.sort_objects();
      problem.name = "color_" + std::to_string(spec.seed);
      std::vector<Condition> atoms;
      for (const auto& group : groups)
        for (std::size_t i = 0; i + 1 < group.size(); ++i)
          atoms.push_back(Condition::make_atom(
              {bindings.stacked_on, {block_id(group[i + 1]), block_id(group[i])}}));
      problem.goal = Condition::make_and(std::move(atoms));
      task.scene = std::move(scene);
      break;
    }
    case TaskCategory::tower_of_hanoi:
      break;  // handled above
  }

  task.problem = std::move(problem);
  return task;
}

// ---- pipeline runs -----------------------------------------------------

std::string to_string(TaskOutcome outcome) {
  switch (outcome) {
    case TaskOutcome::success: return "success";
    case TaskOutcome::solve_timeout: return "solve-timeout";
    case TaskOutcome::no_plan: return "no-plan";
    case TaskOutcome::execution_failed: return "execution-failed";
    case TaskOutcome::induction_failed: return "induction-failed";
  }
  return "unknown";
}

double BenchReport::success_rate() const {
  if (rows.empty()) return 0.0;
  double ok = 0;
  for (const auto& row : rows)
    if (row.outcome == TaskOutcome::success) ok += 1;
  return ok / static_cast<double>(rows.size());
}

double BenchReport::success_stderr() const {
  if (rows.size() < 2) return 0.0;
  const double p = success_rate();
  return std::sqrt(p * (1.0 - p) / static_cast<double>(rows.size()));
}

std::size_t BenchReport::total_executed() const {
  std::size_t total = 0;
  for (const auto& row : rows) total += row.executed_actions;
  return total;
}

std::size_t BenchReport::total_aligned() const {
  std::size_t total = 0;
  for (const auto& row : rows) total += row.aligned_actions;
  return total;
}

BenchReport run_pipeline(const std::vector<Trajectory>& demos,
                         const std::vector<TaskSpec>& tasks, const BenchConfig& config,
                         SummarizerBackend& backend) {
  BenchReport report;
  TranscriptLog log(config.transcript_path);
  auto borrowed = std::shared_ptr<SummarizerBackend>(&backend, [](SummarizerBackend*) {});
  LoggedBackend logged(borrowed, &log);

  InductionTask task{demos, config.induction};
  const auto candidates =
      generate_candidates(task, config.induction.prompts, logged, config.induction.seed);
  for (const auto& c : candidates)
    if (c.status == CandidateDomain::Status::eliminated)
      report.eliminations.push_back(to_string(c.reason) + ": " + c.detail);

  const VoteOutcome outcome =
      vote(candidates, derive_seed(config.induction.seed, "vote"), &logged, &task);
  report.induction_tokens = log.total_tokens();
  report.induction_calls = log.calls();
  report.vote_classes = outcome.classes;
  report.induction_ok = outcome.ok;

  if (!outcome.ok) {
    for (int r = 0; r < config.repeats; ++r)
      for (const auto& spec : tasks) {
        BenchRow row;
        row.spec = spec;
        row.outcome = TaskOutcome::induction_failed;
        report.rows.push_back(row);
      }
    return report;
  }

  const CandidateDomain& winner = outcome.winner;
  report.winner_signature = candidate_signature(winner);
  const CanonicalBindings bindings = bind_canonical(winner.library);

  for (int repeat = 0; repeat < config.repeats; ++repeat) {
    for (const auto& spec : tasks) {
      TaskSpec run_spec = spec;
      run_spec.seed = derive_seed(spec.seed, "repeat", static_cast<std::uint64_t>(repeat));

      BenchRow row;
      row.spec = spec;
      const auto started = Clock::now();

      GeneratedTask generated = generate_task(run_spec, bindings);
      const pddl::Domain& domain =
          generated.symbolic_only ? hanoi_domain() : winner.domain;
      if (!generated.symbolic_only) {
        for (const auto& atom : ground_state(generated.scene, winner.library).atoms)
          generated.problem.init.push_back({atom.predicate, atom.args});
        generated.problem.domain_name = winner.domain.name;
      }

      pddl::SolveOptions solve_options;
      solve_options.budget_seconds = spec.time_limit_seconds;
      const auto solved = pddl::solve(generated.problem, domain, solve_options);

      if (solved.status == pddl::SolveStatus::timeout) {
        row.outcome = TaskOutcome::solve_timeout;
      } else if (solved.status == pddl::SolveStatus::no_plan) {
        row.outcome = TaskOutcome::no_plan;
      } else {
        row.plan_length = solved.plan.steps.size();
        if (generated.symbolic_only) {
          row.outcome = TaskOutcome::success;
        } else {
          ExecutionOptions exec_options;
          exec_options.budget_seconds =
              spec.time_limit_seconds - solved.plan.stats.wall_seconds;
          exec_options.seed = derive_seed(run_spec.seed, "exec");
          const ExecutionTrace trace = execute_plan(solved.plan, generated.scene,
                                                    winner.domain, winner.library,
                                                    generated.problem, exec_options);
          row.replans = trace.replans;
          row.executed_actions = trace.executed_actions;
          row.aligned_actions = trace.aligned_actions;
          row.outcome = trace.outcome == ExecutionOutcome::success
                            ? TaskOutcome::success
                            : TaskOutcome::execution_failed;
        }
      }
      row.wall_ms = ms_since(started);
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

std::string report_to_csv(const BenchReport& report) {
  std::ostringstream out;
  out << "category,n_objects,seed,outcome,plan_length,wall_ms,replans,tokens\n";
  for (const auto& row : report.rows) {
    out << to_string(row.spec.category) << "," << row.spec.n_objects << "," << row.spec.seed
        << "," << to_string(row.outcome) << "," << row.plan_length << ","
        << static_cast<std::uint64_t>(row.wall_ms) << "," << row.replans << "," << row.tokens
        << "\n";
  }
  return out.str();
}

std::string report_to_json(const BenchReport& report, bool mask_timing) {
  json rows = json::array();
  for (const auto& row : report.rows) {
    rows.push_back(json{{"category", to_string(row.spec.category)},
                        {"n_objects", row.spec.n_objects},
                        {"seed", row.spec.seed},
                        {"outcome", to_string(row.outcome)},
                        {"plan_length", row.plan_length},
                        {"wall_ms", mask_timing ? 0.0 : row.wall_ms},
                        {"replans", row.replans},
                        {"tokens", row.tokens},
                        {"executed_actions", row.executed_actions},
                        {"aligned_actions", row.aligned_actions}});
  }
  json j{{"rows", rows},
         {"success_rate", report.success_rate()},
         {"success_stderr", report.success_stderr()},
         {"induction", json{{"ok", report.induction_ok},
                            {"tokens", report.induction_tokens},
                            {"calls", report.induction_calls},
                            {"winner_signature", report.winner_signature},
                            {"vote_classes", report.vote_classes},
                            {"eliminations", report.eliminations}}}};
  return j.dump(2) + "\n";
}

std::string report_series_csv(const BenchReport& report) {
  std::map<std::pair<std::string, int>, std::pair<int, int>> buckets;  // (ok, total)
  for (const auto& row : report.rows) {
    auto& bucket = buckets[{to_string(row.spec.category), row.spec.n_objects}];
    bucket.second += 1;
    if (row.outcome == TaskOutcome::success) bucket.first += 1;
  }
  std::ostringstream out;
  out << "category,n_objects,success_rate,successes,total\n";
  for (const auto& [key, bucket] : buckets) {
    out << key.first << "," << key.second << ","
        << (bucket.second ? static_cast<double>(bucket.first) / bucket.second : 0.0) << ","
        << bucket.first << "," << bucket.second << "\n";
  }
  return out.str();
}

// ---- domain quality ------------------------------------------------------

namespace {

bool appears_in_problems(const std::string& predicate,
                         const std::vector<Problem>& problems) {
  for (const auto& problem : problems) {
    for (const auto& atom : problem.init)
      if (atom.predicate == predicate) return true;
    bool found = false;
    auto walk = [&](auto&& self, const Condition& c) -> void {
      if (c.kind == Condition::Kind::atom && c.atom.predicate == predicate) found = true;
      for (const auto& child : c.children) self(self, child);
    };
    walk(walk, problem.goal);
    if (found) return true;
  }
  return false;
}

bool all_solvable(const pddl::Domain& domain, const std::vector<Problem>& problems,
                  double budget) {
  for (const auto& problem : problems) {
    Problem adjusted = problem;
    adjusted.domain_name = domain.name;
    pddl::SolveOptions options;
    options.budget_seconds = budget;
    try {
      if (pddl::solve(adjusted, domain, options).status != pddl::SolveStatus::found)
        return false;
    } catch (const std::exception&) {
      return false;
    }
  }
  return true;
}

pddl::Domain without_predicate(const pddl::Domain& domain, const std::string& predicate) {
  pddl::Domain out = domain;
  out.predicates.erase(std::remove_if(out.predicates.begin(), out.predicates.end(),
                                      [&](const pddl::PredicateDecl& d) {
                                        return d.name == predicate;
                                      }),
                       out.predicates.end());
  for (auto& action : out.actions) {
    auto drop_lits = [&](std::vector<pddl::Literal>& lits) {
      lits.erase(std::remove_if(lits.begin(), lits.end(),
                                [&](const pddl::Literal& l) {
                                  return l.atom.predicate == predicate;
                                }),
                 lits.end());
    };
    drop_lits(action.precondition);
    action.precondition_forall.erase(
        std::remove_if(action.precondition_forall.begin(), action.precondition_forall.end(),
                       [&](const pddl::QuantifiedLiteral& q) {
                         return q.literal.atom.predicate == predicate;
                       }),
        action.precondition_forall.end());
    auto drop_atoms = [&](std::vector<Atom>& atoms) {
      atoms.erase(std::remove_if(atoms.begin(), atoms.end(),
                                 [&](const Atom& a) { return a.predicate == predicate; }),
                  atoms.end());
    };
    drop_atoms(action.add_effects);
    drop_atoms(action.delete_effects);
  }
  return out;
}

}  // namespace

DomainQuality score_domain(const pddl::Domain& generated, const pddl::Domain& reference,
                           const std::vector<Problem>& validation_problems,
                           double solve_budget_seconds) {
  generated.validate();
  reference.validate();

  DomainQuality quality;

  int missing_preds = 0;
  for (const auto& p : reference.predicates) {
    const pddl::PredicateDecl* found = generated.find_predicate(p.name);
    if (!found || found->arity != p.arity) ++missing_preds;
  }
  int missing_actions = 0;
  for (const auto& a : reference.actions)
    if (!generated.find_action(a.name)) ++missing_actions;

  int redundant_preds = 0;
  for (const auto& p : generated.predicates) {
    if (appears_in_problems(p.name, validation_problems)) continue;
    const pddl::Domain ablated = without_predicate(generated, p.name);
    if (all_solvable(ablated, validation_problems, solve_budget_seconds)) ++redundant_preds;
  }
  int redundant_actions = 0;
  for (const auto& a : generated.actions) {
    pddl::Domain ablated = generated;
    ablated.actions.erase(std::remove_if(ablated.actions.begin(), ablated.actions.end(),
                                         [&](const pddl::ActionSchema& x) {
                                           return x.name == a.name;
                                         }),
                          ablated.actions.end());
    if (all_solvable(ablated, validation_problems, solve_budget_seconds)) ++redundant_actions;
  }

  auto pct = [](int count, std::size_t total) {
    return total == 0 ? 0.0 : 100.0 * count / static_cast<double>(total);
  };
  quality.missing_predicates_pct = pct(missing_preds, reference.predicates.size());
  quality.missing_actions_pct = pct(missing_actions, reference.actions.size());
  quality.redundant_predicates_pct = pct(redundant_preds, generated.predicates.size());
  quality.redundant_actions_pct = pct(redundant_actions, generated.actions.size());
  return quality;
}

// ---- noise robustness -------------------------------------------------

namespace {

bool positional_binary(const PredicateDef& p) {
  if (p.order != PredicateOrder::first || p.arity != 2 || !p.relevant) return false;
  for (const auto& c : p.constraint)
    if (c.feature != "delta_x" && c.feature != "delta_y" && c.feature != "delta_z")
      return false;
  return !p.constraint.empty();
}

struct Trial {
  Scene scene;
  bool label;
};

std::vector<Trial> make_trials(const PredicateLibrary& library, const PredicateDef& p,
                               int per_side, Rng& rng) {
  std::vector<Trial> trials;
  Scene scene = base_scene();
  scene.objects.push_back(make_block("a", 0.2, 0.3, kCube / 2, {0.9, 0.1, 0.1}));
  scene.objects.push_back(make_block("b", 0.3, 0.3, kCube / 2, {0.1, 0.1, 0.9}));
  scene.sort_objects();
  const std::string args[] = {"a", "b"};

  int made = 0;
  for (int guard = 0; made < per_side && guard < 200000; ++guard) {
    Scene candidate = scene;
    ObjectState& a = candidate.objects[0];
    const ObjectState& b = candidate.objects[1];
    Vec3 delta{0, 0, 0};
    for (const auto& c : p.constraint) {
      double total = 0;
      for (const auto& iv : c.intervals) total += iv.hi - iv.lo;
      double pick = rng.uniform(0.0, total);
      double v = c.intervals.back().hi;
      for (const auto& iv : c.intervals) {
        if (pick <= iv.hi - iv.lo) {
          v = iv.lo + pick;
          break;
        }
        pick -= iv.hi - iv.lo;
      }
      if (c.feature == "delta_x") delta.x = v;
      if (c.feature == "delta_y") delta.y = v;
      if (c.feature == "delta_z") delta.z = v;
    }
    a.position = b.position + delta;
    if (!candidate.workspace.contains_box(a.box())) continue;
    if (!check_feasible(candidate)) continue;
    if (!eval_predicate(library, p, args, candidate)) continue;
    trials.push_back({candidate, true});
    ++made;
  }

  made = 0;
  for (int guard = 0; made < per_side && guard < 200000; ++guard) {
    Scene candidate = scene;
    ObjectState& a = candidate.objects[0];
    a.position = {rng.uniform(0.05, 0.55), rng.uniform(0.05, 0.55), kCube / 2};
    if (!check_feasible(candidate)) continue;
    if (eval_predicate(library, p, args, candidate)) continue;
    trials.push_back({candidate, false});
    ++made;
  }
  return trials;
}

}  // namespace

NoiseReport noise_study(const PredicateLibrary& library, const std::vector<double>& levels_pct,
                        std::uint64_t seed, int trials_per_side, int repeats) {
  NoiseReport report;
  report.levels_pct = levels_pct;

  std::vector<const PredicateDef*> predicates;
  for (const auto& p : library.predicates())
    if (positional_binary(p)) predicates.push_back(&p);

  std::vector<std::vector<std::vector<double>>> accuracy(
      predicates.size(),
      std::vector<std::vector<double>>(levels_pct.size()));

  for (std::size_t pi = 0; pi < predicates.size(); ++pi) {
    const PredicateDef& p = *predicates[pi];
    Rng trial_rng(derive_seed(seed, "trials", pi));
    const auto trials = make_trials(library, p, trials_per_side, trial_rng);
    const std::string args[] = {"a", "b"};

    for (std::size_t li = 0; li < levels_pct.size(); ++li) {
      for (int rep = 0; rep < repeats; ++rep) {
        Rng noise_rng(derive_seed(seed, "noise", (pi * 1000 + li) * 100 + rep));
        int agree = 0;
        for (const auto& trial : trials) {
          Scene noisy = trial.scene;
          for (auto& o : noisy.objects) {
            const double s = std::max({o.size.x, o.size.y, o.size.z});
            const double amplitude = levels_pct[li] / 100.0 * s;
            o.position.x += noise_rng.uniform(-amplitude, amplitude);
            o.position.y += noise_rng.uniform(-amplitude, amplitude);
            o.position.z += noise_rng.uniform(-amplitude, amplitude);
          }
          if (eval_predicate(library, p, args, noisy) == trial.label) ++agree;
        }
        accuracy[pi][li].push_back(trials.empty() ? 1.0
                                                 : static_cast<double>(agree) / trials.size());
      }
    }
  }

  auto mean_stderr = [](const std::vector<double>& xs) {
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    if (xs.size() < 2) return std::pair{mean, 0.0};
    double var = 0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size() - 1);
    return std::pair{mean, std::sqrt(var / static_cast<double>(xs.size()))};
  };

  for (std::size_t pi = 0; pi < predicates.size(); ++pi) {
    NoiseReport::Row row;
    row.predicate = predicates[pi]->name;
    for (std::size_t li = 0; li < levels_pct.size(); ++li) {
      const auto [mean, se] = mean_stderr(accuracy[pi][li]);
      row.accuracy_mean.push_back(mean);
      row.accuracy_stderr.push_back(se);
    }
    report.rows.push_back(std::move(row));
  }

  report.overall.predicate = "overall";
  for (std::size_t li = 0; li < levels_pct.size(); ++li) {
    std::vector<double> pooled;
    for (std::size_t pi = 0; pi < predicates.size(); ++pi)
      pooled.insert(pooled.end(), accuracy[pi][li].begin(), accuracy[pi][li].end());
    if (pooled.empty()) pooled.push_back(1.0);
    const auto [mean, se] = mean_stderr(pooled);
    report.overall.accuracy_mean.push_back(mean);
    report.overall.accuracy_stderr.push_back(se);
  }
  return report;
}

std::string noise_report_to_csv(const NoiseReport& report) {
  std::ostringstream out;
  out << "predicate";
  for (double level : report.levels_pct) out << ",acc_" << level << "pct,stderr_" << level << "pct";
  out << "\n";
  auto write_row = [&](const NoiseReport::Row& row) {
    out << row.predicate;
    for (std::size_t i = 0; i < row.accuracy_mean.size(); ++i)
      out << "," << row.accuracy_mean[i] << "," << row.accuracy_stderr[i];
    out << "\n";
  };
  for (const auto& row : report.rows) write_row(row);
  write_row(report.overall);
  return out.str();
}

}  // namespace pddllm
