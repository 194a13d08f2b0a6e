#include "pddllm/induction.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "pddllm/features_internal.hpp"

namespace pddllm {

using nlohmann::json;

std::string to_string(EliminationReason reason) {
  switch (reason) {
    case EliminationReason::none: return "none";
    case EliminationReason::syntax: return "syntax";
    case EliminationReason::incomplete: return "incomplete";
    case EliminationReason::goal_unreached: return "goal-unreached";
    case EliminationReason::timeout: return "timeout";
    case EliminationReason::backend: return "backend";
  }
  return "unknown";
}

std::vector<const Scene*> resting_steps(const Trajectory& demo) {
  std::vector<const Scene*> out;
  for (const auto& step : demo.steps)
    if (check_feasible(step.scene)) out.push_back(&step.scene);
  if (out.empty() && !demo.steps.empty()) {
    out.push_back(&demo.steps.front().scene);
    out.push_back(&demo.steps.back().scene);
  }
  return out;
}

namespace {

struct FamilyTemplate {
  std::string name;
  int arity;
  std::string feature_kind;
  std::vector<std::string> feature_names;
};

const std::vector<FamilyTemplate>& family_templates() {
  static const std::vector<FamilyTemplate> families = {
      {"relative_position", 2, "position", {"delta_x", "delta_y", "delta_z"}},
      {"table_support", 1, "height above the table", {"z_above_table"}},
      {"relative_color", 2, "color", {"delta_color_r", "delta_color_g", "delta_color_b"}},
      {"relative_size", 2, "size", {"delta_w", "delta_l", "delta_h"}},
  };
  return families;
}

std::vector<double> observed_values(const std::string& feature, int arity,
                                    const std::vector<Trajectory>& demos) {
  std::vector<double> values;
  for (const auto& demo : demos) {
    for (const Scene* scene : resting_steps(demo)) {
      const auto ids = scene->object_ids();
      if (arity == 1) {
        for (const auto& a : ids) {
          const std::string args[] = {a};
          values.push_back(feature_value(feature, *scene, args));
        }
      } else {
        for (const auto& a : ids)
          for (const auto& b : ids) {
            if (a == b) continue;
            const std::string args[] = {a, b};
            values.push_back(feature_value(feature, *scene, args));
          }
      }
    }
  }
  return values;
}

// Grid anchored so the smallest observed value sits at a cell center, then
// extended to cover the physical bound on both sides.
void anchor_range(FeatureDef& f, double v_min, double bound_lo, double bound_hi) {
  double lo = v_min - f.u / 2.0;
  if (lo > bound_lo) lo -= f.u * std::ceil((lo - bound_lo) / f.u - 1e-9);
  const double hi = lo + f.u * std::ceil((bound_hi - lo) / f.u - 1e-9);
  f.lo = lo;
  f.hi = hi;
}

std::pair<double, double> physical_bounds(const std::string& feature, const Scene& ref) {
  const Vec3 extent = ref.workspace.hi - ref.workspace.lo;
  if (feature == "delta_x") return {-extent.x, extent.x};
  if (feature == "delta_y") return {-extent.y, extent.y};
  if (feature == "delta_z") return {-extent.z, extent.z};
  if (feature == "z_above_table") return {0.0, extent.z};
  if (feature.starts_with("delta_color")) return {-1.0, 1.0};
  if (feature.starts_with("delta_")) return {-0.5, 0.5};  // size differences, desk scale
  return {0.0, 1.0};
}

}  // namespace

std::vector<FeatureFamily> build_feature_families(const std::vector<Trajectory>& demos,
                                                  double u_scale) {
  if (demos.empty()) throw std::invalid_argument("build_feature_families: no demonstrations");
  const Scene& ref = demos.front().steps.front().scene;

  std::vector<FeatureFamily> out;
  for (const auto& tmpl : family_templates()) {
    FeatureFamily family;
    family.name = tmpl.name;
    family.arity = tmpl.arity;
    for (const auto& fname : tmpl.feature_names) {
      const auto values = observed_values(fname, tmpl.arity, demos);
      double d_min = 0.0;
      try {
        d_min = compute_d_min(values);
      } catch (const DegenerateFeature&) {
        continue;  // nothing to distinguish on this axis
      }
      FeatureDef def;
      def.name = fname;
      def.arity = tmpl.arity;
      def.u = u_scale * d_min;
      const auto [blo, bhi] = physical_bounds(fname, ref);
      const double v_min = *std::min_element(values.begin(), values.end());
      anchor_range(def, v_min, blo, bhi);
      def.validate();
      family.features.push_back(std::move(def));
    }
    if (!family.features.empty()) out.push_back(std::move(family));
  }
  return out;
}

std::vector<FeatureFamily> resolve_feature_config(
    const std::vector<FeatureFamilyConfig>& config, const std::vector<Trajectory>& demos,
    double u_scale) {
  std::vector<FeatureFamily> out;
  for (const auto& fc : config) {
    FeatureFamily family;
    family.name = fc.name;
    family.arity = fc.arity;
    for (const auto& entry : fc.features) {
      FeatureDef def = entry.def;
      if (entry.d_min_requested) {
        const auto values = observed_values(def.name, fc.arity, demos);
        def.u = u_scale * compute_d_min(values);
      }
      def.validate();
      family.features.push_back(std::move(def));
    }
    if (!family.features.empty()) out.push_back(std::move(family));
  }
  return out;
}

// ---- naming ---------------------------------------------------------------

namespace {

bool valid_name(const std::string& name) {
  if (name.empty() || !std::islower(static_cast<unsigned char>(name[0]))) return false;
  return std::all_of(name.begin(), name.end(), [](unsigned char c) {
    return std::islower(c) || std::isdigit(c) || c == '_' || c == '-';
  });
}

struct ParsedNaming {
  std::string name;
  int widen = 0;
};

ParsedNaming parse_naming_reply(const std::string& text) {
  const auto open = text.find('(');
  if (open == std::string::npos)
    throw InductionError(EliminationReason::syntax, "naming reply has no predicate: " + text);
  std::string name;
  for (std::size_t i = open + 1; i < text.size(); ++i) {
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(text[i])));
    if (std::isspace(static_cast<unsigned char>(c)) || c == ')') break;
    name += c;
  }
  if (!valid_name(name))
    throw InductionError(EliminationReason::syntax, "unusable predicate name in: " + text);
  ParsedNaming parsed{name, 0};
  const auto widen_pos = text.find("widen=");
  if (widen_pos != std::string::npos)
    parsed.widen = std::atoi(text.c_str() + widen_pos + 6);
  return parsed;
}

std::string parse_action_reply(const std::string& text) {
  std::string token;
  const auto open = text.find('(');
  std::size_t start = open == std::string::npos ? 0 : open + 1;
  // strip a leading :action keyword if the model echoed full syntax
  while (start < text.size() && std::isspace(static_cast<unsigned char>(text[start]))) ++start;
  if (text.compare(start, 7, ":action") == 0) start += 7;
  while (start < text.size() && std::isspace(static_cast<unsigned char>(text[start]))) ++start;
  for (std::size_t i = start; i < text.size(); ++i) {
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(text[i])));
    if (std::isspace(static_cast<unsigned char>(c)) || c == ')' || c == '(') break;
    token += c;
  }
  if (!valid_name(token))
    throw InductionError(EliminationReason::syntax, "unusable action name in: " + text);
  return token;
}

std::string joined_task_text(const std::vector<Trajectory>& demos) {
  std::string text;
  std::set<std::string> seen;
  for (const auto& demo : demos) {
    if (!seen.insert(demo.task_description).second) continue;
    if (!text.empty()) text += " / ";
    text += demo.task_description;
  }
  return text;
}

std::vector<Interval> merge_adjacent(std::vector<Interval> cells) {
  std::sort(cells.begin(), cells.end(),
            [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::vector<Interval> out;
  for (const auto& cell : cells) {
    if (!out.empty() && std::abs(out.back().hi - cell.lo) < 1e-12) {
      out.back().hi = cell.hi;
      out.back().hi_closed = cell.hi_closed;
    } else {
      out.push_back(cell);
    }
  }
  return out;
}

json value_json(const std::vector<double>& v) {
  if (v.size() == 1) return v[0];
  return json(v);
}

std::string feature_kind_of(const std::string& family_name) {
  for (const auto& tmpl : family_templates())
    if (tmpl.name == family_name) return tmpl.feature_kind;
  return "state";
}

}  // namespace

Relevance classify_relevance(const std::string& predicate, const std::string& task_description,
                             SummarizerBackend& backend, int votes, std::uint64_t seed) {
  if (predicate.empty()) throw std::invalid_argument("classify_relevance: empty predicate");
  int relevant = 0, irrelevant = 0;
  for (int i = 0; i < std::max(votes, 1); ++i) {
    const auto request = SummarizerRequest::make(
        RequestKind::relevance, json{{"predicate", predicate}}, task_description);
    const BackendReply reply = backend.complete(request);
    if (!reply.ok) continue;
    if (reply.text.find("irrelevant") != std::string::npos)
      ++irrelevant;
    else if (reply.text.find("relevant") != std::string::npos)
      ++relevant;
  }
  if (relevant > irrelevant) return Relevance::relevant;
  if (irrelevant > relevant) return Relevance::irrelevant;
  Rng rng(derive_seed(seed, "relevance-tie"));
  return rng.bernoulli(0.5) ? Relevance::relevant : Relevance::irrelevant;
}

// ---- single candidate ------------------------------------------------------

CandidateDomain run_single_induction(const InductionTask& task, SummarizerBackend& backend,
                                     std::uint64_t seed) {
  const auto& config = task.config;
  if (task.demos.empty())
    throw InductionError(EliminationReason::incomplete, "no demonstrations provided");

  const std::string task_text = joined_task_text(task.demos);
  const auto families = build_feature_families(task.demos, config.u_scale);
  if (families.empty())
    throw InductionError(EliminationReason::incomplete, "no usable features in demonstrations");

  std::vector<FeatureDef> all_features;
  for (const auto& family : families)
    for (const auto& f : family.features) all_features.push_back(f);
  PredicateLibrary library(all_features);

  CandidateDomain candidate;

  for (std::size_t family_index = 0; family_index < families.size(); ++family_index) {
    const auto& family = families[family_index];
    const auto& features = family.features;
    const auto strides = cell_strides(features);
    if (cell_count_total(features) > config.subspace_cap)
      throw InductionError(EliminationReason::incomplete, "subspace cap exceeded for family " +
                                                              family.name);

    struct CellInfo {
      std::vector<double> value_1;
      std::vector<double> value_2;
      bool observed = false;
    };
    std::map<std::uint64_t, CellInfo> feasible_cells;

    // cells observed in statically feasible demonstration steps
    for (const auto& demo : task.demos) {
      for (const Scene* scene : resting_steps(demo)) {
        const auto ids = scene->object_ids();
        auto record = [&](std::span<const std::string> args) {
          std::uint64_t address = 0;
          for (std::size_t f = 0; f < features.size(); ++f) {
            const double v = feature_value(features[f].name, *scene, args);
            const auto idx = cell_index(features[f], v);
            if (!idx) return;
            address += strides[f] * *idx;
          }
          auto& info = feasible_cells[address];
          if (info.observed) return;
          info.observed = true;
          if (family.name == "relative_position") {
            const auto& a = scene->at(args[0]);
            const auto& b = scene->at(args[1]);
            info.value_1 = {a.position.x, a.position.y, a.position.z};
            info.value_2 = {b.position.x, b.position.y, b.position.z};
          } else if (family.name == "relative_color") {
            const auto& a = scene->at(args[0]);
            const auto& b = scene->at(args[1]);
            info.value_1 = {a.color.x, a.color.y, a.color.z};
            info.value_2 = {b.color.x, b.color.y, b.color.z};
          } else if (family.name == "relative_size") {
            const auto& a = scene->at(args[0]);
            const auto& b = scene->at(args[1]);
            info.value_1 = {a.size.x, a.size.y, a.size.z};
            info.value_2 = {b.size.x, b.size.y, b.size.z};
          } else {
            const std::string arg0[] = {args[0]};
            info.value_1 = {feature_value(features[0].name, *scene, arg0)};
          }
        };
        if (family.arity == 1) {
          for (const auto& a : ids) {
            const std::string args[] = {a};
            record(args);
          }
        } else {
          for (const auto& a : ids)
            for (const auto& b : ids) {
              if (a == b) continue;
              const std::string args[] = {a, b};
              record(args);
            }
        }
      }
    }

    // cells reached by uniform sampling and verified feasible
    const Scene* scene_template = nullptr;
    for (const auto& demo : task.demos) {
      const auto rest = resting_steps(demo);
      if (!rest.empty() && rest.front()->objects.size() >= static_cast<std::size_t>(family.arity)) {
        scene_template = rest.front();
        break;
      }
    }
    if (scene_template) {
      const auto flags =
          sample_cell_flags(features, *scene_template, config.samples_per_family,
                            derive_seed(seed, "sample", family_index));
      for (const auto& [address, feasible] : flags) {
        if (!feasible || feasible_cells.contains(address)) continue;
        CellInfo info;
        const auto indices = address_to_indices(features, address);
        std::vector<double> centers;
        for (std::size_t f = 0; f < features.size(); ++f)
          centers.push_back(discretize(features[f])[static_cast<std::size_t>(indices[f])].mid());
        if (family.arity == 2) {
          const ObjectState& ref = scene_template->objects[1];
          if (family.name == "relative_position")
            info.value_2 = {ref.position.x, ref.position.y, ref.position.z};
          else if (family.name == "relative_color")
            info.value_2 = {ref.color.x, ref.color.y, ref.color.z};
          else
            info.value_2 = {ref.size.x, ref.size.y, ref.size.z};
          for (std::size_t f = 0; f < features.size() && f < info.value_2.size(); ++f)
            info.value_1.push_back(info.value_2[f] + centers[f]);
        } else {
          info.value_1 = centers;
        }
        feasible_cells.emplace(address, std::move(info));
      }
    }

    // summarize each feasible cell into a named predicate
    for (const auto& [address, info] : feasible_cells) {
      const auto indices = address_to_indices(features, address);
      json dims = json::array();
      json offsets = json::object();
      std::vector<FeatureConstraint> constraint;
      for (std::size_t f = 0; f < features.size(); ++f) {
        const auto grid = discretize(features[f]);
        const Interval& cell = grid[static_cast<std::size_t>(indices[f])];
        dims.push_back(json{{"name", features[f].name},
                            {"lo", cell.lo},
                            {"hi", cell.hi},
                            {"lo_open", cell.lo_open},
                            {"hi_closed", cell.hi_closed}});
        const auto zero = cell_index(features[f], 0.0);
        offsets[features[f].name] = indices[f] - static_cast<int>(zero.value_or(0));
        constraint.push_back({features[f].name, {cell}});
      }

      json context{{"family", family.name},
                   {"n_objects", family.arity},
                   {"feature_kind", feature_kind_of(family.name)},
                   {"value_1", value_json(info.value_1)},
                   {"dims", dims},
                   {"cell_offsets", offsets}};
      if (!info.value_2.empty()) context["value_2"] = value_json(info.value_2);

      const auto request =
          SummarizerRequest::make(RequestKind::predicate_naming, context, task_text);
      const BackendReply reply = backend.complete(request);
      if (!reply.ok)
        throw InductionError(EliminationReason::backend, reply.error);
      candidate.provenance.push_back(reply.text);
      const ParsedNaming named = parse_naming_reply(reply.text);

      PredicateDef def;
      def.name = named.name;
      def.arity = family.arity;
      def.param_roles.assign(static_cast<std::size_t>(family.arity), "obj");
      def.order = PredicateOrder::first;
      def.origin = PredicateOrigin::summarized;
      def.constraint = constraint;

      if (named.widen > 0) {
        // granularity feedback: pull the neighbouring cells in, then merge
        // the members back into one span per feature
        for (std::size_t f = 0; f < features.size(); ++f) {
          const auto grid = discretize(features[f]);
          auto& ivs = def.constraint[f].intervals;
          ivs.clear();
          const int k = static_cast<int>(grid.size());
          const int lo = std::max(0, indices[f] - named.widen);
          const int hi = std::min(k - 1, indices[f] + named.widen);
          for (int i = lo; i <= hi; ++i) ivs.push_back(grid[static_cast<std::size_t>(i)]);
        }
        RefineDirective directive;
        directive.kind = RefineDirective::Kind::merge;
        for (std::size_t f = 0; f < features.size(); ++f) {
          if (def.constraint[f].intervals.size() < 2) continue;
          directive.feature = features[f].name;
          directive.merge_indices.clear();
          for (std::size_t i = 0; i < def.constraint[f].intervals.size(); ++i)
            directive.merge_indices.push_back(static_cast<int>(i));
          def = refine_intervals(def, directive);
        }
      }

      def.relevant = classify_relevance(def.name, task_text, backend, config.relevance_votes,
                                        derive_seed(seed, "relevance", address)) ==
                     Relevance::relevant;

      if (library.has(def.name)) {
        // the same name summarizing a neighbouring cell extends the union
        PredicateDef merged = library.at(def.name);
        if (merged.arity == def.arity && merged.constraint.size() == def.constraint.size()) {
          for (std::size_t f = 0; f < merged.constraint.size(); ++f) {
            auto cells = merged.constraint[f].intervals;
            cells.insert(cells.end(), def.constraint[f].intervals.begin(),
                         def.constraint[f].intervals.end());
            merged.constraint[f].intervals = merge_adjacent(std::move(cells));
          }
          PredicateLibrary rebuilt(library.features());
          for (const auto& p : library.predicates())
            rebuilt.add(p.name == merged.name ? merged : p);
          library = std::move(rebuilt);
        }
        continue;
      }
      library.add(std::move(def));
    }
  }

  if (library.empty())
    throw InductionError(EliminationReason::incomplete, "no feasible subspaces found");

  // systematic higher-order forms, then their own relevance verdicts
  DeriveOptions derive_options;
  derive_options.forall_positions = config.forall_positions;
  derive_options.enable_exists = config.enable_exists;
  PredicateLibrary derived = derive_higher_order(library, derive_options);

  PredicateLibrary final_library(derived.features());
  for (const auto& p : derived.predicates()) {
    PredicateDef def = p;
    if (p.origin == PredicateOrigin::derived) {
      def.relevant = classify_relevance(p.name, task_text, backend, config.relevance_votes,
                                        derive_seed(seed, "derived-relevance",
                                                    final_library.size())) ==
                     Relevance::relevant;
    }
    final_library.add(std::move(def));
  }

  // ground the demonstrations and lift every observed transition
  std::vector<pddl::ActionSchema> schemas;
  const ActionNamer namer = [&](const LogicalState& pre, const LogicalState& post) {
    json pre_atoms = json::array();
    json post_atoms = json::array();
    json added = json::array();
    json deleted = json::array();
    for (const auto& a : pre.atoms) pre_atoms.push_back(a.str());
    for (const auto& a : post.atoms) post_atoms.push_back(a.str());
    for (const auto& a : LogicalState::difference(post, pre)) added.push_back(a.str());
    for (const auto& a : LogicalState::difference(pre, post)) deleted.push_back(a.str());
    const auto request = SummarizerRequest::make(
        RequestKind::action_naming,
        json{{"pre_atoms", pre_atoms}, {"post_atoms", post_atoms}, {"added", added},
             {"deleted", deleted}},
        task_text);
    const BackendReply reply = backend.complete(request);
    if (!reply.ok) throw InductionError(EliminationReason::backend, reply.error);
    candidate.provenance.push_back(reply.text);
    return parse_action_reply(reply.text);
  };

  bool any_transition = false;
  for (const auto& demo : task.demos) {
    const LogicalTrajectory lt = ground_trajectory(demo, final_library);
    for (const auto& transition : extract_transitions(lt)) {
      any_transition = true;
      schemas.push_back(lift_transition(transition, namer));
    }
  }
  if (!any_transition)
    throw InductionError(EliminationReason::incomplete, "demonstrations contain no transitions");

  candidate.domain = compose_domain(final_library, schemas, config.domain_name);
  if (candidate.domain.actions.empty())
    throw InductionError(EliminationReason::incomplete, "no actions invented");
  candidate.library = std::move(final_library);
  return candidate;
}

pddl::Problem replay_problem(const LogicalTrajectory& lt,
                             const std::vector<std::string>& objects,
                             const std::string& domain_name, const std::string& name) {
  pddl::Problem problem;
  problem.name = name;
  problem.domain_name = domain_name;
  problem.objects = objects;
  for (const auto& atom : lt.states.front().atoms)
    problem.init.push_back({atom.predicate, atom.args});
  std::vector<pddl::Condition> goal_atoms;
  for (const auto& atom : lt.states.back().atoms)
    goal_atoms.push_back(pddl::Condition::make_atom({atom.predicate, atom.args}));
  problem.goal = pddl::Condition::make_and(std::move(goal_atoms));
  return problem;
}

namespace {

void validate_candidate(CandidateDomain& candidate, const InductionTask& task) {
  std::string text;
  pddl::Domain parsed;
  try {
    text = pddl::emit_domain(candidate.domain);
    parsed = pddl::parse_domain(text);
  } catch (const std::exception& e) {
    candidate.status = CandidateDomain::Status::eliminated;
    candidate.reason = EliminationReason::syntax;
    candidate.detail = e.what();
    return;
  }

  for (std::size_t d = 0; d < task.demos.size(); ++d) {
    const auto& demo = task.demos[d];
    LogicalTrajectory lt;
    try {
      lt = ground_trajectory(demo, candidate.library);
    } catch (const std::exception& e) {
      candidate.status = CandidateDomain::Status::eliminated;
      candidate.reason = EliminationReason::incomplete;
      candidate.detail = e.what();
      return;
    }
    const auto problem = replay_problem(lt, demo.steps.front().scene.object_ids(),
                                        parsed.name, "replay_" + std::to_string(d));
    pddl::SolveOptions options;
    options.budget_seconds = task.config.validation_budget_seconds;
    const auto result = pddl::solve(problem, parsed, options);
    if (result.status == pddl::SolveStatus::timeout) {
      candidate.status = CandidateDomain::Status::eliminated;
      candidate.reason = EliminationReason::timeout;
      candidate.detail = "replay of demonstration " + std::to_string(d) + " timed out";
      return;
    }
    if (result.status != pddl::SolveStatus::found ||
        !pddl::validate(result.plan, problem, parsed).ok) {
      candidate.status = CandidateDomain::Status::eliminated;
      candidate.reason = EliminationReason::goal_unreached;
      candidate.detail = "replay of demonstration " + std::to_string(d) + " not solvable";
      return;
    }
  }
  candidate.status = CandidateDomain::Status::valid;
}

}  // namespace

std::vector<CandidateDomain> generate_candidates(const InductionTask& task, int k,
                                                 SummarizerBackend& backend,
                                                 std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("generate_candidates: k must be >= 1");
  std::vector<CandidateDomain> candidates;
  for (int i = 0; i < k; ++i) {
    const std::uint64_t candidate_seed = derive_seed(seed, "candidate", static_cast<std::uint64_t>(i));
    backend.begin_candidate(candidate_seed);
    CandidateDomain candidate;
    try {
      candidate = run_single_induction(task, backend, candidate_seed);
      validate_candidate(candidate, task);
    } catch (const InductionError& e) {
      candidate.status = CandidateDomain::Status::eliminated;
      candidate.reason = e.reason;
      candidate.detail = e.what();
    }
    candidates.push_back(std::move(candidate));
  }
  return candidates;
}

// ---- voting ----------------------------------------------------------------

namespace {

std::string predicate_structural_sig(const PredicateLibrary& library, const std::string& name,
                                     int depth = 0) {
  if (depth > 4 || !library.has(name)) return "?";
  const PredicateDef& p = library.at(name);
  if (p.order == PredicateOrder::first) {
    std::string sig = "F" + std::to_string(p.arity);
    auto sorted = p.constraint;
    std::sort(sorted.begin(), sorted.end(),
              [](const FeatureConstraint& a, const FeatureConstraint& b) {
                return a.feature < b.feature;
              });
    char buf[64];
    for (const auto& c : sorted) {
      sig += "|" + c.feature;
      for (const auto& iv : c.intervals) {
        std::snprintf(buf, sizeof(buf), "[%.6f,%.6f,%d,%d]", iv.lo, iv.hi, iv.lo_open,
                      iv.hi_closed);
        sig += buf;
      }
    }
    return sig;
  }
  std::string sig = "H";
  switch (p.form->op) {
    case HigherOp::negation: sig += "n"; break;
    case HigherOp::forall: sig += "f"; break;
    case HigherOp::forall_not: sig += "fn"; break;
    case HigherOp::exists: sig += "e"; break;
  }
  sig += std::to_string(p.form->position);
  return sig + "(" + predicate_structural_sig(library, p.form->base, depth + 1) + ")";
}

std::uint64_t hash_str(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::string candidate_signature(const CandidateDomain& candidate) {
  std::map<std::string, std::string> rename;
  for (const auto& decl : candidate.domain.predicates)
    rename[decl.name] =
        "p" + std::to_string(hash_str(predicate_structural_sig(candidate.library, decl.name)));

  pddl::Domain renamed = candidate.domain;
  renamed.name = "voted";
  auto rewrite = [&](pddl::Atom& atom) {
    auto it = rename.find(atom.predicate);
    if (it != rename.end()) atom.predicate = it->second;
  };
  for (auto& decl : renamed.predicates) decl.name = rename[decl.name];
  for (auto& action : renamed.actions) {
    for (auto& lit : action.precondition) rewrite(lit.atom);
    for (auto& q : action.precondition_forall) rewrite(q.literal.atom);
    for (auto& atom : action.add_effects) rewrite(atom);
    for (auto& atom : action.delete_effects) rewrite(atom);
  }
  // surface action names must not influence the class either
  for (auto& action : renamed.actions) {
    pddl::Domain single;
    single.name = "one";
    single.actions.push_back(action);
    single.predicates = renamed.predicates;
    action.name = "a" + std::to_string(hash_str(pddl::structural_signature(single)));
  }
  return std::to_string(hash_str(pddl::emit_domain(renamed)));
}

VoteOutcome vote(const std::vector<CandidateDomain>& candidates, std::uint64_t seed,
                 SummarizerBackend* backend, const InductionTask* task) {
  VoteOutcome outcome;

  std::map<std::string, std::vector<std::size_t>> classes;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].status != CandidateDomain::Status::valid) continue;
    classes[candidate_signature(candidates[i])].push_back(i);
  }
  for (const auto& [sig, members] : classes)
    outcome.classes[sig] = static_cast<int>(members.size());

  if (classes.empty()) {
    outcome.ok = false;
    std::string reasons;
    for (const auto& c : candidates) {
      if (!reasons.empty()) reasons += ", ";
      reasons += to_string(c.reason);
    }
    outcome.failure = "no valid candidate (" + reasons + ")";
    return outcome;
  }

  std::size_t best_count = 0;
  for (const auto& [sig, members] : classes) best_count = std::max(best_count, members.size());
  std::vector<std::string> tied;
  for (const auto& [sig, members] : classes)
    if (members.size() == best_count) tied.push_back(sig);
  std::sort(tied.begin(), tied.end());

  std::string chosen = tied.front();
  if (tied.size() > 1) {
    Rng rng(derive_seed(seed, "vote-tie"));
    chosen = tied[rng.uniform_index(tied.size())];
  }

  const auto& members = classes.at(chosen);
  outcome.winner = candidates[members.front()];
  outcome.ok = true;

  // name selection across the winning class (the first option wins for the
  // deterministic backend; identical candidates make this a formality)
  if (backend && members.size() > 1) {
    nlohmann::json pred_options = nlohmann::json::array();
    for (const auto& decl : outcome.winner.domain.predicates) pred_options.push_back(decl.name);
    nlohmann::json action_options = nlohmann::json::array();
    for (const auto& action : outcome.winner.domain.actions) action_options.push_back(action.name);
    if (!pred_options.empty())
      backend->complete(SummarizerRequest::make(
          RequestKind::selection, {{"what", "predicate"}, {"options", pred_options}}, "vote"));
    if (!action_options.empty())
      backend->complete(SummarizerRequest::make(
          RequestKind::selection, {{"what", "action"}, {"options", action_options}}, "vote"));
  }

  // prune schemas no solved replay problem uses
  if (task && !task->demos.empty()) {
    std::set<std::string> used;
    bool all_solved = true;
    for (std::size_t d = 0; d < task->demos.size(); ++d) {
      const auto& demo = task->demos[d];
      const LogicalTrajectory lt = ground_trajectory(demo, outcome.winner.library);
      const auto problem = replay_problem(lt, demo.steps.front().scene.object_ids(),
                                          outcome.winner.domain.name,
                                          "prune_" + std::to_string(d));
      pddl::SolveOptions options;
      options.budget_seconds = task->config.validation_budget_seconds;
      const auto result = pddl::solve(problem, outcome.winner.domain, options);
      if (result.status != pddl::SolveStatus::found) {
        all_solved = false;
        break;
      }
      for (const auto& step : result.plan.steps) used.insert(step.schema);
    }
    if (all_solved) {
      auto& actions = outcome.winner.domain.actions;
      actions.erase(std::remove_if(actions.begin(), actions.end(),
                                   [&](const pddl::ActionSchema& a) {
                                     return !used.contains(a.name);
                                   }),
                    actions.end());
    }
  }
  return outcome;
}

}  // namespace pddllm
