#include "pddllm/predicates.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace pddllm {

using nlohmann::json;

std::string GroundAtom::str() const {
  std::string s = "(" + predicate;
  for (const auto& a : args) s += " " + a;
  return s + ")";
}

void LogicalState::insert(GroundAtom atom) {
  auto it = std::lower_bound(atoms.begin(), atoms.end(), atom);
  if (it == atoms.end() || *it != atom) atoms.insert(it, std::move(atom));
}

bool LogicalState::contains(const GroundAtom& atom) const {
  return std::binary_search(atoms.begin(), atoms.end(), atom);
}

void LogicalState::normalize() {
  std::sort(atoms.begin(), atoms.end());
  atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());
}

LogicalState LogicalState::set_union(const LogicalState& a, const LogicalState& b) {
  LogicalState out;
  std::set_union(a.atoms.begin(), a.atoms.end(), b.atoms.begin(), b.atoms.end(),
                 std::back_inserter(out.atoms));
  return out;
}

std::vector<GroundAtom> LogicalState::difference(const LogicalState& a,
                                                 const LogicalState& b) {
  std::vector<GroundAtom> out;
  std::set_difference(a.atoms.begin(), a.atoms.end(), b.atoms.begin(), b.atoms.end(),
                      std::back_inserter(out));
  return out;
}

void PredicateLibrary::add(PredicateDef def) {
  if (has(def.name)) throw std::invalid_argument("predicate already defined: " + def.name);
  if (def.arity < 0 || def.arity > 2)
    throw std::invalid_argument("predicate " + def.name + ": arity must be 0..2");
  if (def.order == PredicateOrder::first && def.constraint.empty())
    throw std::invalid_argument("predicate " + def.name +
                                ": first-order predicates need a constraint");
  if (def.order == PredicateOrder::higher) {
    if (!def.form) throw std::invalid_argument("predicate " + def.name + ": missing form");
    if (!has(def.form->base))
      throw std::invalid_argument("predicate " + def.name + ": unknown base " + def.form->base);
    const PredicateDef& base = at(def.form->base);
    if (def.form->op != HigherOp::negation &&
        (def.form->position < 0 || def.form->position >= base.arity))
      throw std::invalid_argument("predicate " + def.name + ": position outside base arity");
  }
  for (const auto& c : def.constraint) {
    const FeatureDef* f = find_feature(c.feature);
    if (f) {
      for (const auto& iv : c.intervals)
        if (iv.lo < f->lo - 1e-9 || iv.hi > f->hi + 1e-9)
          throw std::invalid_argument("predicate " + def.name + ": constraint on " +
                                      c.feature + " outside feature range");
    } else if (!is_known_feature(c.feature)) {
      throw std::invalid_argument("predicate " + def.name + ": unknown feature " + c.feature);
    }
  }
  defs_.push_back(std::move(def));
}

bool PredicateLibrary::has(const std::string& name) const {
  return std::any_of(defs_.begin(), defs_.end(),
                     [&](const PredicateDef& d) { return d.name == name; });
}

const PredicateDef& PredicateLibrary::at(const std::string& name) const {
  for (const auto& d : defs_)
    if (d.name == name) return d;
  throw std::invalid_argument("unknown predicate: " + name);
}

std::vector<const PredicateDef*> PredicateLibrary::relevant_predicates() const {
  std::vector<const PredicateDef*> out;
  for (const auto& d : defs_)
    if (d.relevant && d.planning_enabled) out.push_back(&d);
  return out;
}

const FeatureDef* PredicateLibrary::find_feature(const std::string& name) const {
  for (const auto& f : features_)
    if (f.name == name) return &f;
  return nullptr;
}

bool eval_predicate(const PredicateLibrary& library, const PredicateDef& p,
                    std::span<const std::string> args, const Scene& scene) {
  if (static_cast<int>(args.size()) != p.arity)
    throw std::invalid_argument("predicate " + p.name + ": expected " +
                                std::to_string(p.arity) + " arguments");
  for (const auto& a : args) scene.at(a);  // throws on unknown object

  if (p.order == PredicateOrder::first) {
    for (const auto& c : p.constraint) {
      const double v = feature_value(c.feature, scene, args);
      if (!c.contains(v)) return false;
    }
    return true;
  }

  const HigherOrderForm& form = *p.form;
  const PredicateDef& base = library.at(form.base);

  if (form.op == HigherOp::negation)
    return !eval_predicate(library, base, args, scene);

  // Quantified position ranges over scene objects distinct from the fixed
  // arguments.
  std::vector<std::string> base_args(base.arity);
  int fixed = 0;
  for (int pos = 0; pos < base.arity; ++pos)
    if (pos != form.position) base_args[pos] = args[fixed++];

  for (const auto& obj : scene.objects) {
    bool is_fixed = false;
    for (const auto& a : args)
      if (a == obj.id) is_fixed = true;
    if (is_fixed) continue;
    base_args[form.position] = obj.id;
    const bool v = eval_predicate(library, base, base_args, scene);
    switch (form.op) {
      case HigherOp::forall:
        if (!v) return false;
        break;
      case HigherOp::forall_not:
        if (v) return false;
        break;
      case HigherOp::exists:
        if (v) return true;
        break;
      default: break;
    }
  }
  return form.op != HigherOp::exists;
}

bool eval_predicate(const PredicateLibrary& library, const std::string& name,
                    std::span<const std::string> args, const Scene& scene) {
  return eval_predicate(library, library.at(name), args, scene);
}

LogicalState ground_state(const Scene& scene, const PredicateLibrary& library) {
  LogicalState state;
  const auto ids = scene.object_ids();
  for (const PredicateDef* p : library.relevant_predicates()) {
    switch (p->arity) {
      case 0: {
        if (eval_predicate(library, *p, {}, scene)) state.insert({p->name, {}});
        break;
      }
      case 1: {
        for (const auto& a : ids) {
          const std::string args[] = {a};
          if (eval_predicate(library, *p, args, scene)) state.insert({p->name, {a}});
        }
        break;
      }
      case 2: {
        for (const auto& a : ids)
          for (const auto& b : ids) {
            if (a == b) continue;
            const std::string args[] = {a, b};
            if (eval_predicate(library, *p, args, scene)) state.insert({p->name, {a, b}});
          }
        break;
      }
      default: break;
    }
  }
  return state;
}

PredicateLibrary derive_higher_order(const PredicateLibrary& library,
                                     const DeriveOptions& options) {
  PredicateLibrary out = library;

  auto add_form = [&](const PredicateDef& base, HigherOp op, int position) {
    PredicateDef d;
    d.order = PredicateOrder::higher;
    d.origin = PredicateOrigin::derived;
    d.relevant = base.relevant;
    d.form = HigherOrderForm{op, base.name, position};
    switch (op) {
      case HigherOp::negation:
        d.name = "not_" + base.name;
        d.arity = base.arity;
        break;
      case HigherOp::forall:
        d.name = "forall_" + std::to_string(position) + "_" + base.name;
        d.arity = base.arity - 1;
        break;
      case HigherOp::forall_not:
        d.name = "forall_" + std::to_string(position) + "_not_" + base.name;
        d.arity = base.arity - 1;
        break;
      case HigherOp::exists:
        d.name = "exists_" + std::to_string(position) + "_" + base.name;
        d.arity = base.arity - 1;
        d.planning_enabled = false;
        break;
    }
    d.param_roles.assign(static_cast<std::size_t>(d.arity), "obj");
    if (library.has(d.name) && library.at(d.name).order == PredicateOrder::first)
      throw std::invalid_argument("derived name collides with existing predicate: " + d.name);
    if (!out.has(d.name)) out.add(std::move(d));
  };

  for (const auto& base : library.predicates()) {
    if (base.order != PredicateOrder::first) continue;
    if (base.arity >= 1) add_form(base, HigherOp::negation, 0);
    if (base.arity == 2) {
      for (int pos : options.forall_positions) {
        add_form(base, HigherOp::forall, pos);
        add_form(base, HigherOp::forall_not, pos);
        if (options.enable_exists) add_form(base, HigherOp::exists, pos);
      }
    }
  }
  return out;
}

PredicateDef refine_intervals(const PredicateDef& p, const RefineDirective& directive) {
  PredicateDef out = p;
  FeatureConstraint* target = nullptr;
  for (auto& c : out.constraint)
    if (c.feature == directive.feature) target = &c;
  if (!target)
    throw std::invalid_argument("refine_intervals: predicate has no constraint on " +
                                directive.feature);

  auto& ivs = target->intervals;
  if (directive.kind == RefineDirective::Kind::merge) {
    const auto& idx = directive.merge_indices;
    if (idx.size() < 2) throw std::invalid_argument("merge: need at least two indices");
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] < 0 || idx[i] >= static_cast<int>(ivs.size()))
        throw std::invalid_argument("merge: interval index out of range");
      if (i > 0 && idx[i] != idx[i - 1] + 1)
        throw std::invalid_argument("merge: indices must be contiguous");
    }
    for (std::size_t i = 1; i < idx.size(); ++i) {
      const Interval& prev = ivs[idx[i - 1]];
      const Interval& next = ivs[idx[i]];
      if (std::abs(prev.hi - next.lo) > 1e-9)
        throw std::invalid_argument("merge: intervals are not adjacent");
    }
    Interval merged = ivs[idx.front()];
    merged.hi = ivs[idx.back()].hi;
    merged.hi_closed = ivs[idx.back()].hi_closed;
    ivs.erase(ivs.begin() + idx.front(), ivs.begin() + idx.back() + 1);
    ivs.insert(ivs.begin() + idx.front(), merged);
  } else {
    if (directive.factor < 2) throw std::invalid_argument("subdivide: factor must be >= 2");
    if (directive.subdivide_index < 0 ||
        directive.subdivide_index >= static_cast<int>(ivs.size()))
      throw std::invalid_argument("subdivide: interval index out of range");
    const Interval whole = ivs[directive.subdivide_index];
    std::vector<Interval> parts;
    const double step = (whole.hi - whole.lo) / directive.factor;
    for (int i = 0; i < directive.factor; ++i) {
      Interval part;
      part.lo = whole.lo + step * i;
      part.hi = (i + 1 == directive.factor) ? whole.hi : whole.lo + step * (i + 1);
      part.lo_open = (i == 0) ? whole.lo_open : false;
      part.hi_closed = (i + 1 == directive.factor) ? whole.hi_closed : false;
      parts.push_back(part);
    }
    ivs.erase(ivs.begin() + directive.subdivide_index);
    ivs.insert(ivs.begin() + directive.subdivide_index, parts.begin(), parts.end());
  }
  out.origin = PredicateOrigin::refined;
  return out;
}

// ---- json ------------------------------------------------------------

namespace {

json interval_to(const Interval& iv) {
  return json{{"lo", iv.lo}, {"hi", iv.hi}, {"lo_open", iv.lo_open}, {"hi_closed", iv.hi_closed}};
}

Interval interval_from(const json& j) {
  Interval iv;
  iv.lo = j.at("lo").get<double>();
  iv.hi = j.at("hi").get<double>();
  iv.lo_open = j.value("lo_open", false);
  iv.hi_closed = j.value("hi_closed", false);
  return iv;
}

const char* order_name(PredicateOrder o) {
  return o == PredicateOrder::first ? "first" : "higher";
}
const char* origin_name(PredicateOrigin o) {
  switch (o) {
    case PredicateOrigin::summarized: return "summarized";
    case PredicateOrigin::derived: return "derived";
    default: return "refined";
  }
}
const char* op_name(HigherOp o) {
  switch (o) {
    case HigherOp::negation: return "not";
    case HigherOp::forall: return "forall";
    case HigherOp::forall_not: return "forall_not";
    default: return "exists";
  }
}

HigherOp op_from(const std::string& s) {
  if (s == "not") return HigherOp::negation;
  if (s == "forall") return HigherOp::forall;
  if (s == "forall_not") return HigherOp::forall_not;
  if (s == "exists") return HigherOp::exists;
  throw std::invalid_argument("unknown operator: " + s);
}

}  // namespace

std::string library_to_json_text(const PredicateLibrary& library) {
  json features = json::array();
  for (const auto& f : library.features())
    features.push_back(json{{"name", f.name},
                            {"arity", f.arity},
                            {"lo", f.lo},
                            {"hi", f.hi},
                            {"u", f.u},
                            {"units", f.units}});

  json preds = json::array();
  for (const auto& p : library.predicates()) {
    json constraint = json::array();
    for (const auto& c : p.constraint) {
      json ivs = json::array();
      for (const auto& iv : c.intervals) ivs.push_back(interval_to(iv));
      constraint.push_back(json{{"feature", c.feature}, {"intervals", ivs}});
    }
    json jp{{"name", p.name},
            {"arity", p.arity},
            {"param_roles", p.param_roles},
            {"constraint", constraint},
            {"order", order_name(p.order)},
            {"relevance", p.relevant ? "relevant" : "irrelevant"},
            {"origin", origin_name(p.origin)},
            {"planning_enabled", p.planning_enabled}};
    if (p.form)
      jp["form"] = json{{"op", op_name(p.form->op)},
                        {"base", p.form->base},
                        {"position", p.form->position}};
    preds.push_back(std::move(jp));
  }
  return json{{"features", features}, {"predicates", preds}}.dump(2) + "\n";
}

PredicateLibrary library_from_json_text(const std::string& text) {
  const json j = json::parse(text);
  std::vector<FeatureDef> features;
  for (const auto& jf : j.at("features")) {
    FeatureDef f;
    f.name = jf.at("name").get<std::string>();
    f.arity = jf.at("arity").get<int>();
    f.lo = jf.at("lo").get<double>();
    f.hi = jf.at("hi").get<double>();
    f.u = jf.at("u").get<double>();
    f.units = jf.value("units", "");
    features.push_back(std::move(f));
  }
  PredicateLibrary library(std::move(features));

  for (const auto& jp : j.at("predicates")) {
    PredicateDef p;
    p.name = jp.at("name").get<std::string>();
    p.arity = jp.at("arity").get<int>();
    p.param_roles = jp.at("param_roles").get<std::vector<std::string>>();
    p.order = jp.at("order").get<std::string>() == "first" ? PredicateOrder::first
                                                           : PredicateOrder::higher;
    p.relevant = jp.at("relevance").get<std::string>() == "relevant";
    const std::string origin = jp.at("origin").get<std::string>();
    p.origin = origin == "summarized" ? PredicateOrigin::summarized
               : origin == "derived"  ? PredicateOrigin::derived
                                      : PredicateOrigin::refined;
    p.planning_enabled = jp.value("planning_enabled", true);
    for (const auto& jc : jp.at("constraint")) {
      FeatureConstraint c;
      c.feature = jc.at("feature").get<std::string>();
      for (const auto& jiv : jc.at("intervals")) c.intervals.push_back(interval_from(jiv));
      p.constraint.push_back(std::move(c));
    }
    if (jp.contains("form")) {
      HigherOrderForm form;
      form.op = op_from(jp.at("form").at("op").get<std::string>());
      form.base = jp.at("form").at("base").get<std::string>();
      form.position = jp.at("form").at("position").get<int>();
      p.form = form;
    }
    library.add(std::move(p));
  }
  return library;
}

void save_library(const PredicateLibrary& library, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << library_to_json_text(library);
}

PredicateLibrary load_library(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return library_from_json_text(ss.str());
}

}  // namespace pddllm
