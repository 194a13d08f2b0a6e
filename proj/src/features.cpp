#include "pddllm/features.hpp"
#include "pddllm/features_internal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pddllm/rng.hpp"

namespace pddllm {

double compute_d_min(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("compute_d_min: empty value list");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    const double d = sorted[i] - sorted[i - 1];
    if (d > 1e-12) best = std::min(best, d);
  }
  if (!std::isfinite(best))
    throw DegenerateFeature("all values identical; no non-zero difference");
  return best;
}

std::size_t FeatureDef::interval_count() const {
  const double span = hi - lo;
  auto k = static_cast<std::size_t>(std::ceil(span / u - 1e-9));
  return std::max<std::size_t>(k, 1);
}

std::vector<Interval> discretize(const FeatureDef& feature) {
  feature.validate();
  const std::size_t k = feature.interval_count();
  std::vector<Interval> cells;
  cells.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    Interval cell;
    cell.lo = feature.lo + static_cast<double>(i) * feature.u;
    if (i + 1 == k) {
      cell.hi = feature.hi;
      cell.hi_closed = true;
    } else {
      cell.hi = feature.lo + static_cast<double>(i + 1) * feature.u;
    }
    cells.push_back(cell);
  }
  return cells;
}

std::optional<std::size_t> cell_index(const FeatureDef& feature, double v) {
  if (v < feature.lo || v > feature.hi) return std::nullopt;
  const std::size_t k = feature.interval_count();
  auto idx = static_cast<std::int64_t>(std::floor((v - feature.lo) / feature.u));
  if (idx < 0) idx = 0;
  if (idx >= static_cast<std::int64_t>(k)) idx = static_cast<std::int64_t>(k) - 1;
  return static_cast<std::size_t>(idx);
}

std::vector<Subspace> enumerate_subspaces(const std::vector<FeatureDef>& features,
                                          std::uint64_t cap) {
  if (features.empty())
    throw std::invalid_argument("enumerate_subspaces: need at least one feature");

  std::vector<std::vector<Interval>> grids;
  std::uint64_t total = 1;
  for (const auto& f : features) {
    grids.push_back(discretize(f));
    const std::uint64_t k = grids.back().size();
    if (total > cap / k + 1) throw SubspaceCapExceeded(total * k, cap);
    total *= k;
    if (total > cap) throw SubspaceCapExceeded(total, cap);
  }

  std::vector<Subspace> out;
  out.reserve(total);
  std::vector<std::size_t> idx(features.size(), 0);
  for (std::uint64_t n = 0; n < total; ++n) {
    Subspace sub;
    for (std::size_t f = 0; f < features.size(); ++f)
      sub.cells[features[f].name] = {static_cast<int>(idx[f]), grids[f][idx[f]]};
    out.push_back(std::move(sub));
    // advance the counter, last feature fastest
    for (std::size_t f = features.size(); f-- > 0;) {
      if (++idx[f] < grids[f].size()) break;
      idx[f] = 0;
    }
  }
  return out;
}

// ---- feature evaluation --------------------------------------------------

namespace {

enum class Kind { delta_pos, delta_color, delta_size, z_above_table, pos, color, size };

struct FeatureSpec {
  Kind kind;
  int axis;  // 0/1/2
};

std::optional<FeatureSpec> lookup(const std::string& name) {
  static const std::map<std::string, FeatureSpec> table = {
      {"delta_x", {Kind::delta_pos, 0}},      {"delta_y", {Kind::delta_pos, 1}},
      {"delta_z", {Kind::delta_pos, 2}},      {"delta_color_r", {Kind::delta_color, 0}},
      {"delta_color_g", {Kind::delta_color, 1}}, {"delta_color_b", {Kind::delta_color, 2}},
      {"delta_w", {Kind::delta_size, 0}},     {"delta_l", {Kind::delta_size, 1}},
      {"delta_h", {Kind::delta_size, 2}},     {"z_above_table", {Kind::z_above_table, 2}},
      {"pos_x", {Kind::pos, 0}},              {"pos_y", {Kind::pos, 1}},
      {"pos_z", {Kind::pos, 2}},              {"color_r", {Kind::color, 0}},
      {"color_g", {Kind::color, 1}},          {"color_b", {Kind::color, 2}},
      {"size_w", {Kind::size, 0}},            {"size_l", {Kind::size, 1}},
      {"size_h", {Kind::size, 2}},
  };
  auto it = table.find(name);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

double component(const Vec3& v, int axis) {
  switch (axis) {
    case 0: return v.x;
    case 1: return v.y;
    default: return v.z;
  }
}

void set_component(Vec3& v, int axis, double value) {
  switch (axis) {
    case 0: v.x = value; break;
    case 1: v.y = value; break;
    default: v.z = value; break;
  }
}

}  // namespace

bool is_known_feature(const std::string& name) { return lookup(name).has_value(); }

double feature_value(const std::string& feature, const Scene& scene,
                     std::span<const std::string> args) {
  const auto spec = lookup(feature);
  if (!spec) throw std::invalid_argument("unknown feature: " + feature);

  switch (spec->kind) {
    case Kind::delta_pos:
    case Kind::delta_color:
    case Kind::delta_size: {
      if (args.size() != 2)
        throw std::invalid_argument("feature " + feature + " needs two objects");
      const ObjectState& a = scene.at(args[0]);
      const ObjectState& b = scene.at(args[1]);
      const Vec3& va = spec->kind == Kind::delta_pos    ? a.position
                       : spec->kind == Kind::delta_color ? a.color
                                                          : a.size;
      const Vec3& vb = spec->kind == Kind::delta_pos    ? b.position
                       : spec->kind == Kind::delta_color ? b.color
                                                          : b.size;
      return component(va, spec->axis) - component(vb, spec->axis);
    }
    case Kind::z_above_table: {
      if (args.size() != 1)
        throw std::invalid_argument("feature " + feature + " needs one object");
      return scene.at(args[0]).bottom() - scene.table_height;
    }
    case Kind::pos:
    case Kind::color:
    case Kind::size: {
      if (args.size() != 1)
        throw std::invalid_argument("feature " + feature + " needs one object");
      const ObjectState& a = scene.at(args[0]);
      const Vec3& v = spec->kind == Kind::pos ? a.position
                       : spec->kind == Kind::color ? a.color
                                                   : a.size;
      return component(v, spec->axis);
    }
  }
  throw std::logic_error("unreachable");
}

void apply_feature_value(const std::string& feature, double value,
                         ObjectState& target, const ObjectState* reference,
                         double table_height) {
  const auto spec = lookup(feature);
  if (!spec) throw std::invalid_argument("unknown feature: " + feature);

  auto need_ref = [&]() -> const ObjectState& {
    if (!reference)
      throw std::invalid_argument("feature " + feature + " needs a reference object");
    return *reference;
  };

  switch (spec->kind) {
    case Kind::delta_pos:
      set_component(target.position, spec->axis,
                    component(need_ref().position, spec->axis) + value);
      break;
    case Kind::delta_color:
      set_component(target.color, spec->axis,
                    std::clamp(component(need_ref().color, spec->axis) + value, 0.0, 1.0));
      break;
    case Kind::delta_size:
      set_component(target.size, spec->axis,
                    std::max(component(need_ref().size, spec->axis) + value, 1e-4));
      break;
    case Kind::z_above_table:
      target.position.z = table_height + value + target.size.z * 0.5;
      break;
    case Kind::pos:
      set_component(target.position, spec->axis, value);
      break;
    case Kind::color:
      set_component(target.color, spec->axis, std::clamp(value, 0.0, 1.0));
      break;
    case Kind::size:
      set_component(target.size, spec->axis, std::max(value, 1e-4));
      break;
  }
}

std::vector<std::size_t> cell_strides(const std::vector<FeatureDef>& features) {
  std::vector<std::size_t> strides(features.size(), 1);
  for (std::size_t f = features.size() - 1; f-- > 0;)
    strides[f] = strides[f + 1] * features[f + 1].interval_count();
  return strides;
}

std::uint64_t cell_count_total(const std::vector<FeatureDef>& features) {
  std::uint64_t total = 1;
  for (const auto& f : features) total *= f.interval_count();
  return total;
}

std::vector<int> address_to_indices(const std::vector<FeatureDef>& features,
                                    std::uint64_t address) {
  const auto strides = cell_strides(features);
  std::vector<int> idx(features.size());
  for (std::size_t f = 0; f < features.size(); ++f) {
    idx[f] = static_cast<int>(address / strides[f]);
    address %= strides[f];
  }
  return idx;
}

std::map<std::uint64_t, bool> sample_cell_flags(const std::vector<FeatureDef>& features,
                                                const Scene& scene_template, std::size_t n,
                                                std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_and_filter: n must be >= 1");
  if (features.empty())
    throw std::invalid_argument("sample_and_filter: need at least one feature");

  int arity = 1;
  for (const auto& f : features) arity = std::max(arity, f.arity);
  if (scene_template.objects.size() < static_cast<std::size_t>(arity))
    throw std::invalid_argument("sample_and_filter: scene template too small");

  const auto strides = cell_strides(features);
  Rng rng(seed);
  std::map<std::uint64_t, bool> flags;

  for (std::size_t s = 0; s < n; ++s) {
    Scene sample = scene_template;
    ObjectState& target = sample.objects[0];
    std::uint64_t address = 0;
    for (std::size_t f = 0; f < features.size(); ++f) {
      const double v = rng.uniform(features[f].lo, features[f].hi);
      address += strides[f] * *cell_index(features[f], v);
      apply_feature_value(features[f].name, v, target,
                          arity == 2 ? &sample.objects[1] : nullptr, sample.table_height);
    }
    const bool ok = check_feasible(sample);
    auto [it, inserted] = flags.emplace(address, ok);
    if (!inserted) it->second = it->second || ok;
  }
  return flags;
}

std::vector<Subspace> sample_and_filter(const std::vector<FeatureDef>& features,
                                        const Scene& scene_template, std::size_t n,
                                        std::uint64_t seed, std::uint64_t cap) {
  std::vector<Subspace> cells = enumerate_subspaces(features, cap);
  const auto flags = sample_cell_flags(features, scene_template, n, seed);
  for (const auto& [address, feasible] : flags) cells[address].feasible = feasible;
  return cells;
}

// ---- complexity estimators -------------------------------------------

std::uint64_t derivation_complexity(std::span<const PartitionSpec> types) {
  const std::uint64_t limit = 1ULL << 63;
  std::uint64_t total = 0;
  for (const auto& t : types) {
    if (t.partitions_per_dim < 1 || t.dims < 1)
      throw std::invalid_argument("derivation_complexity: n_p and n_dim must be >= 1");
    std::uint64_t term = 1;
    for (std::uint64_t d = 0; d < t.dims; ++d) {
      if (t.partitions_per_dim != 0 && term > limit / t.partitions_per_dim)
        throw std::overflow_error("derivation_complexity: term overflow");
      term *= t.partitions_per_dim;
    }
    if (total > limit - term) throw std::overflow_error("derivation_complexity: sum overflow");
    total += term;
  }
  return total;
}

ComplexityValue planning_complexity(std::uint64_t actions, std::uint64_t objects,
                                    std::uint64_t plan_length) {
  if (actions < 1 || objects < 1 || plan_length < 1)
    throw std::invalid_argument("planning_complexity: arguments must be >= 1");
  const std::uint64_t base = actions * objects;
  ComplexityValue result;
  result.log10_value = static_cast<double>(plan_length) * std::log10(static_cast<double>(base));

  std::uint64_t value = 1;
  for (std::uint64_t i = 0; i < plan_length; ++i) {
    if (base != 0 && value > (1ULL << 62) / base) {
      result.exact = false;
      return result;
    }
    value *= base;
  }
  result.value = value;
  return result;
}

// ---- config ---------------------------------------------------------------

std::vector<FeatureFamilyConfig> feature_config_from_json_text(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  std::vector<FeatureFamilyConfig> out;
  for (const auto& jf : j.at("families")) {
    FeatureFamilyConfig fam;
    fam.name = jf.at("name").get<std::string>();
    fam.arity = jf.at("arity").get<int>();
    for (const auto& je : jf.at("features")) {
      FeatureConfigEntry entry;
      entry.def.name = je.at("name").get<std::string>();
      entry.def.arity = fam.arity;
      entry.def.lo = je.at("lo").get<double>();
      entry.def.hi = je.at("hi").get<double>();
      if (je.contains("units")) entry.def.units = je.at("units").get<std::string>();
      const auto& ju = je.at("u");
      if (ju.is_string()) {
        if (ju.get<std::string>() != "d_min")
          throw std::invalid_argument("feature u: expected a number or \"d_min\"");
        entry.d_min_requested = true;
      } else {
        entry.def.u = ju.get<double>();
      }
      if (!is_known_feature(entry.def.name))
        throw std::invalid_argument("unknown feature in config: " + entry.def.name);
      fam.features.push_back(std::move(entry));
    }
    out.push_back(std::move(fam));
  }
  return out;
}

std::vector<FeatureFamilyConfig> load_feature_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return feature_config_from_json_text(ss.str());
}

}  // namespace pddllm
