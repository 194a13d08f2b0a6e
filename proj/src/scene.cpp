#include "pddllm/scene.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace pddllm {

using nlohmann::json;

const ObjectState* Scene::find(const std::string& id) const {
  for (const auto& o : objects)
    if (o.id == id) return &o;
  return nullptr;
}

const ObjectState& Scene::at(const std::string& id) const {
  const ObjectState* o = find(id);
  if (!o) throw std::invalid_argument("unknown object id: " + id);
  return *o;
}

std::vector<std::string> Scene::object_ids() const {
  std::vector<std::string> ids;
  ids.reserve(objects.size());
  for (const auto& o : objects) ids.push_back(o.id);
  return ids;
}

void Scene::sort_objects() {
  std::sort(objects.begin(), objects.end(),
            [](const ObjectState& a, const ObjectState& b) { return a.id < b.id; });
}

void Scene::validate() const {
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto& o = objects[i];
    if (o.size.x <= 0.0 || o.size.y <= 0.0 || o.size.z <= 0.0)
      throw std::invalid_argument("object " + o.id + ": size must be positive");
    for (double c : {o.color.x, o.color.y, o.color.z})
      if (c < 0.0 || c > 1.0)
        throw std::invalid_argument("object " + o.id + ": color outside [0,1]");
    if (!workspace.contains_point(o.position))
      throw std::invalid_argument("object " + o.id + ": position outside workspace");
    for (std::size_t j = i + 1; j < objects.size(); ++j)
      if (objects[j].id == o.id)
        throw std::invalid_argument("duplicate object id: " + o.id);
  }
}

namespace {

bool is_supported(const Scene& scene, const ObjectState& obj) {
  if (std::abs(obj.bottom() - scene.table_height) <= kSupportTol) return true;
  const double own_area = obj.size.x * obj.size.y;
  for (const auto& other : scene.objects) {
    if (other.id == obj.id) continue;
    if (std::abs(obj.bottom() - other.top()) > kSupportTol) continue;
    if (xy_overlap_area(obj.box(), other.box()) >= kSupportAreaFraction * own_area)
      return true;
  }
  return false;
}

}  // namespace

bool check_feasible(const Scene& scene) {
  const auto& objs = scene.objects;
  for (std::size_t i = 0; i < objs.size(); ++i)
    for (std::size_t j = i + 1; j < objs.size(); ++j)
      if (penetration_depth(objs[i].box(), objs[j].box()) > kPenetrationTol)
        return false;
  for (const auto& o : objs)
    if (!is_supported(scene, o)) return false;
  return true;
}

PlacementResult apply_placement(const Scene& scene, const std::string& id,
                                const TargetPose& target) {
  scene.at(id);  // throws on unknown id

  Scene moved = scene;
  for (auto& o : moved.objects) {
    if (o.id != id) continue;
    o.position = {target.x, target.y, target.z};
    o.yaw = target.yaw;
  }

  PlacementResult result;
  const ObjectState& obj = moved.at(id);
  if (!moved.workspace.contains_box(obj.box())) {
    result.violation = PlacementViolation::out_of_workspace;
    result.detail = id + " outside workspace bounds";
    return result;
  }
  for (const auto& other : moved.objects) {
    if (other.id == id) continue;
    if (penetration_depth(obj.box(), other.box()) > kPenetrationTol) {
      result.violation = PlacementViolation::overlap;
      result.detail = id + " overlaps " + other.id;
      return result;
    }
  }
  if (!check_feasible(moved)) {
    result.violation = PlacementViolation::unsupported;
    result.detail = id + " move leaves the scene unsupported";
    return result;
  }
  result.scene = std::move(moved);
  return result;
}

// ---- json ------------------------------------------------------------

namespace {

Vec3 vec3_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json vec3_to(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

ObjectState object_from(const std::string& id, const json& j) {
  ObjectState o;
  o.id = id;
  o.position = vec3_from(j.at("pos"));
  o.size = vec3_from(j.at("size"));
  o.color = vec3_from(j.at("color"));
  if (j.contains("yaw")) o.yaw = j.at("yaw").get<double>();
  if (j.contains("mass")) o.mass = j.at("mass").get<double>();
  return o;
}

json object_to(const ObjectState& o) {
  json j{{"pos", vec3_to(o.position)},
         {"size", vec3_to(o.size)},
         {"color", vec3_to(o.color)},
         {"yaw", o.yaw}};
  if (o.mass) j["mass"] = *o.mass;
  return j;
}

Aabb workspace_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("workspace: expected [[min],[max]]");
  return {vec3_from(j[0]), vec3_from(j[1])};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

}  // namespace

Scene scene_from_json_text(const std::string& text) {
  const json j = json::parse(text);
  Scene scene;
  scene.workspace = workspace_from(j.at("workspace"));
  scene.table_height = j.at("table_z").get<double>();
  for (const auto& [id, jo] : j.at("objects").items())
    scene.objects.push_back(object_from(id, jo));
  scene.sort_objects();
  scene.validate();
  return scene;
}

std::string scene_to_json_text(const Scene& scene) {
  json objs = json::object();
  for (const auto& o : scene.objects) objs[o.id] = object_to(o);
  const json j{{"objects", objs},
               {"workspace", json::array({vec3_to(scene.workspace.lo), vec3_to(scene.workspace.hi)})},
               {"table_z", scene.table_height}};
  return j.dump(2) + "\n";
}

Scene load_scene(const std::string& path) { return scene_from_json_text(read_file(path)); }

void save_scene(const Scene& scene, const std::string& path) {
  write_file(path, scene_to_json_text(scene));
}

Trajectory trajectory_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed trajectory file: ") + e.what());
  }

  Trajectory traj;
  traj.task_description = j.value("task", "");

  // Workspace bounds are not part of every recording; fall back to a padded
  // bounding box of everything observed.
  std::optional<Aabb> workspace;
  double table_z = 0.0;
  bool have_table = false;
  if (j.contains("workspace")) workspace = workspace_from(j.at("workspace"));
  if (j.contains("table_z")) {
    table_z = j.at("table_z").get<double>();
    have_table = true;
  }

  if (!j.contains("steps") || !j.at("steps").is_array())
    throw std::invalid_argument("malformed trajectory file: missing steps array");

  std::vector<std::string> reference_ids;
  std::size_t index = 0;
  for (const auto& js : j.at("steps")) {
    Trajectory::Step step;
    try {
      step.t = js.at("t").get<double>();
      const auto& ee = js.at("ee");
      step.ee = {ee.at(0).get<double>(), ee.at(1).get<double>(), ee.at(2).get<double>(),
                 ee.at(3).get<double>()};
      for (const auto& [id, jo] : js.at("objects").items())
        step.scene.objects.push_back(object_from(id, jo));
    } catch (const json::exception& e) {
      throw std::invalid_argument("step " + std::to_string(index) + ": " + e.what());
    }
    step.scene.sort_objects();
    traj.steps.push_back(std::move(step));
    ++index;
  }
  if (traj.steps.empty()) throw std::invalid_argument("trajectory has no steps");

  reference_ids = traj.steps.front().scene.object_ids();
  for (std::size_t i = 0; i < traj.steps.size(); ++i) {
    if (traj.steps[i].scene.object_ids() != reference_ids)
      throw std::invalid_argument("step " + std::to_string(i) +
                                  ": object set differs from step 0");
    if (i > 0 && traj.steps[i].t <= traj.steps[i - 1].t)
      throw std::invalid_argument("step " + std::to_string(i) +
                                  ": timestamps must be strictly increasing");
  }

  if (!workspace) {
    Aabb box{{1e18, 1e18, 1e18}, {-1e18, -1e18, -1e18}};
    double min_bottom = 1e18;
    for (const auto& s : traj.steps)
      for (const auto& o : s.scene.objects) {
        const Aabb b = o.box();
        box.lo.x = std::min(box.lo.x, b.lo.x);
        box.lo.y = std::min(box.lo.y, b.lo.y);
        box.lo.z = std::min(box.lo.z, b.lo.z);
        box.hi.x = std::max(box.hi.x, b.hi.x);
        box.hi.y = std::max(box.hi.y, b.hi.y);
        box.hi.z = std::max(box.hi.z, b.hi.z);
        min_bottom = std::min(min_bottom, o.bottom());
      }
    const Vec3 pad{0.2, 0.2, 0.2};
    workspace = Aabb{box.lo - pad, box.hi + pad};
    if (!have_table) table_z = min_bottom;
  }

  for (auto& s : traj.steps) {
    s.scene.workspace = *workspace;
    s.scene.table_height = table_z;
    s.scene.validate();
  }
  return traj;
}

Trajectory ingest_demonstration(const std::string& path) {
  return trajectory_from_json_text(read_file(path));
}

std::string trajectory_to_json_text(const Trajectory& traj) {
  json steps = json::array();
  for (const auto& s : traj.steps) {
    json objs = json::object();
    for (const auto& o : s.scene.objects) objs[o.id] = object_to(o);
    steps.push_back(json{{"t", s.t},
                         {"ee", json::array({s.ee.x, s.ee.y, s.ee.z, s.ee.yaw})},
                         {"objects", objs}});
  }
  json j{{"task", traj.task_description}, {"steps", steps}};
  if (!traj.steps.empty()) {
    const Scene& ref = traj.steps.front().scene;
    j["workspace"] = json::array({vec3_to(ref.workspace.lo), vec3_to(ref.workspace.hi)});
    j["table_z"] = ref.table_height;
  }
  return j.dump() + "\n";
}

void save_trajectory(const Trajectory& traj, const std::string& path) {
  write_file(path, trajectory_to_json_text(traj));
}

}  // namespace pddllm
