#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pddllm/geometry.hpp"

namespace pddllm {

// Tolerances for the static feasibility rules. Boxes may interpenetrate up
// to kPenetrationTol; a resting face matches its support within kSupportTol;
// an object counts as supported when at least half of its footprint sits on
// the face below.
inline constexpr double kPenetrationTol = 1e-4;
inline constexpr double kSupportTol = 1e-3;
inline constexpr double kSupportAreaFraction = 0.5;

struct ObjectState {
  std::string id;
  Vec3 position;               // center, meters
  Vec3 size;                   // width / length / height, meters
  Vec3 color;                  // rgb in [0,1]
  double yaw = 0.0;            // radians; does not affect collision extents
  std::optional<double> mass;  // kg

  Aabb box() const {
    const Vec3 half = size * 0.5;
    return {position - half, position + half};
  }
  double top() const { return position.z + size.z * 0.5; }
  double bottom() const { return position.z - size.z * 0.5; }
};

struct Scene {
  std::vector<ObjectState> objects;  // kept sorted by id
  Aabb workspace;
  double table_height = 0.0;

  const ObjectState* find(const std::string& id) const;
  const ObjectState& at(const std::string& id) const;
  bool has(const std::string& id) const { return find(id) != nullptr; }
  std::vector<std::string> object_ids() const;

  void sort_objects();
  // Throws std::invalid_argument on a violated invariant (non-positive size,
  // color outside [0,1], duplicate id, center outside the workspace).
  void validate() const;
};

struct EndEffectorPose {
  double x = 0.0, y = 0.0, z = 0.0, yaw = 0.0;
};

struct Trajectory {
  struct Step {
    double t = 0.0;
    Scene scene;
    EndEffectorPose ee;
  };
  std::vector<Step> steps;
  std::string task_description;
};

// True iff no pair of boxes interpenetrates beyond tolerance and every
// object rests on the table or on another object covering at least half of
// its footprint. Deterministic and independent of object listing order.
bool check_feasible(const Scene& scene);

enum class PlacementViolation { none, overlap, unsupported, out_of_workspace };

struct PlacementResult {
  std::optional<Scene> scene;  // present iff the move was feasible
  PlacementViolation violation = PlacementViolation::none;
  std::string detail;

  bool ok() const { return scene.has_value(); }
};

struct TargetPose {
  double x = 0.0, y = 0.0, z = 0.0, yaw = 0.0;
};

// Returns the moved scene when the result is feasible, otherwise a report
// naming the violated condition. Throws on an unknown object id.
PlacementResult apply_placement(const Scene& scene, const std::string& id,
                                const TargetPose& target);

// ---- file formats ----------------------------------------------------

Scene load_scene(const std::string& path);
void save_scene(const Scene& scene, const std::string& path);
Scene scene_from_json_text(const std::string& text);
std::string scene_to_json_text(const Scene& scene);

// Reads a recorded demonstration. Reports malformed steps, inconsistent
// object sets and non-monotone timestamps with their step index.
Trajectory ingest_demonstration(const std::string& path);
Trajectory trajectory_from_json_text(const std::string& text);
std::string trajectory_to_json_text(const Trajectory& traj);
void save_trajectory(const Trajectory& traj, const std::string& path);

}  // namespace pddllm
