#pragma once

#include <algorithm>
#include <cmath>

namespace pddllm {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  bool operator==(const Vec3& o) const = default;
};

inline Vec3 lerp(const Vec3& a, const Vec3& b, double t) {
  return {a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t, a.z + (b.z - a.z) * t};
}

// Axis-aligned box given by min/max corners.
struct Aabb {
  Vec3 lo;
  Vec3 hi;

  bool contains_point(const Vec3& p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y &&
           p.z >= lo.z && p.z <= hi.z;
  }
  bool contains_box(const Aabb& b) const {
    return contains_point(b.lo) && contains_point(b.hi);
  }
};

// Penetration depth between two boxes: positive when they overlap on all
// three axes, in which case it is the smallest axis overlap.
inline double penetration_depth(const Aabb& a, const Aabb& b) {
  const double ox = std::min(a.hi.x, b.hi.x) - std::max(a.lo.x, b.lo.x);
  const double oy = std::min(a.hi.y, b.hi.y) - std::max(a.lo.y, b.lo.y);
  const double oz = std::min(a.hi.z, b.hi.z) - std::max(a.lo.z, b.lo.z);
  return std::min({ox, oy, oz});
}

// Overlap area of the xy footprints (zero when disjoint).
inline double xy_overlap_area(const Aabb& a, const Aabb& b) {
  const double ox = std::min(a.hi.x, b.hi.x) - std::max(a.lo.x, b.lo.x);
  const double oy = std::min(a.hi.y, b.hi.y) - std::max(a.lo.y, b.lo.y);
  if (ox <= 0.0 || oy <= 0.0) return 0.0;
  return ox * oy;
}

}  // namespace pddllm
