#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "quadmppi/dynamics.hpp"

namespace quadmppi {

/// Axis-aligned box, closed.
struct Box {
  Vec3 min_corner = Vec3::Zero();
  Vec3 max_corner = Vec3::Zero();

  Vec3 closest_point(const Vec3& p) const { return p.cwiseMax(min_corner).cwiseMin(max_corner); }
  double squared_distance(const Vec3& p) const { return (p - closest_point(p)).squaredNorm(); }
  bool contains(const Box& other) const {
    return (other.min_corner.array() >= min_corner.array()).all() &&
           (other.max_corner.array() <= max_corner.array()).all();
  }
};

/// Pillar with a vertical axis.
struct VerticalCylinder {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 0.0;
  double z_min = 0.0;
  double z_max = 0.0;

  double squared_distance(const Vec3& p) const {
    const double radial = std::max((p.head<2>() - center).norm() - radius, 0.0);
    const double axial = std::max({z_min - p.z(), p.z() - z_max, 0.0});
    return radial * radial + axial * axial;
  }
};

/// Box-shaped wall with rectangular openings cut out of it.
struct WallWithWindow {
  Box wall;
  std::vector<Box> windows;
};

using Obstacle = std::variant<VerticalCylinder, Box, WallWithWindow>;

namespace detail {

inline bool sphere_hits_box(const Box& box, const Vec3& p, double r) {
  return box.squared_distance(p) <= r * r;
}

/// True when the part of the sphere's bounding box that lies inside the wall
/// is strictly inside one window. A window face that coincides with a wall
/// face is open on that side. Spheres straddling two windows count as hits.
inline bool sphere_passes_window(const WallWithWindow& w, const Vec3& p, double r) {
  const Vec3 lo = (p.array() - r).matrix().cwiseMax(w.wall.min_corner);
  const Vec3 hi = (p.array() + r).matrix().cwiseMin(w.wall.max_corner);
  for (const Box& win : w.windows) {
    bool inside = true;
    for (int i = 0; i < 3 && inside; ++i) {
      const bool lo_ok = lo(i) > win.min_corner(i) || win.min_corner(i) <= w.wall.min_corner(i);
      const bool hi_ok = hi(i) < win.max_corner(i) || win.max_corner(i) >= w.wall.max_corner(i);
      inside = lo_ok && hi_ok;
    }
    if (inside) return true;
  }
  return false;
}

}  // namespace detail

/// Sphere-vs-obstacle test; touching counts as a collision.
inline bool sphere_hits(const Obstacle& obstacle, const Vec3& p, double r) {
  return std::visit(
      [&](const auto& o) -> bool {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, VerticalCylinder>) {
          return o.squared_distance(p) <= r * r;
        } else if constexpr (std::is_same_v<T, Box>) {
          return detail::sphere_hits_box(o, p, r);
        } else {
          return detail::sphere_hits_box(o.wall, p, r) && !detail::sphere_passes_window(o, p, r);
        }
      },
      obstacle);
}

inline void validate_obstacle(const Obstacle& obstacle) {
  std::visit(
      [](const auto& o) {
        using T = std::decay_t<decltype(o)>;
        auto check_box = [](const Box& b, const char* what) {
          if (!b.min_corner.allFinite() || !b.max_corner.allFinite() ||
              !(b.min_corner.array() < b.max_corner.array()).all()) {
            throw std::invalid_argument(std::string(what) + ": min corner must be below max corner");
          }
        };
        if constexpr (std::is_same_v<T, VerticalCylinder>) {
          if (!(o.radius > 0.0)) throw std::invalid_argument("cylinder: radius must be positive");
          if (!(o.z_min < o.z_max)) throw std::invalid_argument("cylinder: z_min must be below z_max");
          if (!o.center.allFinite()) throw std::invalid_argument("cylinder: center must be finite");
        } else if constexpr (std::is_same_v<T, Box>) {
          check_box(o, "box");
        } else {
          check_box(o.wall, "wall");
          for (const Box& win : o.windows) {
            check_box(win, "window");
            if (!o.wall.contains(win)) throw std::invalid_argument("window: must lie within its wall");
          }
        }
      },
      obstacle);
}

/// Static obstacle set queried with an inflated point (the drone is a sphere).
/// Immutable once built, so concurrent queries are safe.
class CollisionWorld {
 public:
  static constexpr double kDefaultDroneRadius = 0.35;
  /// Largest gap between sampled points when a segment is checked.
  static constexpr double kSweepResolution = 0.05;

  CollisionWorld() = default;
  explicit CollisionWorld(std::vector<Obstacle> obstacles,
                          double drone_radius = kDefaultDroneRadius)
      : obstacles_(std::move(obstacles)), drone_radius_(drone_radius) {
    if (!(drone_radius_ >= 0.0)) throw std::invalid_argument("CollisionWorld: drone radius must be >= 0");
    bounds_.reserve(obstacles_.size());
    for (const Obstacle& o : obstacles_) {
      validate_obstacle(o);
      bounds_.push_back(inflated_bounds(o));
    }
  }

  const std::vector<Obstacle>& obstacles() const { return obstacles_; }
  double drone_radius() const { return drone_radius_; }
  bool empty() const { return obstacles_.empty(); }

  CollisionWorld with_drone_radius(double r) const { return CollisionWorld(obstacles_, r); }

  bool is_colliding(const Vec3& p) const {
    for (const Obstacle& o : obstacles_) {
      if (sphere_hits(o, p, drone_radius_)) return true;
    }
    return false;
  }

  /// True when the sphere touches an obstacle anywhere on the straight path
  /// from a to b. Obstacles whose inflated bounds miss the segment's bounds
  /// are skipped; the rest are sampled at kSweepResolution spacing.
  bool segment_colliding(const Vec3& a, const Vec3& b) const {
    const Vec3 lo = a.cwiseMin(b);
    const Vec3 hi = a.cwiseMax(b);
    const double length = (b - a).norm();
    const int samples = std::max(1, static_cast<int>(std::ceil(length / kSweepResolution)));
    for (std::size_t i = 0; i < obstacles_.size(); ++i) {
      const Box& box = bounds_[i];
      if ((hi.array() < box.min_corner.array()).any() || (lo.array() > box.max_corner.array()).any()) continue;
      for (int s = 1; s <= samples; ++s) {
        const Vec3 p = a + (static_cast<double>(s) / samples) * (b - a);
        if (sphere_hits(obstacles_[i], p, drone_radius_)) return true;
      }
    }
    return false;
  }

  /// Number of colliding states in a rollout. State 0 is checked as a point;
  /// state j > 0 counts when the path from state j - 1 to it collides.
  std::size_t rollout_collision_count(std::span<const State> states) const {
    std::size_t n = 0;
    for (std::size_t j = 0; j < states.size(); ++j) {
      const bool hit = j == 0 ? is_colliding(states[0].p()) : segment_colliding(states[j - 1].p(), states[j].p());
      n += hit ? 1 : 0;
    }
    return n;
  }

 private:
  Box inflated_bounds(const Obstacle& obstacle) const {
    const Vec3 r = Vec3::Constant(drone_radius_);
    return std::visit(
        [&](const auto& o) -> Box {
          using T = std::decay_t<decltype(o)>;
          if constexpr (std::is_same_v<T, VerticalCylinder>) {
            return Box{Vec3(o.center.x() - o.radius, o.center.y() - o.radius, o.z_min) - r,
                       Vec3(o.center.x() + o.radius, o.center.y() + o.radius, o.z_max) + r};
          } else if constexpr (std::is_same_v<T, Box>) {
            return Box{o.min_corner - r, o.max_corner + r};
          } else {
            return Box{o.wall.min_corner - r, o.wall.max_corner + r};
          }
        },
        obstacle);
  }

  std::vector<Obstacle> obstacles_;
  double drone_radius_ = kDefaultDroneRadius;
  std::vector<Box> bounds_;
};

// ---------------------------------------------------------------------------
// World files (JSON).
//
// {
//   "schema": "quadmppi.world/1",
//   "drone_radius": 0.35,
//   "obstacles": [
//     {"type": "cylinder", "center": [x, y], "radius": r, "z_min": a, "z_max": b},
//     {"type": "box", "min": [x, y, z], "max": [x, y, z]},
//     {"type": "wall", "min": [...], "max": [...],
//      "windows": [{"min": [...], "max": [...]}]}
//   ]
// }
// ---------------------------------------------------------------------------

inline constexpr const char* kWorldSchema = "quadmppi.world/1";

class WorldFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline Vec3 vec3_from_json(const nlohmann::json& j, const char* key) {
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 3) {
    throw WorldFileError(std::string("field '") + key + "' must be an array of 3 numbers");
  }
  return Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
}

inline nlohmann::json vec_to_json(const auto& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Box box_from_json(const nlohmann::json& j) {
  return Box{vec3_from_json(j, "min"), vec3_from_json(j, "max")};
}

inline nlohmann::json box_to_json(const Box& b) {
  return {{"min", vec_to_json(b.min_corner)}, {"max", vec_to_json(b.max_corner)}};
}

}  // namespace detail

inline nlohmann::json world_to_json(const CollisionWorld& world) {
  nlohmann::json obstacles = nlohmann::json::array();
  for (const Obstacle& o : world.obstacles()) {
    std::visit(
        [&](const auto& ob) {
          using T = std::decay_t<decltype(ob)>;
          nlohmann::json j;
          if constexpr (std::is_same_v<T, VerticalCylinder>) {
            j = {{"type", "cylinder"}, {"center", detail::vec_to_json(ob.center)},
                 {"radius", ob.radius}, {"z_min", ob.z_min}, {"z_max", ob.z_max}};
          } else if constexpr (std::is_same_v<T, Box>) {
            j = detail::box_to_json(ob);
            j["type"] = "box";
          } else {
            j = detail::box_to_json(ob.wall);
            j["type"] = "wall";
            j["windows"] = nlohmann::json::array();
            for (const Box& w : ob.windows) j["windows"].push_back(detail::box_to_json(w));
          }
          obstacles.push_back(std::move(j));
        },
        o);
  }
  return {{"schema", kWorldSchema}, {"drone_radius", world.drone_radius()}, {"obstacles", obstacles}};
}

inline CollisionWorld world_from_json(const nlohmann::json& j) {
  try {
    if (j.contains("schema") && j.at("schema").get<std::string>() != kWorldSchema) {
      throw WorldFileError("unsupported world schema '" + j.at("schema").get<std::string>() + "'");
    }
    std::vector<Obstacle> obstacles;
    std::size_t index = 0;
    for (const auto& o : j.at("obstacles")) {
      const std::string type = o.at("type").get<std::string>();
      try {
        if (type == "cylinder") {
          const auto& c = o.at("center");
          if (!c.is_array() || c.size() != 2) throw WorldFileError("'center' must be [x, y]");
          obstacles.emplace_back(VerticalCylinder{Eigen::Vector2d(c[0].get<double>(), c[1].get<double>()),
                                                  o.at("radius").get<double>(), o.at("z_min").get<double>(),
                                                  o.at("z_max").get<double>()});
        } else if (type == "box") {
          obstacles.emplace_back(detail::box_from_json(o));
        } else if (type == "wall") {
          WallWithWindow wall{detail::box_from_json(o), {}};
          if (o.contains("windows")) {
            for (const auto& w : o.at("windows")) wall.windows.push_back(detail::box_from_json(w));
          }
          obstacles.emplace_back(std::move(wall));
        } else {
          throw WorldFileError("unknown obstacle type '" + type + "'");
        }
        validate_obstacle(obstacles.back());
      } catch (const std::exception& e) {
        throw WorldFileError("obstacle " + std::to_string(index) + " (" + type + "): " + e.what());
      }
      ++index;
    }
    const double r = j.value("drone_radius", CollisionWorld::kDefaultDroneRadius);
    return CollisionWorld(std::move(obstacles), r);
  } catch (const WorldFileError&) {
    throw;
  } catch (const std::exception& e) {
    throw WorldFileError(e.what());
  }
}

inline CollisionWorld load_world(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw WorldFileError("cannot open world file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw WorldFileError(path + ": " + e.what());
  }
  try {
    return world_from_json(j);
  } catch (const WorldFileError& e) {
    throw WorldFileError(path + ": " + e.what());
  }
}

inline void save_world(const CollisionWorld& world, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw WorldFileError("cannot write world file '" + path + "'");
  out << world_to_json(world).dump(2) << '\n';
}

}  // namespace quadmppi
