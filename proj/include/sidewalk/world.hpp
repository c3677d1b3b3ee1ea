#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <variant>
#include <vector>

#include "sidewalk/geometry.hpp"
#include "sidewalk/walkable_map.hpp"

namespace sidewalk {

inline constexpr double kMinSpeed = -0.10;  // meters per step
inline constexpr double kMaxSpeed = 0.20;
inline constexpr double kMaxYawDelta = 0.9425;  // radians per step, about 54 degrees
inline constexpr double kDefaultFootprintRadius = 0.35;

struct AgentState {
  Vec2 position;
  double heading = 0.0;  // CCW from +x, in (-pi, pi]
  double footprint_radius = kDefaultFootprintRadius;
  bool operator==(const AgentState&) const = default;
};

// Per-step command. Components are clamped into bounds on construction.
class Action {
 public:
  constexpr Action() = default;
  Action(double speed, double yaw_delta);

  double speed() const { return speed_; }
  double yaw_delta() const { return yaw_delta_; }
  bool operator==(const Action&) const = default;

 private:
  double speed_ = 0.0;
  double yaw_delta_ = 0.0;
};

struct Cylinder {
  double radius = 0.0;
  bool operator==(const Cylinder&) const = default;
};

struct Cuboid {
  double half_w = 0.0;  // along the local x axis
  double half_h = 0.0;  // along the local y axis
  double yaw = 0.0;
  bool operator==(const Cuboid&) const = default;
};

using ObstacleShape = std::variant<Cylinder, Cuboid>;

struct StaticMotion {
  bool operator==(const StaticMotion&) const = default;
};

// Constant-speed walker that re-draws its heading every reseed_period steps.
struct PedestrianMotion {
  double speed = 0.12;  // meters per step
  double heading = 0.0;
  int reseed_period = 25;
  bool operator==(const PedestrianMotion&) const = default;
};

using ObstacleMotion = std::variant<StaticMotion, PedestrianMotion>;

struct Obstacle {
  ObstacleShape shape;
  Vec2 position;
  ObstacleMotion motion;

  bool is_static() const { return std::holds_alternative<StaticMotion>(motion); }
  // Radius of a disc around position that covers the footprint.
  double bounding_radius() const;
  bool contains(Vec2 p) const;
  // Distance from p to the footprint; 0 inside.
  double distance_to(Vec2 p) const;
  bool operator==(const Obstacle&) const = default;
};

struct WorldState {
  AgentState agent;
  std::vector<Obstacle> obstacles;
  const WalkableMap* map = nullptr;
  int step_count = 0;
  std::mt19937_64 rng;
};

inline constexpr double kStartClearRadius = 1.5;
inline constexpr double kMinObstacleSize = 0.15;
inline constexpr double kMaxObstacleSize = 0.5;

// Places round(area * density / 100) static obstacles on walkable ground,
// alternating cylinder and cuboid. When clear_center is given no footprint
// comes within kStartClearRadius of it.
std::vector<Obstacle> populate_obstacles(const WalkableMap& map, double density_per_100m2,
                                         std::uint64_t seed,
                                         std::optional<Vec2> clear_center = std::nullopt);

// Cylinder pedestrians on walkable ground, headings uniform.
std::vector<Obstacle> spawn_pedestrians(const WalkableMap& map, int count, std::mt19937_64& rng,
                                        std::optional<Vec2> clear_center = std::nullopt);

// Rotate the agent by yaw_delta, then translate along the new heading. Moving
// obstacles advance one step. Collisions are judged elsewhere.
void step_dynamics(WorldState& state, const Action& action);

struct CollisionReport {
  bool hit = false;
  std::optional<std::size_t> obstacle_id;
};

CollisionReport collision_check(const WorldState& state);

// Agent center on walkable ground.
bool on_sidewalk(const WorldState& state);

}  // namespace sidewalk
