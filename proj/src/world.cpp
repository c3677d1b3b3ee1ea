#include "sidewalk/world.hpp"

#include <algorithm>
#include <cmath>

namespace sidewalk {

Action::Action(double speed, double yaw_delta)
    : speed_(std::clamp(speed, kMinSpeed, kMaxSpeed)),
      yaw_delta_(std::clamp(yaw_delta, -kMaxYawDelta, kMaxYawDelta)) {}

namespace {

struct Overloaded {
  template <class... Fs>
  struct Set : Fs... {
    using Fs::operator()...;
  };
};

template <class... Fs>
Overloaded::Set<Fs...> overloaded(Fs... fs) {
  return {fs...};
}

// p expressed in the cuboid's local frame.
Vec2 to_local(const Cuboid& c, Vec2 center, Vec2 p) { return rotate(p - center, -c.yaw); }

}  // namespace

double Obstacle::bounding_radius() const {
  return std::visit(overloaded([](const Cylinder& c) { return c.radius; },
                               [](const Cuboid& c) { return std::hypot(c.half_w, c.half_h); }),
                    shape);
}

bool Obstacle::contains(Vec2 p) const {
  return std::visit(
      overloaded([&](const Cylinder& c) { return distance(p, position) <= c.radius; },
                 [&](const Cuboid& c) {
                   const Vec2 l = to_local(c, position, p);
                   return std::abs(l.x) <= c.half_w && std::abs(l.y) <= c.half_h;
                 }),
      shape);
}

double Obstacle::distance_to(Vec2 p) const {
  return std::visit(
      overloaded([&](const Cylinder& c) { return std::max(0.0, distance(p, position) - c.radius); },
                 [&](const Cuboid& c) {
                   const Vec2 l = to_local(c, position, p);
                   const Vec2 closest{std::clamp(l.x, -c.half_w, c.half_w),
                                      std::clamp(l.y, -c.half_h, c.half_h)};
                   return distance(l, closest);
                 }),
      shape);
}

namespace {

std::optional<Vec2> sample_walkable(const WalkableMap& map, std::mt19937_64& rng, int attempts) {
  const Box& b = map.bounds();
  std::uniform_real_distribution<double> ux(b.min_x, b.max_x);
  std::uniform_real_distribution<double> uy(b.min_y, b.max_y);
  for (int i = 0; i < attempts; ++i) {
    const Vec2 p{ux(rng), uy(rng)};
    if (map.walkable(p)) return p;
  }
  return std::nullopt;
}

}  // namespace

std::vector<Obstacle> populate_obstacles(const WalkableMap& map, double density_per_100m2,
                                         std::uint64_t seed, std::optional<Vec2> clear_center) {
  std::vector<Obstacle> out;
  if (!(density_per_100m2 > 0.0) || map.empty()) return out;
  const auto count = static_cast<std::size_t>(std::lround(map.area() * density_per_100m2 / 100.0));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> size(kMinObstacleSize, kMaxObstacleSize);
  std::uniform_real_distribution<double> yaw(-std::numbers::pi, std::numbers::pi);

  for (std::size_t i = 0; i < count; ++i) {
    Obstacle ob;
    if (i % 2 == 0) {
      ob.shape = Cylinder{size(rng)};
    } else {
      const double hw = size(rng);
      const double hh = size(rng);
      ob.shape = Cuboid{hw, hh, yaw(rng)};
    }
    ob.motion = StaticMotion{};
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      const auto p = sample_walkable(map, rng, 1000);
      if (!p) break;
      ob.position = *p;
      if (clear_center && ob.distance_to(*clear_center) < kStartClearRadius) continue;
      placed = true;
    }
    if (placed) out.push_back(ob);
  }
  return out;
}

std::vector<Obstacle> spawn_pedestrians(const WalkableMap& map, int count, std::mt19937_64& rng,
                                        std::optional<Vec2> clear_center) {
  constexpr double kPedestrianRadius = 0.25;
  std::vector<Obstacle> out;
  std::uniform_real_distribution<double> heading(-std::numbers::pi, std::numbers::pi);
  for (int i = 0; i < count; ++i) {
    Obstacle ob{Cylinder{kPedestrianRadius}, {}, PedestrianMotion{0.12, heading(rng), 25}};
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      const auto p = sample_walkable(map, rng, 1000);
      if (!p) break;
      ob.position = *p;
      placed = !clear_center || ob.distance_to(*clear_center) >= kStartClearRadius;
    }
    if (placed) out.push_back(ob);
  }
  return out;
}

namespace {

void step_pedestrian(Obstacle& ob, PedestrianMotion& m, const WalkableMap& map, int step,
                     std::mt19937_64& rng) {
  if (m.reseed_period > 0 && step % m.reseed_period == 0) {
    std::uniform_real_distribution<double> heading(-std::numbers::pi, std::numbers::pi);
    for (int k = 0; k < 8; ++k) {
      const double h = heading(rng);
      if (map.walkable(ob.position + unit(h))) {
        m.heading = h;
        break;
      }
    }
  }
  const Vec2 next = ob.position + unit(m.heading) * m.speed;
  if (map.walkable(next)) {
    ob.position = next;
  } else {
    m.heading = normalize_angle(m.heading + std::numbers::pi);
  }
}

}  // namespace

void step_dynamics(WorldState& state, const Action& action) {
  AgentState& a = state.agent;
  a.heading = normalize_angle(a.heading + action.yaw_delta());
  a.position.x += action.speed() * std::cos(a.heading);
  a.position.y += action.speed() * std::sin(a.heading);
  ++state.step_count;
  if (state.map == nullptr) return;
  for (Obstacle& ob : state.obstacles) {
    if (auto* m = std::get_if<PedestrianMotion>(&ob.motion)) {
      step_pedestrian(ob, *m, *state.map, state.step_count, state.rng);
    }
  }
}

CollisionReport collision_check(const WorldState& state) {
  const AgentState& a = state.agent;
  for (std::size_t i = 0; i < state.obstacles.size(); ++i) {
    if (state.obstacles[i].distance_to(a.position) <= a.footprint_radius) {
      return {true, i};
    }
  }
  return {};
}

bool on_sidewalk(const WorldState& state) {
  return state.map != nullptr && state.map->walkable(state.agent.position);
}

}  // namespace sidewalk
