#include "sidewalk/teacher.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "sidewalk/errors.hpp"

namespace sidewalk {

double DistanceField::value_at(Vec2 p) const {
  const auto cell = grid_.cell_of(p);
  if (!cell) return kUnreachable;
  return value(cell->first, cell->second);
}

bool DistanceField::corners(Vec2 p, double (&v)[2][2], double& tx, double& ty) const {
  const double res = grid_.resolution();
  const double gx = (p.x - grid_.bounds().min_x) / res - 0.5;
  const double gy = (p.y - grid_.bounds().min_y) / res - 0.5;
  const int ix0 = static_cast<int>(std::floor(gx));
  const int iy0 = static_cast<int>(std::floor(gy));
  tx = gx - ix0;
  ty = gy - iy0;
  double worst = -1.0;
  for (int dy = 0; dy < 2; ++dy) {
    for (int dx = 0; dx < 2; ++dx) {
      const int ix = ix0 + dx;
      const int iy = iy0 + dy;
      v[dy][dx] = grid_.in_range(ix, iy) ? value(ix, iy) : kUnreachable;
      if (std::isfinite(v[dy][dx])) worst = std::max(worst, v[dy][dx]);
    }
  }
  if (worst < 0.0) return false;
  // Unreachable corners act as a wall two cells uphill of the worst finite one.
  for (auto& row : v) {
    for (double& x : row) {
      if (!std::isfinite(x)) x = worst + 2.0;
    }
  }
  return true;
}

double DistanceField::interpolate(Vec2 p) const {
  double v[2][2];
  double tx = 0.0;
  double ty = 0.0;
  if (!corners(p, v, tx, ty)) return kUnreachable;
  const double value = (1.0 - ty) * ((1.0 - tx) * v[0][0] + tx * v[0][1]) +
                       ty * ((1.0 - tx) * v[1][0] + tx * v[1][1]);
  return value * grid_.resolution();
}

Vec2 DistanceField::descent_direction(Vec2 p) const {
  if (interpolate(p) == kUnreachable) {
    throw NoPathError("agent is outside the reachable region of the distance field");
  }
  // Central differences one cell each way: the 8-connected field has creases
  // along its valleys, and a one-cell gradient snaps to 22.5 degrees there.
  const double h = grid_.resolution();
  const auto at = [&](double dx, double dy) {
    const double v = interpolate({p.x + dx, p.y + dy});
    return v == kUnreachable ? interpolate(p) + 2.0 * h : v;
  };
  const double dvdx = at(h, 0.0) - at(-h, 0.0);
  const double dvdy = at(0.0, h) - at(0.0, -h);
  const double mag = std::hypot(dvdx, dvdy);
  if (mag < 1e-9) {
    const Vec2 to_goal = goal_ - p;
    const double d = norm(to_goal);
    return d > 0.0 ? to_goal * (1.0 / d) : Vec2{1.0, 0.0};
  }
  return {-dvdx / mag, -dvdy / mag};
}

DistanceField build_distance_field(const WalkableMap& map, std::span<const Obstacle> obstacles,
                                   Vec2 goal, const TeacherParams& params) {
  if (!map.walkable(goal)) throw GeometryError("distance field goal is not walkable");
  const Box window{goal.x - params.window_radius, goal.y - params.window_radius,
                   goal.x + params.window_radius, goal.y + params.window_radius};
  OccupancyGrid grid(map, obstacles,
                     GridInflation{params.agent_radius, params.obstacle_margin, params.edge_margin},
                     kPlannerResolution, window);
  std::vector<double> weight(static_cast<std::size_t>(grid.nx()) * static_cast<std::size_t>(grid.ny()));
  for (int iy = 0; iy < grid.ny(); ++iy) {
    for (int ix = 0; ix < grid.nx(); ++ix) {
      double w = 0.0;
      switch (grid.at(ix, iy)) {
        case CellClass::kFree:
          w = 1.0;
          break;
        case CellClass::kMargin:
          w = params.margin_weight;
          break;
        case CellClass::kCollision:
          w = params.collision_weight;
          break;
        case CellClass::kBlocked:
          w = 0.0;
          break;
      }
      weight[grid.index(ix, iy)] = w;
    }
  }
  const auto cell = grid.cell_of(goal);
  if (!cell) throw GeometryError("distance field goal lies outside the planner grid");
  // The goal itself is walkable even if its cell centre is not.
  double& goal_weight = weight[grid.index(cell->first, cell->second)];
  if (goal_weight <= 0.0) goal_weight = params.collision_weight;
  std::vector<double> values = grid_dijkstra(grid, cell->first, cell->second, weight);
  return DistanceField(std::move(grid), std::move(values), goal);
}

namespace {

Vec2 next_position(const AgentState& agent, const Action& a) {
  const double heading = agent.heading + a.yaw_delta();
  return agent.position + Vec2{std::cos(heading), std::sin(heading)} * a.speed();
}

// Smallest obstacle clearance left around the footprint at p.
double clearance(const WorldState& world, Vec2 p) {
  double best = kUnreachable;
  for (const Obstacle& ob : world.obstacles) {
    best = std::min(best, ob.distance_to(p) - world.agent.footprint_radius);
  }
  return best;
}

}  // namespace

Action teacher_act(const DistanceField& field, const WorldState& world, const TeacherParams& params) {
  const AgentState& agent = world.agent;
  const Vec2 dir = field.descent_direction(agent.position);
  const double desired = std::atan2(dir.y, dir.x);
  const double misalignment = normalize_angle(desired - agent.heading);
  const double yaw = std::clamp(misalignment, -kMaxYawDelta, kMaxYawDelta);
  // Dynamics rotate before translating, so speed follows the post-turn error.
  const Action preferred(kMaxSpeed * std::max(0.0, std::cos(misalignment - yaw)), yaw);

  const auto safe = [&](const Action& a) {
    const Vec2 p = next_position(agent, a);
    return world.map->walkable(p) && clearance(world, p) > params.safety_margin;
  };
  if (world.map == nullptr || safe(preferred)) return preferred;

  constexpr int kYawSteps = 13;
  constexpr double kSpeeds[] = {kMaxSpeed, 0.15, 0.1, 0.05, 0.0, kMinSpeed};
  std::optional<Action> best;
  double best_cost = kUnreachable;
  for (const double v : kSpeeds) {
    for (int k = 0; k < kYawSteps; ++k) {
      const double w = -kMaxYawDelta + 2.0 * kMaxYawDelta * k / (kYawSteps - 1);
      const Action a(v, w);
      if (!safe(a)) continue;
      const double cost = field.interpolate(next_position(agent, a)) +
                          0.1 * (1.0 - std::cos(normalize_angle(desired - agent.heading - w)));
      if (cost < best_cost) {
        best_cost = cost;
        best = a;
      }
    }
  }
  if (best) return *best;
  return Action(kMinSpeed, yaw);
}

Action OracleTeacher::act(const PolicyInput& input) {
  if (!field_ || !(field_->goal() == input.target)) {
    std::vector<Obstacle> statics;
    for (const Obstacle& ob : input.world.obstacles) {
      if (ob.is_static()) statics.push_back(ob);
    }
    field_.emplace(build_distance_field(input.map, statics, input.target, params_));
  }
  return teacher_act(*field_, input.world, params_);
}

}  // namespace sidewalk
