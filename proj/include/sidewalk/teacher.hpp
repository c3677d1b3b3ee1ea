#pragma once

#include <optional>
#include <span>
#include <vector>

#include "sidewalk/occupancy.hpp"
#include "sidewalk/policy.hpp"

namespace sidewalk {

// Planner tuning. Cells within the safety margins cost margin_weight per
// cell, cells where the agent disc would touch an obstacle cost
// collision_weight, so the field stays finite (and steers outward) wherever
// the agent centre can legally be.
struct TeacherParams {
  double agent_radius = kDefaultFootprintRadius;
  double obstacle_margin = 0.15;
  double edge_margin = 0.3;
  double margin_weight = 4.0;
  double collision_weight = 25.0;
  double safety_margin = 0.05;       // meters beyond the footprint for the one-step check
  double window_radius = 35.0;       // planner grid half-extent around the goal
};

// Geodesic cost-to-goal on a 0.25 m grid, in cell units.
class DistanceField {
 public:
  DistanceField(OccupancyGrid grid, std::vector<double> values, Vec2 goal)
      : grid_(std::move(grid)), values_(std::move(values)), goal_(goal) {}

  const OccupancyGrid& grid() const { return grid_; }
  Vec2 goal() const { return goal_; }
  double value(int ix, int iy) const { return values_[grid_.index(ix, iy)]; }
  // Value of the cell containing p; kUnreachable outside the grid.
  double value_at(Vec2 p) const;

  // Bilinear interpolant of the field at p, in meters of weighted path.
  // Unreachable corners count as two cells uphill of the worst finite one;
  // kUnreachable when all four are unreachable.
  double interpolate(Vec2 p) const;
  // Unit descent direction of the interpolant at p, from central differences
  // one cell each way. Probes that land on unreachable cells count as uphill.
  // Throws NoPathError when none of the four surrounding cells is reachable.
  Vec2 descent_direction(Vec2 p) const;

 private:
  // Corner values around p with unreachable corners filled; false when none is
  // reachable. tx, ty are the interpolation weights.
  bool corners(Vec2 p, double (&v)[2][2], double& tx, double& ty) const;

  OccupancyGrid grid_;
  std::vector<double> values_;
  Vec2 goal_;
};

// Dijkstra from the goal cell, 8-connected with sqrt(2) diagonals. Static
// obstacles only. Throws GeometryError when the goal is not walkable.
DistanceField build_distance_field(const WalkableMap& map, std::span<const Obstacle> obstacles,
                                   Vec2 goal, const TeacherParams& params = {});

// Steer down the field at full speed when aligned. If that step would put the
// footprint (plus safety_margin) on an obstacle or the centre off the sidewalk,
// pick the safe candidate action with the lowest field value instead, and back
// off at -0.10 while turning when nothing is safe.
Action teacher_act(const DistanceField& field, const WorldState& world,
                   const TeacherParams& params = {});

// Privileged oracle behind the Policy interface. Rebuilds its field when the
// target moves and on reset().
class OracleTeacher final : public Policy {
 public:
  explicit OracleTeacher(TeacherParams params = {}) : params_(params) {}

  void reset() override { field_.reset(); }
  Action act(const PolicyInput& input) override;
  ObservationMode required_observation() const override { return ObservationMode::kPrivileged; }
  std::string name() const override { return "oracle"; }

  const DistanceField* field() const { return field_ ? &*field_ : nullptr; }

 private:
  TeacherParams params_;
  std::optional<DistanceField> field_;
};

}  // namespace sidewalk
