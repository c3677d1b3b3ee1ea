#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "sidewalk/geometry.hpp"
#include "sidewalk/walkable_map.hpp"
#include "sidewalk/world.hpp"

namespace sidewalk {

inline constexpr double kPlannerResolution = 0.25;

// Traversal class of a grid cell, judged at the cell centre.
enum class CellClass : std::uint8_t {
  kFree,       // walkable and clear of inflated obstacles and safety margins
  kMargin,     // clear of inflated obstacles but inside a safety margin
  kCollision,  // outside every footprint but within agent radius of one
  kBlocked,    // not walkable, or inside an obstacle footprint
};

struct GridInflation {
  double agent_radius = kDefaultFootprintRadius;
  double obstacle_margin = 0.0;  // extra clearance beyond agent_radius
  double edge_margin = 0.0;      // clearance from the walkable boundary
};

// Uniform grid over the map bounds, optionally cropped to a window. Cell (ix, iy) covers
// [min_x + ix*res, min_x + (ix+1)*res) and likewise in y.
class OccupancyGrid {
 public:
  OccupancyGrid(const WalkableMap& map, std::span<const Obstacle> obstacles,
                const GridInflation& inflation, double resolution = kPlannerResolution,
                std::optional<Box> window = std::nullopt);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double resolution() const { return resolution_; }
  const Box& bounds() const { return bounds_; }

  std::size_t index(int ix, int iy) const {
    return static_cast<std::size_t>(iy) * static_cast<std::size_t>(nx_) + static_cast<std::size_t>(ix);
  }
  bool in_range(int ix, int iy) const { return ix >= 0 && iy >= 0 && ix < nx_ && iy < ny_; }
  Vec2 cell_center(int ix, int iy) const;
  // Cell containing p, if p lies inside the grid.
  std::optional<std::pair<int, int>> cell_of(Vec2 p) const;

  CellClass at(int ix, int iy) const { return classes_[index(ix, iy)]; }
  // Free or margin: passable for reachability at agent-radius inflation.
  bool passable(int ix, int iy) const {
    const CellClass c = at(ix, iy);
    return c == CellClass::kFree || c == CellClass::kMargin;
  }

 private:
  Box bounds_{};
  double resolution_ = kPlannerResolution;
  int nx_ = 0;
  int ny_ = 0;
  std::vector<CellClass> classes_;
};

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

// Dijkstra over an 8-connected grid from a source cell. Edge cost between
// neighbours is step length (1 or sqrt 2, in cells) times the mean of the two
// cells' weights; weight <= 0 means impassable. Diagonal moves need both
// orthogonal neighbours passable.
std::vector<double> grid_dijkstra(const OccupancyGrid& grid, int source_ix, int source_iy,
                                  std::span<const double> cell_weight);

// 8-connected flood fill over passable cells; -1 for cells in no component.
std::vector<int> label_components(const OccupancyGrid& grid);

}  // namespace sidewalk
