#include "sidewalk/occupancy.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <queue>

namespace sidewalk {

OccupancyGrid::OccupancyGrid(const WalkableMap& map, std::span<const Obstacle> obstacles,
                             const GridInflation& inflation, double resolution,
                             std::optional<Box> window)
    : bounds_(map.bounds()), resolution_(resolution) {
  if (window) {
    bounds_.min_x = std::max(bounds_.min_x, window->min_x);
    bounds_.min_y = std::max(bounds_.min_y, window->min_y);
    bounds_.max_x = std::min(bounds_.max_x, window->max_x);
    bounds_.max_y = std::min(bounds_.max_y, window->max_y);
    if (bounds_.max_x < bounds_.min_x) bounds_.max_x = bounds_.min_x;
    if (bounds_.max_y < bounds_.min_y) bounds_.max_y = bounds_.min_y;
  }
  nx_ = std::max(1, static_cast<int>(std::ceil(bounds_.width() / resolution_)));
  ny_ = std::max(1, static_cast<int>(std::ceil(bounds_.height() / resolution_)));
  classes_.assign(static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_), CellClass::kBlocked);

  const double e = inflation.edge_margin;
  const double d = e * std::numbers::sqrt2 / 2.0;
  const Vec2 probes[8] = {{e, 0}, {-e, 0}, {0, e}, {0, -e}, {d, d}, {d, -d}, {-d, d}, {-d, -d}};
  for (int iy = 0; iy < ny_; ++iy) {
    for (int ix = 0; ix < nx_; ++ix) {
      const Vec2 c = cell_center(ix, iy);
      if (!map.walkable(c)) continue;
      bool near_edge = false;
      if (e > 0.0) {
        for (const Vec2& off : probes) {
          if (!map.walkable(c + off)) {
            near_edge = true;
            break;
          }
        }
      }
      classes_[index(ix, iy)] = near_edge ? CellClass::kMargin : CellClass::kFree;
    }
  }

  const double inflate = inflation.agent_radius + inflation.obstacle_margin;
  for (const Obstacle& ob : obstacles) {
    const double reach = ob.bounding_radius() + inflate + resolution_;
    const auto lo = cell_of({std::max(ob.position.x - reach, bounds_.min_x),
                             std::max(ob.position.y - reach, bounds_.min_y)});
    const auto hi = cell_of({std::min(ob.position.x + reach, bounds_.max_x),
                             std::min(ob.position.y + reach, bounds_.max_y)});
    if (!lo || !hi) continue;
    for (int iy = lo->second; iy <= hi->second; ++iy) {
      for (int ix = lo->first; ix <= hi->first; ++ix) {
        CellClass& cls = classes_[index(ix, iy)];
        if (cls == CellClass::kBlocked) continue;
        const double dist = ob.distance_to(cell_center(ix, iy));
        if (dist <= 0.0) {
          cls = CellClass::kBlocked;
        } else if (dist <= inflation.agent_radius) {
          cls = CellClass::kCollision;
        } else if (dist <= inflate && cls == CellClass::kFree) {
          cls = CellClass::kMargin;
        }
      }
    }
  }
}

Vec2 OccupancyGrid::cell_center(int ix, int iy) const {
  return {bounds_.min_x + (ix + 0.5) * resolution_, bounds_.min_y + (iy + 0.5) * resolution_};
}

std::optional<std::pair<int, int>> OccupancyGrid::cell_of(Vec2 p) const {
  if (!(p.x >= bounds_.min_x && p.y >= bounds_.min_y)) return std::nullopt;
  const int ix = static_cast<int>(std::floor((p.x - bounds_.min_x) / resolution_));
  const int iy = static_cast<int>(std::floor((p.y - bounds_.min_y) / resolution_));
  if (ix >= nx_ || iy >= ny_) {
    // Points on the max edge belong to the last cell.
    if (p.x <= bounds_.max_x && p.y <= bounds_.max_y) {
      return std::pair{std::min(ix, nx_ - 1), std::min(iy, ny_ - 1)};
    }
    return std::nullopt;
  }
  return std::pair{ix, iy};
}

namespace {

constexpr int kDx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
constexpr int kDy[8] = {0, 0, 1, -1, 1, -1, 1, -1};

}  // namespace

std::vector<double> grid_dijkstra(const OccupancyGrid& grid, int source_ix, int source_iy,
                                  std::span<const double> cell_weight) {
  const std::size_t n = static_cast<std::size_t>(grid.nx()) * static_cast<std::size_t>(grid.ny());
  std::vector<double> dist(n, kUnreachable);
  if (!grid.in_range(source_ix, source_iy)) return dist;
  const std::size_t src = grid.index(source_ix, source_iy);
  if (!(cell_weight[src] > 0.0)) return dist;

  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  dist[src] = 0.0;
  open.push({0.0, src});
  const auto nx = static_cast<std::size_t>(grid.nx());
  while (!open.empty()) {
    const auto [d, idx] = open.top();
    open.pop();
    if (d > dist[idx]) continue;
    const int ix = static_cast<int>(idx % nx);
    const int iy = static_cast<int>(idx / nx);
    for (int k = 0; k < 8; ++k) {
      const int jx = ix + kDx[k];
      const int jy = iy + kDy[k];
      if (!grid.in_range(jx, jy)) continue;
      const std::size_t j = grid.index(jx, jy);
      if (!(cell_weight[j] > 0.0)) continue;
      double step = 1.0;
      if (k >= 4) {
        if (!(cell_weight[grid.index(jx, iy)] > 0.0) || !(cell_weight[grid.index(ix, jy)] > 0.0)) {
          continue;
        }
        step = std::numbers::sqrt2;
      }
      const double nd = d + step * 0.5 * (cell_weight[idx] + cell_weight[j]);
      if (nd < dist[j]) {
        dist[j] = nd;
        open.push({nd, j});
      }
    }
  }
  return dist;
}

std::vector<int> label_components(const OccupancyGrid& grid) {
  const std::size_t n = static_cast<std::size_t>(grid.nx()) * static_cast<std::size_t>(grid.ny());
  std::vector<int> label(n, -1);
  int next = 0;
  std::deque<std::pair<int, int>> queue;
  for (int iy = 0; iy < grid.ny(); ++iy) {
    for (int ix = 0; ix < grid.nx(); ++ix) {
      if (!grid.passable(ix, iy) || label[grid.index(ix, iy)] >= 0) continue;
      label[grid.index(ix, iy)] = next;
      queue.push_back({ix, iy});
      while (!queue.empty()) {
        const auto [cx, cy] = queue.front();
        queue.pop_front();
        for (int k = 0; k < 8; ++k) {
          const int jx = cx + kDx[k];
          const int jy = cy + kDy[k];
          if (!grid.in_range(jx, jy) || !grid.passable(jx, jy)) continue;
          if (k >= 4 && (!grid.passable(jx, cy) || !grid.passable(cx, jy))) continue;
          int& l = label[grid.index(jx, jy)];
          if (l >= 0) continue;
          l = next;
          queue.push_back({jx, jy});
        }
      }
      ++next;
    }
  }
  return label;
}

}  // namespace sidewalk
