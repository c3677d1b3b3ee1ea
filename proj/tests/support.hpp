#pragma once

// Independent reference implementations used as test oracles, plus small
// random generators for property tests. Nothing here calls the library's own
// geometry predicates.

#include <cmath>
#include <cstdint>
#include <deque>
#include <numbers>
#include <random>
#include <vector>

#include "sidewalk/walkable_map.hpp"
#include "sidewalk/world.hpp"

namespace oracle {

using sidewalk::Obstacle;
using sidewalk::Polygon;
using sidewalk::Vec2;

inline double haversine(double lat1, double lon1, double lat2, double lon2, double radius) {
  const double d2r = std::numbers::pi / 180.0;
  const double dlat = (lat2 - lat1) * d2r;
  const double dlon = (lon2 - lon1) * d2r;
  const double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(lat1 * d2r) * std::cos(lat2 * d2r) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * radius * std::asin(std::sqrt(a));
}

inline double shoelace(const Polygon& p) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Vec2& a = p[i];
    const Vec2& b = p[(i + 1) % p.size()];
    s += a.x * b.y - b.x * a.y;
  }
  return std::abs(s) / 2.0;
}

// Winding number; nonzero means inside.
inline bool inside(const Polygon& poly, Vec2 p) {
  int wn = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2 a = poly[i];
    const Vec2 b = poly[(i + 1) % poly.size()];
    const double side = (b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y);
    if (a.y <= p.y) {
      if (b.y > p.y && side > 0) ++wn;
    } else {
      if (b.y <= p.y && side < 0) --wn;
    }
  }
  return wn != 0;
}

inline bool walkable(const std::vector<Polygon>& polys, Vec2 p) {
  for (const auto& poly : polys) {
    if (inside(poly, p)) return true;
  }
  return false;
}

// Footprint membership computed from the shape parameters directly.
inline bool in_obstacle(const Obstacle& ob, Vec2 p) {
  const double dx = p.x - ob.position.x;
  const double dy = p.y - ob.position.y;
  if (const auto* c = std::get_if<sidewalk::Cylinder>(&ob.shape)) {
    return dx * dx + dy * dy <= c->radius * c->radius;
  }
  const auto& b = std::get<sidewalk::Cuboid>(ob.shape);
  const double lx = std::cos(b.yaw) * dx + std::sin(b.yaw) * dy;
  const double ly = -std::sin(b.yaw) * dx + std::cos(b.yaw) * dy;
  return std::abs(lx) <= b.half_w && std::abs(ly) <= b.half_h;
}

inline double obstacle_distance(const Obstacle& ob, Vec2 p) {
  const double dx = p.x - ob.position.x;
  const double dy = p.y - ob.position.y;
  if (const auto* c = std::get_if<sidewalk::Cylinder>(&ob.shape)) {
    return std::max(0.0, std::hypot(dx, dy) - c->radius);
  }
  const auto& b = std::get<sidewalk::Cuboid>(ob.shape);
  const double lx = std::cos(b.yaw) * dx + std::sin(b.yaw) * dy;
  const double ly = -std::sin(b.yaw) * dx + std::cos(b.yaw) * dy;
  const double ex = std::max(0.0, std::abs(lx) - b.half_w);
  const double ey = std::max(0.0, std::abs(ly) - b.half_h);
  return std::hypot(ex, ey);
}

// Marches the ray at most 1 mm at a time, and never further than the distance
// to the nearest obstacle, so obstacles are found to within kHit however
// thinly the ray clips them. Map boundaries are resolved to 1 mm.
inline double march_ray(const std::vector<Polygon>& polys, const std::vector<Obstacle>& obstacles,
                        Vec2 origin, double angle, double max_range) {
  constexpr double kStep = 1e-3;
  constexpr double kHit = 1e-9;
  const Vec2 dir{std::cos(angle), std::sin(angle)};
  // Only shapes whose bounds come near the ray matter.
  std::vector<const Polygon*> near_polys;
  for (const auto& poly : polys) {
    double lo = 1e300, hi = -1e300;
    for (const Vec2& v : poly) {
      const double along = (v.x - origin.x) * dir.x + (v.y - origin.y) * dir.y;
      lo = std::min(lo, along);
      hi = std::max(hi, along);
    }
    if (hi >= 0 && lo <= max_range) near_polys.push_back(&poly);
  }
  std::vector<const Obstacle*> near_obs;
  for (const auto& ob : obstacles) {
    const double along = (ob.position.x - origin.x) * dir.x + (ob.position.y - origin.y) * dir.y;
    const double perp = std::abs(-(ob.position.x - origin.x) * dir.y + (ob.position.y - origin.y) * dir.x);
    const auto* c = std::get_if<sidewalk::Cylinder>(&ob.shape);
    const double r = c ? c->radius
                       : std::hypot(std::get<sidewalk::Cuboid>(ob.shape).half_w,
                                    std::get<sidewalk::Cuboid>(ob.shape).half_h);
    if (perp <= r + kStep && along >= -r - kStep && along <= max_range + r + kStep) near_obs.push_back(&ob);
  }
  double t = 0.0;
  while (true) {
    const Vec2 p{origin.x + t * dir.x, origin.y + t * dir.y};
    bool ok = false;
    for (const Polygon* poly : near_polys) {
      if (inside(*poly, p)) {
        ok = true;
        break;
      }
    }
    double clear = kStep;
    for (const Obstacle* ob : near_obs) clear = std::min(clear, obstacle_distance(*ob, p));
    if (!ok || clear <= kHit) return t;
    if (t >= max_range) return max_range;
    t = std::min(max_range, t + clear);
  }
}

// 4-connected BFS over a square lattice of the given pitch; a node is open
// when its point passes the predicate. Returns the path length in meters
// between the nodes nearest a and b, or -1 when disconnected.
template <class Open>
double lattice_bfs(const sidewalk::Box& box, double pitch, Vec2 a, Vec2 b, Open&& open,
                   bool eight_connected = false) {
  const int nx = static_cast<int>(std::ceil(box.width() / pitch)) + 1;
  const int ny = static_cast<int>(std::ceil(box.height() / pitch)) + 1;
  const auto node = [&](Vec2 p) {
    return std::pair<int, int>{static_cast<int>(std::lround((p.x - box.min_x) / pitch)),
                               static_cast<int>(std::lround((p.y - box.min_y) / pitch))};
  };
  std::vector<char> is_open(static_cast<std::size_t>(nx) * ny);
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      is_open[static_cast<std::size_t>(iy) * nx + ix] = open(Vec2{box.min_x + ix * pitch, box.min_y + iy * pitch});
    }
  }
  const auto [ax, ay] = node(a);
  const auto [bx, by] = node(b);
  const auto idx = [&](int x, int y) { return static_cast<std::size_t>(y) * nx + x; };
  if (ax < 0 || ay < 0 || ax >= nx || ay >= ny || !is_open[idx(ax, ay)]) return -1.0;
  std::vector<int> dist(is_open.size(), -1);
  std::deque<std::pair<int, int>> q;
  dist[idx(ax, ay)] = 0;
  q.emplace_back(ax, ay);
  std::vector<std::pair<int, int>> moves{{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  if (eight_connected) {
    for (auto m : {std::pair{1, 1}, {1, -1}, {-1, 1}, {-1, -1}}) moves.push_back(m);
  }
  while (!q.empty()) {
    const auto [x, y] = q.front();
    q.pop_front();
    for (const auto& [dx, dy] : moves) {
      const int u = x + dx;
      const int v = y + dy;
      if (u < 0 || v < 0 || u >= nx || v >= ny) continue;
      if (!is_open[idx(u, v)] || dist[idx(u, v)] >= 0) continue;
      dist[idx(u, v)] = dist[idx(x, y)] + 1;
      q.emplace_back(u, v);
    }
  }
  if (bx < 0 || by < 0 || bx >= nx || by >= ny) return -1.0;
  const int d = dist[idx(bx, by)];
  return d < 0 ? -1.0 : d * pitch;
}

}  // namespace oracle

namespace gen {

// Uniform point in a box.
inline sidewalk::Vec2 point_in(const sidewalk::Box& b, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ux(b.min_x, b.max_x);
  std::uniform_real_distribution<double> uy(b.min_y, b.max_y);
  const double x = ux(rng);
  return {x, uy(rng)};
}

// Uniform walkable point that is also clear of every obstacle.
inline sidewalk::Vec2 free_point(const sidewalk::WalkableMap& map,
                                 const std::vector<sidewalk::Obstacle>& obstacles,
                                 std::mt19937_64& rng) {
  for (;;) {
    const sidewalk::Vec2 p = point_in(map.bounds(), rng);
    if (!oracle::walkable(map.polygons(), p)) continue;
    bool clear = true;
    for (const auto& ob : obstacles) clear = clear && !oracle::in_obstacle(ob, p);
    if (clear) return p;
  }
}

inline sidewalk::WalkableMap random_map(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> kind(0, 2);
  std::uniform_real_distribution<double> width(2.0, 5.0);
  std::uniform_real_distribution<double> length(15.0, 30.0);
  const sidewalk::SyntheticKind kinds[] = {sidewalk::SyntheticKind::kCorridor,
                                           sidewalk::SyntheticKind::kGrid,
                                           sidewalk::SyntheticKind::kLShape};
  const sidewalk::SyntheticMapSpec spec{kinds[kind(rng)], length(rng), width(rng)};
  return sidewalk::generate_synthetic_map(spec, rng());
}

}  // namespace gen
