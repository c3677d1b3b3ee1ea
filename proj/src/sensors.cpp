#include "sidewalk/sensors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sidewalk {

Vec2 bev_pixel_center(const AgentState& agent, int row, int col) {
  const double forward = (kBevCenter - row) * kBevResolution;
  const double left = (kBevCenter - col) * kBevResolution;
  const double c = std::cos(agent.heading);
  const double s = std::sin(agent.heading);
  return {agent.position.x + forward * c - left * s, agent.position.y + forward * s + left * c};
}

BevFrame render_bev_frame(const WorldState& world) {
  BevFrame frame{};
  const AgentState& agent = world.agent;
  const WalkableMap* map = world.map;
  for (int row = 0; row < kBevSize; ++row) {
    for (int col = 0; col < kBevSize; ++col) {
      const Vec2 p = bev_pixel_center(agent, row, col);
      frame[static_cast<std::size_t>(row * kBevSize + col)] =
          (map != nullptr && map->walkable(p)) ? 1 : 0;
    }
  }

  // Only pixels inside an obstacle's bounding square can change.
  const double c = std::cos(agent.heading);
  const double s = std::sin(agent.heading);
  const double view_radius = kBevExtent * std::numbers::sqrt2 / 2.0 + kBevResolution;
  for (const Obstacle& ob : world.obstacles) {
    const double reach = ob.bounding_radius();
    const Vec2 rel = ob.position - agent.position;
    if (norm(rel) > view_radius + reach) continue;
    const double forward = rel.x * c + rel.y * s;
    const double left = -rel.x * s + rel.y * c;
    const double row_c = kBevCenter - forward / kBevResolution;
    const double col_c = kBevCenter - left / kBevResolution;
    const double r_px = reach / kBevResolution + 2.0;
    const int r0 = std::max(0, static_cast<int>(std::floor(row_c - r_px)));
    const int r1 = std::min(kBevSize - 1, static_cast<int>(std::ceil(row_c + r_px)));
    const int c0 = std::max(0, static_cast<int>(std::floor(col_c - r_px)));
    const int c1 = std::min(kBevSize - 1, static_cast<int>(std::ceil(col_c + r_px)));
    for (int row = r0; row <= r1; ++row) {
      for (int col = c0; col <= c1; ++col) {
        auto& px = frame[static_cast<std::size_t>(row * kBevSize + col)];
        if (px != 0 && ob.contains(bev_pixel_center(agent, row, col))) px = 0;
      }
    }
  }
  return frame;
}

BevImage render_bev(const WorldState& world, const BevImage* previous) {
  BevImage img;
  img.channels[0] = render_bev_frame(world);
  for (int k = 1; k < kBevChannels; ++k) {
    img.channels[static_cast<std::size_t>(k)] =
        previous != nullptr ? previous->channels[static_cast<std::size_t>(k - 1)] : img.channels[0];
  }
  return img;
}

namespace {

struct Edge {
  Vec2 a;
  Vec2 b;
};

std::optional<double> ray_obstacle(Vec2 origin, Vec2 dir, const Obstacle& ob) {
  if (const auto* cyl = std::get_if<Cylinder>(&ob.shape)) {
    return ray_circle(origin, dir, ob.position, cyl->radius);
  }
  const auto& box = std::get<Cuboid>(ob.shape);
  const Vec2 o = rotate(origin - ob.position, -box.yaw);
  const Vec2 d = rotate(dir, -box.yaw);
  const double half[2] = {box.half_w, box.half_h};
  const double oc[2] = {o.x, o.y};
  const double dc[2] = {d.x, d.y};
  double t_enter = 0.0;
  double t_exit = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 2; ++axis) {
    if (dc[axis] == 0.0) {
      if (std::abs(oc[axis]) > half[axis]) return std::nullopt;
      continue;
    }
    double t0 = (-half[axis] - oc[axis]) / dc[axis];
    double t1 = (half[axis] - oc[axis]) / dc[axis];
    if (t0 > t1) std::swap(t0, t1);
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
    if (t_enter > t_exit) return std::nullopt;
  }
  return t_enter;
}

}  // namespace

LidarScan raycast(const WorldState& world, int n_rays, double max_range) {
  LidarScan scan;
  scan.max_range = max_range;
  scan.ranges.assign(static_cast<std::size_t>(std::max(n_rays, 0)), max_range);
  if (n_rays <= 0) return scan;

  const Vec2 origin = world.agent.position;
  const WalkableMap* map = world.map;
  const bool start_free =
      map != nullptr && map->walkable(origin) &&
      std::none_of(world.obstacles.begin(), world.obstacles.end(),
                   [&](const Obstacle& ob) { return ob.contains(origin); });
  if (!start_free) {
    std::fill(scan.ranges.begin(), scan.ranges.end(), 0.0);
    return scan;
  }

  thread_local std::vector<std::uint32_t> poly_ids;
  thread_local std::vector<Edge> edges;
  thread_local std::vector<const Obstacle*> nearby;
  thread_local std::vector<double> crossings;

  const double reach = max_range + 1e-6;
  map->polygons_near({origin.x - reach, origin.y - reach, origin.x + reach, origin.y + reach},
                     poly_ids);
  edges.clear();
  for (const std::uint32_t pid : poly_ids) {
    const Polygon& poly = map->polygons()[pid];
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
      if (point_segment_distance(origin, poly[j], poly[i]) <= reach) {
        edges.push_back({poly[j], poly[i]});
      }
    }
  }
  nearby.clear();
  for (const Obstacle& ob : world.obstacles) {
    if (distance(ob.position, origin) - ob.bounding_radius() <= reach) nearby.push_back(&ob);
  }

  const double heading = world.agent.heading;
  const double step = 2.0 * std::numbers::pi / n_rays;
  for (int k = 0; k < n_rays; ++k) {
    const Vec2 dir = unit(heading + step * k);
    double best = max_range;
    for (const Obstacle* ob : nearby) {
      if (const auto t = ray_obstacle(origin, dir, *ob); t && *t < best) best = *t;
    }

    crossings.clear();
    for (const Edge& e : edges) {
      if (const auto t = ray_segment(origin, dir, e.a, e.b); t && *t < best) {
        crossings.push_back(*t);
      }
    }
    std::sort(crossings.begin(), crossings.end());
    // The first crossing followed by non-walkable ground is where the ray leaves
    // the union of polygons.
    for (std::size_t i = 0; i < crossings.size(); ++i) {
      const double t = crossings[i];
      std::size_t j = i + 1;
      while (j < crossings.size() && crossings[j] - t < 1e-12) ++j;
      const double probe_t = j < crossings.size() ? 0.5 * (t + crossings[j]) : t + 1e-7;
      if (!map->walkable(origin + dir * probe_t)) {
        best = t;
        break;
      }
      i = j - 1;
    }
    scan.ranges[static_cast<std::size_t>(k)] = std::clamp(best, 0.0, max_range);
  }
  return scan;
}

GoalPolar compute_gdd(const AgentState& agent, Vec2 goal) {
  const Vec2 d = goal - agent.position;
  const double dist = norm(d);
  if (dist == 0.0) return {0.0, 0.0};
  return {dist, normalize_angle(std::atan2(d.y, d.x) - agent.heading)};
}

GoalPolar compute_noisy_gdd(const AgentState& agent, const std::deque<Vec2>& position_history,
                            Vec2 goal, const GpsNoise& noise, std::mt19937_64& rng) {
  AgentState observed = agent;
  if (!position_history.empty() && noise.latency_steps > 0) {
    const auto idx = std::min<std::size_t>(static_cast<std::size_t>(noise.latency_steps),
                                           position_history.size() - 1);
    observed.position = position_history[idx];
  }
  if (noise.sigma_pos > 0.0) {
    std::normal_distribution<double> n(0.0, noise.sigma_pos);
    const double ex = n(rng);
    const double ey = n(rng);
    observed.position = observed.position + Vec2{ex, ey};
  }
  return compute_gdd(observed, goal);
}

std::string bev_to_pgm(const BevFrame& frame) {
  std::string out = "P5\n" + std::to_string(kBevSize) + " " + std::to_string(kBevSize) + "\n255\n";
  out.reserve(out.size() + frame.size());
  for (const std::uint8_t v : frame) out.push_back(static_cast<char>(v != 0 ? 255 : 0));
  return out;
}

}  // namespace sidewalk
