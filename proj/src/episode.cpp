#include "sidewalk/episode.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "sidewalk/errors.hpp"
#include "sidewalk/occupancy.hpp"

namespace sidewalk {

std::string_view to_string(ObservationMode mode) {
  switch (mode) {
    case ObservationMode::kNone:
      return "none";
    case ObservationMode::kPrivileged:
      return "privileged";
    case ObservationMode::kRealistic:
      return "realistic";
    case ObservationMode::kBoth:
      return "both";
  }
  return "none";
}

ObservationMode parse_observation_mode(std::string_view name) {
  if (name == "none") return ObservationMode::kNone;
  if (name == "privileged") return ObservationMode::kPrivileged;
  if (name == "realistic") return ObservationMode::kRealistic;
  if (name == "both") return ObservationMode::kBoth;
  throw ConfigError("unknown observation mode '" + std::string(name) + "'");
}

std::string_view to_string(Terminal t) {
  switch (t) {
    case Terminal::kNone:
      return "none";
    case Terminal::kSuccess:
      return "success";
    case Terminal::kCollision:
      return "collision";
    case Terminal::kSidewalkViolation:
      return "sidewalk_violation";
    case Terminal::kTimeout:
      return "timeout";
  }
  return "none";
}

Terminal parse_terminal(std::string_view name) {
  for (Terminal t : {Terminal::kNone, Terminal::kSuccess, Terminal::kCollision,
                     Terminal::kSidewalkViolation, Terminal::kTimeout}) {
    if (to_string(t) == name) return t;
  }
  throw ConfigError("unknown terminal '" + std::string(name) + "'");
}

void EpisodeConfig::validate() const {
  if (max_steps <= 0) throw ConfigError("max_steps must be positive");
  if (!(success_radius > 0.0)) throw ConfigError("success_radius must be positive");
  if (!(goal_min >= 0.0) || goal_min > goal_max) throw ConfigError("goal distance range is invalid");
  if (!(obstacle_density >= 0.0)) throw ConfigError("obstacle density must be non-negative");
  if (pedestrians < 0) throw ConfigError("pedestrian count must be non-negative");
  if (!(footprint_radius > 0.0)) throw ConfigError("footprint radius must be positive");
  if (!(gps.sigma_pos >= 0.0) || gps.latency_steps < 0) throw ConfigError("GPS noise is invalid");
  if (!waypoints.empty() && !start) throw ConfigError("a fixed route needs a start pose");
}

nlohmann::json to_json(const EpisodeConfig& c) {
  nlohmann::json doc = {
      {"obstacle_density", c.obstacle_density},
      {"pedestrians", c.pedestrians},
      {"max_steps", c.max_steps},
      {"success_radius", c.success_radius},
      {"goal_range", {c.goal_min, c.goal_max}},
      {"footprint_radius", c.footprint_radius},
      {"gps", {{"sigma_pos", c.gps.sigma_pos}, {"latency_steps", c.gps.latency_steps}}},
      {"observe", std::string(to_string(c.observe))},
      {"geodesic_approach", c.geodesic_approach},
  };
  if (c.start) {
    doc["start"] = {c.start->position.x, c.start->position.y, c.start->heading};
  }
  if (!c.waypoints.empty()) {
    nlohmann::json wps = nlohmann::json::array();
    for (const Vec2& w : c.waypoints) wps.push_back({w.x, w.y});
    doc["waypoints"] = wps;
  }
  return doc;
}

EpisodeConfig episode_config_from_json(const nlohmann::json& doc) {
  EpisodeConfig c;
  try {
    c.obstacle_density = doc.value("obstacle_density", c.obstacle_density);
    c.pedestrians = doc.value("pedestrians", c.pedestrians);
    c.max_steps = doc.value("max_steps", c.max_steps);
    c.success_radius = doc.value("success_radius", c.success_radius);
    if (doc.contains("goal_range")) {
      c.goal_min = doc["goal_range"].at(0).get<double>();
      c.goal_max = doc["goal_range"].at(1).get<double>();
    }
    c.footprint_radius = doc.value("footprint_radius", c.footprint_radius);
    if (doc.contains("gps")) {
      c.gps.sigma_pos = doc["gps"].value("sigma_pos", c.gps.sigma_pos);
      c.gps.latency_steps = doc["gps"].value("latency_steps", c.gps.latency_steps);
    }
    if (doc.contains("observe")) c.observe = parse_observation_mode(doc["observe"].get<std::string>());
    c.geodesic_approach = doc.value("geodesic_approach", c.geodesic_approach);
    if (doc.contains("start")) {
      const auto& s = doc["start"];
      AgentState a;
      a.position = {s.at(0).get<double>(), s.at(1).get<double>()};
      a.heading = s.at(2).get<double>();
      c.start = a;
    }
    if (doc.contains("waypoints")) {
      for (const auto& w : doc["waypoints"]) {
        c.waypoints.push_back({w.at(0).get<double>(), w.at(1).get<double>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("episode config: ") + e.what());
  }
  c.validate();
  return c;
}

RewardBreakdown compute_reward(double d_prev, double d_curr, Terminal terminal) {
  RewardBreakdown r;
  r.approach = d_prev - d_curr;
  r.life = kLifePenalty;
  r.success = terminal == Terminal::kSuccess ? kSuccessReward : 0.0;
  r.termination = (terminal == Terminal::kCollision || terminal == Terminal::kSidewalkViolation ||
                   terminal == Terminal::kTimeout)
                      ? kTerminationPenalty
                      : 0.0;
  r.total = r.success + r.termination + r.approach + r.life;
  return r;
}

Vec2 WaypointRoute::target() const {
  return waypoints[std::min(current_index, waypoints.size() - 1)];
}

WaypointRoute advance_waypoint(WaypointRoute route, Vec2 agent) {
  while (route.current_index < route.waypoints.size() &&
         distance(agent, route.waypoints[route.current_index]) <= route.advance_radius) {
    ++route.current_index;
  }
  return route;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 over the combined value
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

Box window_around(Vec2 c, double r) { return {c.x - r, c.y - r, c.x + r, c.y + r}; }

std::optional<Vec2> sample_walkable_point(const WalkableMap& map, std::mt19937_64& rng) {
  const Box& b = map.bounds();
  std::uniform_real_distribution<double> ux(b.min_x, b.max_x);
  std::uniform_real_distribution<double> uy(b.min_y, b.max_y);
  for (int i = 0; i < 1000; ++i) {
    const Vec2 p{ux(rng), uy(rng)};
    if (map.walkable(p)) return p;
  }
  return std::nullopt;
}

// Tries kStartGoalRetries starts; obstacles_for(start, attempt) supplies the
// obstacle layout for each attempt.
StartGoal sample_pair(const WalkableMap& map, std::mt19937_64& rng, double goal_min, double goal_max,
                      double agent_radius,
                      const std::function<std::vector<Obstacle>(Vec2, int)>& obstacles_for,
                      std::vector<Obstacle>* chosen_obstacles) {
  constexpr int kGoalTries = 50;
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> r2(goal_min * goal_min, goal_max * goal_max);
  for (int attempt = 0; attempt < kStartGoalRetries; ++attempt) {
    const auto start = sample_walkable_point(map, rng);
    if (!start) break;
    std::vector<Obstacle> obstacles = obstacles_for(*start, attempt);
    std::vector<Obstacle> statics;
    for (const Obstacle& ob : obstacles) {
      if (ob.is_static()) statics.push_back(ob);
    }
    const OccupancyGrid grid(map, statics, GridInflation{agent_radius, 0.0, 0.0}, kPlannerResolution,
                             window_around(*start, goal_max + 10.0));
    const auto start_cell = grid.cell_of(*start);
    if (!start_cell || !grid.passable(start_cell->first, start_cell->second)) continue;
    const std::vector<int> labels = label_components(grid);
    const int start_label = labels[grid.index(start_cell->first, start_cell->second)];
    for (int k = 0; k < kGoalTries; ++k) {
      const double a = angle(rng);
      const double r = std::sqrt(r2(rng));
      const Vec2 goal = *start + unit(a) * r;
      if (!map.walkable(goal)) continue;
      const double sep = distance(*start, goal);
      if (sep < goal_min || sep > goal_max) continue;
      const auto goal_cell = grid.cell_of(goal);
      if (!goal_cell || !grid.passable(goal_cell->first, goal_cell->second)) continue;
      if (labels[grid.index(goal_cell->first, goal_cell->second)] != start_label) continue;
      StartGoal out;
      out.start.position = *start;
      out.start.heading = normalize_angle(angle(rng));
      out.start.footprint_radius = agent_radius;
      out.goal = goal;
      if (chosen_obstacles != nullptr) *chosen_obstacles = std::move(obstacles);
      return out;
    }
  }
  throw MapTooSmallError("no reachable start/goal pair " + std::to_string(goal_min) + "-" +
                         std::to_string(goal_max) + " m apart after " +
                         std::to_string(kStartGoalRetries) + " attempts");
}

}  // namespace

bool is_reachable(const WalkableMap& map, Vec2 a, Vec2 b, std::span<const Obstacle> obstacles,
                  double agent_radius) {
  const OccupancyGrid grid(map, obstacles, GridInflation{agent_radius, 0.0, 0.0});
  const auto ca = grid.cell_of(a);
  const auto cb = grid.cell_of(b);
  if (!ca || !cb) return false;
  if (!grid.passable(ca->first, ca->second) || !grid.passable(cb->first, cb->second)) return false;
  const std::vector<int> labels = label_components(grid);
  return labels[grid.index(ca->first, ca->second)] == labels[grid.index(cb->first, cb->second)];
}

StartGoal sample_start_goal(const WalkableMap& map, std::mt19937_64& rng, double goal_min,
                            double goal_max, std::span<const Obstacle> obstacles,
                            double agent_radius) {
  if (map.empty()) throw MapTooSmallError("map is empty");
  const std::vector<Obstacle> fixed(obstacles.begin(), obstacles.end());
  return sample_pair(
      map, rng, goal_min, goal_max, agent_radius, [&](Vec2, int) { return fixed; }, nullptr);
}

struct SidewalkEnv::Geodesic {
  OccupancyGrid grid;
  std::vector<double> dist;  // cells
};

SidewalkEnv::SidewalkEnv(const WalkableMap& map, EpisodeConfig config)
    : map_(&map), config_(std::move(config)) {
  config_.validate();
  if (map.empty()) throw ConfigError("environment needs a non-empty map");
  world_.map = map_;
}

Observation SidewalkEnv::reset(std::uint64_t seed) {
  seed_ = seed;
  world_ = WorldState{};
  world_.map = map_;
  world_.rng.seed(derive_seed(seed, 1));
  noise_rng_.seed(derive_seed(seed, 4));

  std::mt19937_64 sampler(derive_seed(seed, 2));
  std::vector<Obstacle> obstacles;
  if (!config_.waypoints.empty()) {
    start_ = *config_.start;
    start_.footprint_radius = config_.footprint_radius;
    obstacles = populate_obstacles(*map_, config_.obstacle_density, derive_seed(seed, 3),
                                   start_.position);
    route_ = WaypointRoute{config_.waypoints, 0, kWaypointAdvanceRadius};
  } else {
    const double density = config_.obstacle_density;
    const StartGoal sg = sample_pair(
        *map_, sampler, config_.goal_min, config_.goal_max, config_.footprint_radius,
        [&](Vec2 start, int attempt) {
          return populate_obstacles(*map_, density, derive_seed(seed, 100 + attempt), start);
        },
        &obstacles);
    start_ = sg.start;
    route_ = WaypointRoute{{sg.goal}, 0, kWaypointAdvanceRadius};
  }
  if (config_.pedestrians > 0) {
    auto peds = spawn_pedestrians(*map_, config_.pedestrians, world_.rng, start_.position);
    obstacles.insert(obstacles.end(), peds.begin(), peds.end());
  }
  world_.agent = start_;
  world_.obstacles = std::move(obstacles);
  route_ = advance_waypoint(route_, start_.position);

  done_ = false;
  terminal_ = Terminal::kNone;
  position_history_.clear();
  position_history_.push_front(start_.position);
  last_bev_.reset();
  geodesic_.reset();
  if (config_.geodesic_approach) rebuild_geodesic();
  return observe();
}

void SidewalkEnv::rebuild_geodesic() {
  std::vector<Obstacle> statics;
  for (const Obstacle& ob : world_.obstacles) {
    if (ob.is_static()) statics.push_back(ob);
  }
  OccupancyGrid grid(*map_, statics, GridInflation{config_.footprint_radius, 0.0, 0.0});
  std::vector<double> weight(static_cast<std::size_t>(grid.nx()) * static_cast<std::size_t>(grid.ny()),
                             0.0);
  for (int iy = 0; iy < grid.ny(); ++iy) {
    for (int ix = 0; ix < grid.nx(); ++ix) {
      if (grid.passable(ix, iy)) weight[grid.index(ix, iy)] = 1.0;
    }
  }
  std::vector<double> dist;
  if (const auto cell = grid.cell_of(target())) {
    dist = grid_dijkstra(grid, cell->first, cell->second, weight);
  } else {
    dist.assign(weight.size(), kUnreachable);
  }
  geodesic_ = std::make_shared<const Geodesic>(Geodesic{std::move(grid), std::move(dist)});
}

double SidewalkEnv::goal_distance(Vec2 position, Vec2 target) const {
  if (geodesic_) {
    if (const auto cell = geodesic_->grid.cell_of(position)) {
      const double d = geodesic_->dist[geodesic_->grid.index(cell->first, cell->second)];
      if (std::isfinite(d)) return d * geodesic_->grid.resolution();
    }
  }
  return distance(position, target);
}

Observation SidewalkEnv::observe() {
  Observation obs;
  const bool privileged =
      config_.observe == ObservationMode::kPrivileged || config_.observe == ObservationMode::kBoth;
  const bool realistic =
      config_.observe == ObservationMode::kRealistic || config_.observe == ObservationMode::kBoth;
  if (privileged) {
    PrivilegedObservation p;
    p.bev = render_bev(world_, last_bev_ ? &*last_bev_ : nullptr);
    last_bev_ = p.bev;
    p.blid = raycast(world_, kPrivilegedRays, kPrivilegedRange);
    p.gdd = compute_gdd(world_.agent, target());
    obs.privileged = std::move(p);
  }
  if (realistic) {
    RealisticObservation r;
    r.rlid = raycast(world_, kRealisticRays, kRealisticRange);
    r.rgdd = compute_noisy_gdd(world_.agent, position_history_, target(), config_.gps, noise_rng_);
    obs.realistic = std::move(r);
  }
  return obs;
}

StepOutcome SidewalkEnv::step(const Action& action) {
  if (done_) throw ContractViolation("step called on a finished episode");
  const Vec2 target_before = target();
  const double d_prev = goal_distance(world_.agent.position, target_before);

  step_dynamics(world_, action);
  position_history_.push_front(world_.agent.position);
  while (position_history_.size() > static_cast<std::size_t>(config_.gps.latency_steps) + 1) {
    position_history_.pop_back();
  }

  StepOutcome out;
  const CollisionReport hit = collision_check(world_);
  if (distance(world_.agent.position, goal()) < config_.success_radius) {
    out.terminal = Terminal::kSuccess;
  } else if (hit.hit) {
    out.terminal = Terminal::kCollision;
    out.collided_with = hit.obstacle_id;
  } else if (!on_sidewalk(world_)) {
    out.terminal = Terminal::kSidewalkViolation;
  } else if (world_.step_count >= config_.max_steps) {
    out.terminal = Terminal::kTimeout;
  }

  const double d_curr = goal_distance(world_.agent.position, target_before);
  out.reward = compute_reward(d_prev, d_curr, out.terminal);

  const std::size_t index_before = route_.current_index;
  route_ = advance_waypoint(route_, world_.agent.position);
  if (route_.current_index != index_before && config_.geodesic_approach) rebuild_geodesic();

  if (out.terminal != Terminal::kNone) {
    done_ = true;
    terminal_ = out.terminal;
  }
  out.observation = observe();
  return out;
}

nlohmann::json obstacle_to_json(const Obstacle& ob) {
  nlohmann::json doc;
  if (const auto* c = std::get_if<Cylinder>(&ob.shape)) {
    doc["shape"] = {{"type", "cylinder"}, {"radius", c->radius}};
  } else {
    const auto& b = std::get<Cuboid>(ob.shape);
    doc["shape"] = {{"type", "cuboid"}, {"half_w", b.half_w}, {"half_h", b.half_h}, {"yaw", b.yaw}};
  }
  doc["position"] = {ob.position.x, ob.position.y};
  if (const auto* m = std::get_if<PedestrianMotion>(&ob.motion)) {
    doc["motion"] = {{"type", "pedestrian"},
                     {"speed", m->speed},
                     {"heading", m->heading},
                     {"reseed_period", m->reseed_period}};
  } else {
    doc["motion"] = {{"type", "static"}};
  }
  return doc;
}

Obstacle obstacle_from_json(const nlohmann::json& doc) {
  Obstacle ob;
  const auto& shape = doc.at("shape");
  if (shape.at("type") == "cylinder") {
    ob.shape = Cylinder{shape.at("radius").get<double>()};
  } else {
    ob.shape = Cuboid{shape.at("half_w").get<double>(), shape.at("half_h").get<double>(),
                      shape.at("yaw").get<double>()};
  }
  ob.position = {doc.at("position").at(0).get<double>(), doc.at("position").at(1).get<double>()};
  const auto& motion = doc.at("motion");
  if (motion.at("type") == "pedestrian") {
    ob.motion = PedestrianMotion{motion.at("speed").get<double>(), motion.at("heading").get<double>(),
                                 motion.at("reseed_period").get<int>()};
  } else {
    ob.motion = StaticMotion{};
  }
  return ob;
}

nlohmann::json SidewalkEnv::header_record() const {
  nlohmann::json obstacles = nlohmann::json::array();
  for (const Obstacle& ob : world_.obstacles) obstacles.push_back(obstacle_to_json(ob));
  nlohmann::json wps = nlohmann::json::array();
  for (const Vec2& w : route_.waypoints) wps.push_back({w.x, w.y});
  return {
      {"type", "header"},
      {"version", 1},
      {"seed", seed_},
      {"config", to_json(config_)},
      {"map", map_to_json(*map_)},
      {"start", {start_.position.x, start_.position.y, start_.heading}},
      {"goal", {goal().x, goal().y}},
      {"waypoints", wps},
      {"obstacles", obstacles},
  };
}

nlohmann::json step_record(int t, const AgentState& agent, const Action& action,
                           const RewardBreakdown& reward, Terminal terminal, Vec2 goal) {
  return {
      {"t", t},
      {"pose", {agent.position.x, agent.position.y, agent.heading}},
      {"action", {action.speed(), action.yaw_delta()}},
      {"reward", {{"s", reward.success}, {"t", reward.termination}, {"a", reward.approach}, {"l", reward.life}}},
      {"terminal", std::string(to_string(terminal))},
      {"goal", {goal.x, goal.y}},
  };
}

}  // namespace sidewalk
