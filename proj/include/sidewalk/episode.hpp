#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sidewalk/geometry.hpp"
#include "sidewalk/sensors.hpp"
#include "sidewalk/walkable_map.hpp"
#include "sidewalk/world.hpp"

namespace sidewalk {

inline constexpr double kSuccessReward = 10.0;
inline constexpr double kTerminationPenalty = -10.0;
inline constexpr double kLifePenalty = -0.01;
inline constexpr int kDefaultMaxSteps = 150;
inline constexpr double kDefaultSuccessRadius = 0.5;
inline constexpr double kWaypointAdvanceRadius = 2.0;
inline constexpr int kStartGoalRetries = 200;

enum class ObservationMode {
  kNone,        // dynamics, termination and reward only
  kPrivileged,  // BEV stack, 64-ray LiDAR, exact goal polar
  kRealistic,   // 272-ray LiDAR capped at 6 m, GPS-noisy goal polar
  kBoth,
};

std::string_view to_string(ObservationMode mode);
ObservationMode parse_observation_mode(std::string_view name);

struct EpisodeConfig {
  double obstacle_density = 5.0;  // obstacles per 100 m^2
  int pedestrians = 0;
  int max_steps = kDefaultMaxSteps;
  double success_radius = kDefaultSuccessRadius;
  double goal_min = 10.0;
  double goal_max = 15.0;
  double footprint_radius = kDefaultFootprintRadius;
  GpsNoise gps{};
  ObservationMode observe = ObservationMode::kPrivileged;
  // Use the grid geodesic distance in the approach term instead of Euclidean.
  bool geodesic_approach = false;
  // Fixed route: when non-empty, start must be set and the last waypoint is the goal.
  std::optional<AgentState> start;
  std::vector<Vec2> waypoints;

  void validate() const;
};

nlohmann::json to_json(const EpisodeConfig& config);
EpisodeConfig episode_config_from_json(const nlohmann::json& doc);

enum class Terminal { kNone, kSuccess, kCollision, kSidewalkViolation, kTimeout };

std::string_view to_string(Terminal t);
Terminal parse_terminal(std::string_view name);

struct RewardBreakdown {
  double success = 0.0;      // 0 or +10
  double termination = 0.0;  // 0 or -10
  double approach = 0.0;     // d_prev - d_curr
  double life = kLifePenalty;
  double total = kLifePenalty;
  bool operator==(const RewardBreakdown&) const = default;
};

RewardBreakdown compute_reward(double d_prev, double d_curr, Terminal terminal);

struct StepOutcome {
  Observation observation;
  RewardBreakdown reward;
  Terminal terminal = Terminal::kNone;
  std::optional<std::size_t> collided_with;
};

struct WaypointRoute {
  std::vector<Vec2> waypoints;
  std::size_t current_index = 0;
  double advance_radius = kWaypointAdvanceRadius;

  bool exhausted() const { return current_index >= waypoints.size(); }
  // Waypoint being steered to; the last one once the route is exhausted.
  Vec2 target() const;
  Vec2 final_goal() const { return waypoints.back(); }
};

// Skips forward past every consecutive waypoint within advance_radius.
WaypointRoute advance_waypoint(WaypointRoute route, Vec2 agent);

struct StartGoal {
  AgentState start;
  Vec2 goal;
};

// Agent-radius-inflated 0.25 m grid, 8-connected BFS.
bool is_reachable(const WalkableMap& map, Vec2 a, Vec2 b, std::span<const Obstacle> obstacles,
                  double agent_radius = kDefaultFootprintRadius);

// Walkable start and goal, separated by [goal_min, goal_max] and mutually
// reachable around the given obstacles. Throws MapTooSmallError after
// kStartGoalRetries failed starts.
StartGoal sample_start_goal(const WalkableMap& map, std::mt19937_64& rng, double goal_min,
                            double goal_max, std::span<const Obstacle> obstacles = {},
                            double agent_radius = kDefaultFootprintRadius);

// Deterministic child seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// One episode over a shared map. Not thread-safe; run one per thread.
class SidewalkEnv {
 public:
  SidewalkEnv(const WalkableMap& map, EpisodeConfig config);

  Observation reset(std::uint64_t seed);
  StepOutcome step(const Action& action);
  Observation observe();

  const WorldState& world() const { return world_; }
  const WalkableMap& map() const { return *map_; }
  const EpisodeConfig& config() const { return config_; }
  const WaypointRoute& route() const { return route_; }
  Vec2 target() const { return route_.target(); }
  Vec2 goal() const { return route_.final_goal(); }
  const AgentState& start() const { return start_; }
  std::uint64_t seed() const { return seed_; }
  bool done() const { return done_; }
  Terminal terminal() const { return terminal_; }
  // Distance used by the approach term for the given position and target.
  double goal_distance(Vec2 position, Vec2 target) const;

  nlohmann::json header_record() const;

 private:
  void rebuild_geodesic();

  const WalkableMap* map_;
  EpisodeConfig config_;
  WorldState world_;
  WaypointRoute route_;
  AgentState start_;
  std::uint64_t seed_ = 0;
  bool done_ = true;
  Terminal terminal_ = Terminal::kNone;
  std::mt19937_64 noise_rng_;
  std::deque<Vec2> position_history_;  // newest first
  std::optional<BevImage> last_bev_;
  // Geodesic distance (meters) to the current target over the reachability grid.
  struct Geodesic;
  std::shared_ptr<const Geodesic> geodesic_;
};

nlohmann::json step_record(int t, const AgentState& agent, const Action& action,
                           const RewardBreakdown& reward, Terminal terminal, Vec2 goal);

nlohmann::json obstacle_to_json(const Obstacle& ob);
Obstacle obstacle_from_json(const nlohmann::json& doc);

}  // namespace sidewalk
