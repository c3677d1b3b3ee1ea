#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sidewalk/episode.hpp"
#include "sidewalk/errors.hpp"
#include "sidewalk/occupancy.hpp"
#include "sidewalk/teacher.hpp"
#include "audits.hpp"
#include "support.hpp"

using namespace sidewalk;

namespace {

WalkableMap corridor(double length, double width = 3.0) {
  return generate_synthetic_map({SyntheticKind::kCorridor, length, width}, 0);
}

// Fixed-route config: start at `start` heading +x, single waypoint `goal`.
EpisodeConfig route_config(Vec2 start, Vec2 goal, double density = 0.0) {
  EpisodeConfig c;
  c.obstacle_density = density;
  c.observe = ObservationMode::kNone;
  c.start = AgentState{start, 0.0, kDefaultFootprintRadius};
  c.waypoints = {goal};
  return c;
}

}  // namespace

TEST(Reward, PublishedExamples) {
  const RewardBreakdown a = compute_reward(5.0, 4.8, Terminal::kNone);
  EXPECT_NEAR(a.total, 0.19, 1e-12);
  const RewardBreakdown b = compute_reward(0.6, 0.4, Terminal::kSuccess);
  EXPECT_NEAR(b.total, 10.19, 1e-12);
  EXPECT_EQ(b.success, 10.0);
  EXPECT_EQ(b.termination, 0.0);
  const RewardBreakdown c = compute_reward(3.0, 3.2, Terminal::kCollision);
  EXPECT_NEAR(c.total, -10.21, 1e-12);
  EXPECT_EQ(c.termination, -10.0);
  EXPECT_EQ(c.life, -0.01);
}

TEST(Reward, TerminalTermsAreExclusive) {
  for (const Terminal t : {Terminal::kNone, Terminal::kSuccess, Terminal::kCollision,
                           Terminal::kSidewalkViolation, Terminal::kTimeout}) {
    const RewardBreakdown r = compute_reward(2.0, 1.5, t);
    EXPECT_FALSE(r.success != 0.0 && r.termination != 0.0);
    EXPECT_EQ(r.success, t == Terminal::kSuccess ? 10.0 : 0.0);
    EXPECT_EQ(r.termination, (t == Terminal::kNone || t == Terminal::kSuccess) ? 0.0 : -10.0);
    EXPECT_EQ(r.total, r.success + r.termination + r.approach + r.life);
  }
}

TEST(Env, SuccessInsideRadius) {
  const WalkableMap map = corridor(20.0);
  SidewalkEnv env(map, route_config({9.55, 0.0}, {10.0, 0.0}));
  env.reset(1);
  const StepOutcome out = env.step(Action(0.05, 0.0));
  EXPECT_EQ(out.terminal, Terminal::kSuccess);
  EXPECT_EQ(out.reward.success, 10.0);
}

TEST(Env, TimeoutAtStepLimit) {
  const WalkableMap map = corridor(20.0);
  SidewalkEnv env(map, route_config({2.0, 0.0}, {15.0, 0.0}));
  env.reset(1);
  StepOutcome out;
  int steps = 0;
  while (!env.done()) {
    out = env.step(Action(0.0, 0.0));
    ++steps;
  }
  EXPECT_EQ(steps, 150);
  EXPECT_EQ(out.terminal, Terminal::kTimeout);
  EXPECT_EQ(out.reward.termination, -10.0);
}

TEST(Env, SuccessWinsOverLeavingSidewalk) {
  const WalkableMap map = corridor(20.0);
  // Goal sits just outside the corridor edge; the step both reaches it and
  // leaves the walkable area.
  EpisodeConfig cfg = route_config({10.0, 1.35}, {10.0, 1.45});
  cfg.start->heading = std::numbers::pi / 2;
  SidewalkEnv env(map, cfg);
  env.reset(1);
  const StepOutcome out = env.step(Action(0.2, 0.0));
  EXPECT_FALSE(map.walkable(env.world().agent.position));
  EXPECT_LT(distance(env.world().agent.position, Vec2{10.0, 1.45}), 0.5);
  EXPECT_EQ(out.terminal, Terminal::kSuccess);
}

TEST(Env, SteppingFinishedEpisodeIsContractViolation) {
  const WalkableMap map = corridor(20.0);
  SidewalkEnv env(map, route_config({9.8, 0.0}, {10.0, 0.0}));
  env.reset(1);
  env.step(Action(0.0, 0.0));
  ASSERT_TRUE(env.done());
  EXPECT_THROW(env.step(Action(0.0, 0.0)), ContractViolation);
}

TEST(Env, DeterministicOutcomes) {
  const WalkableMap map = generate_synthetic_map({SyntheticKind::kGrid, 30.0, 3.0}, 5);
  EpisodeConfig cfg;
  cfg.observe = ObservationMode::kBoth;
  cfg.pedestrians = 3;
  const auto run = [&] {
    SidewalkEnv env(map, cfg);
    env.reset(1234);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<nlohmann::json> trace;
    while (!env.done()) {
      const Action a(u(rng), u(rng) * 0.3);
      const StepOutcome out = env.step(a);
      trace.push_back(step_record(env.world().step_count, env.world().agent, a, out.reward, out.terminal,
                                  env.target()));
      trace.back()["rlid"] = out.observation.realistic->rlid.ranges;
      trace.back()["rgdd"] = {out.observation.realistic->rgdd.distance, out.observation.realistic->rgdd.bearing};
    }
    return trace;
  };
  EXPECT_EQ(run(), run());
}

TEST(Env, EpisodeLengthNeverExceedsLimit) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const WalkableMap map = gen::random_map(rng);
    EpisodeConfig cfg;
    cfg.observe = ObservationMode::kNone;
    SidewalkEnv env(map, cfg);
    env.reset(rng());
    int steps = 0;
    while (!env.done()) {
      env.step(Action(0.01, 0.1));
      ++steps;
    }
    EXPECT_LE(steps, 150);
  }
}

TEST(Waypoints, AdvanceRules) {
  WaypointRoute r{{{0, 0}, {10, 0}, {20, 0}}, 0, 2.0};
  EXPECT_EQ(advance_waypoint(r, {1.9, 0}).current_index, 1u);
  EXPECT_EQ(advance_waypoint(r, {2.1, 0}).current_index, 0u);
  WaypointRoute close{{{0, 0}, {1, 0}, {20, 0}}, 0, 2.0};
  EXPECT_EQ(advance_waypoint(close, {0.5, 0}).current_index, 2u);
}

TEST(Waypoints, IndexNeverDecreasesDuringEpisode) {
  const WalkableMap map = corridor(40.0);
  EpisodeConfig cfg = route_config({1.0, 0.0}, {35.0, 0.0});
  cfg.waypoints = {{6.0, 0.0}, {12.0, 0.0}, {18.0, 0.0}, {24.0, 0.0}};
  SidewalkEnv env(map, cfg);
  env.reset(3);
  std::size_t last = 0;
  while (!env.done()) {
    env.step(Action(0.2, 0.0));
    ASSERT_GE(env.route().current_index, last);
    last = env.route().current_index;
  }
  EXPECT_EQ(env.terminal(), Terminal::kSuccess);
  EXPECT_EQ(last, 4u);
}

TEST(StartGoal, CorridorSeparationInRange) {
  const WalkableMap map = corridor(30.0);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 500; ++i) {
    const StartGoal sg = sample_start_goal(map, rng, 10.0, 15.0);
    const double d = distance(sg.start.position, sg.goal);
    ASSERT_GE(d, 10.0);
    ASSERT_LE(d, 15.0);
    ASSERT_TRUE(oracle::walkable(map.polygons(), sg.start.position));
    ASSERT_TRUE(oracle::walkable(map.polygons(), sg.goal));
  }
}

TEST(StartGoal, DisconnectedCorridorsStaySeparate) {
  const WalkableMap map = WalkableMap::from_polygons(
      {{{0, 0}, {20, 0}, {20, 3}, {0, 3}}, {{0, 10}, {20, 10}, {20, 13}, {0, 13}}}, 1.0);
  std::mt19937_64 rng(6);
  for (int i = 0; i < 300; ++i) {
    const StartGoal sg = sample_start_goal(map, rng, 10.0, 15.0);
    ASSERT_EQ(sg.start.position.y < 5.0, sg.goal.y < 5.0);
  }
}

TEST(StartGoal, ShortCorridorIsTooSmall) {
  const WalkableMap map = corridor(5.0);
  std::mt19937_64 rng(1);
  EXPECT_THROW(sample_start_goal(map, rng, 10.0, 15.0), MapTooSmallError);
}

TEST(Reachability, CorridorOpenAndBlocked) {
  const WalkableMap map = corridor(20.0);
  EXPECT_TRUE(is_reachable(map, {1.0, 0.0}, {19.0, 0.0}, {}));
  const std::vector<Obstacle> wall{{Cuboid{0.3, 2.0, 0.0}, {10.0, 0.0}, StaticMotion{}}};
  EXPECT_FALSE(is_reachable(map, {1.0, 0.0}, {19.0, 0.0}, wall));
}

TEST(Reachability, SandwichedByFineGridOracles) {
  // The planner grid judges 0.25 m cells at their centres, so it can only be
  // pinned between a conservative fine-grid oracle (everything shrunk by a
  // cell diagonal plus a lattice step) and a liberal one (obstacles shrunk by
  // the same amount, boundary ignored since these layouts never split).
  constexpr double kSlack = 0.25;
  std::mt19937_64 rng(44);
  int reachable = 0;
  int blocked = 0;
  for (int i = 0; i < 60; ++i) {
    const WalkableMap map = generate_synthetic_map(
        {i % 2 ? SyntheticKind::kCorridor : SyntheticKind::kLShape, 14.0,
         std::uniform_real_distribution<double>(2.0, 3.0)(rng)},
        rng());
    const auto obstacles = populate_obstacles(map, 25.0, rng());
    const Vec2 a = gen::free_point(map, obstacles, rng);
    const Vec2 b = gen::free_point(map, obstacles, rng);
    const auto clear = [&](Vec2 p, double r) {
      for (const auto& ob : obstacles) {
        if (oracle::obstacle_distance(ob, p) <= r) return false;
      }
      return true;
    };
    const auto conservative = [&](Vec2 p) {
      if (!clear(p, kDefaultFootprintRadius + kSlack)) return false;
      for (int k = 0; k < 16; ++k) {
        const double t = k * std::numbers::pi / 8.0;
        if (!oracle::walkable(map.polygons(), {p.x + kSlack * std::cos(t), p.y + kSlack * std::sin(t)})) return false;
      }
      return oracle::walkable(map.polygons(), p);
    };
    const auto liberal = [&](Vec2 p) { return clear(p, kDefaultFootprintRadius - kSlack); };
    Box box = map.bounds();
    box.min_x -= 1;
    box.min_y -= 1;
    box.max_x += 1;
    box.max_y += 1;
    const bool lib = is_reachable(map, a, b, obstacles);
    const bool surely = oracle::lattice_bfs(box, 0.05, a, b, conservative, true) >= 0.0;
    const bool maybe = oracle::lattice_bfs(box, 0.05, a, b, liberal, true) >= 0.0;
    EXPECT_TRUE(!surely || lib) << i;
    EXPECT_TRUE(!lib || maybe) << i;
    (lib ? reachable : blocked) += 1;
  }
  EXPECT_GT(reachable, 5);
  EXPECT_GT(blocked, 5);
}

TEST(Occupancy, DijkstraCorridorMonotone) {
  const WalkableMap map = corridor(20.0);
  const OccupancyGrid grid(map, {}, GridInflation{0.35, 0.0, 0.0});
  std::vector<double> w(static_cast<std::size_t>(grid.nx() * grid.ny()), 0.0);
  for (int iy = 0; iy < grid.ny(); ++iy) {
    for (int ix = 0; ix < grid.nx(); ++ix) {
      if (grid.passable(ix, iy)) w[grid.index(ix, iy)] = 1.0;
    }
  }
  const auto goal = *grid.cell_of({2.0, 0.0});
  const auto d = grid_dijkstra(grid, goal.first, goal.second, w);
  EXPECT_EQ(d[grid.index(goal.first, goal.second)], 0.0);
  double prev = -1.0;
  for (double x = 2.0; x < 19.0; x += 0.25) {
    const auto c = *grid.cell_of({x, 0.0});
    const double v = d[grid.index(c.first, c.second)];
    EXPECT_GT(v, prev);
    const double euclid = distance(grid.cell_center(c.first, c.second), grid.cell_center(goal.first, goal.second)) / 0.25;
    EXPECT_GE(v, euclid - 1e-9);
    EXPECT_LE(v, euclid * std::sqrt(2.0) + 1e-9);
    prev = v;
  }
}

TEST(Config, JsonRoundTripAndValidation) {
  EpisodeConfig c;
  c.obstacle_density = 3.5;
  c.pedestrians = 2;
  c.gps = {0.25, 2};
  c.observe = ObservationMode::kRealistic;
  const EpisodeConfig back = episode_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  nlohmann::json bad = to_json(c);
  bad["obstacle_density"] = -1.0;
  EXPECT_THROW(episode_config_from_json(bad), ConfigError);
}

TEST(ExactSum, DetectsCancellation) {
  audit::ExactSum s;
  for (const double x : {1e16, 1.0, -1e16, -1.0}) s.add(x);
  EXPECT_TRUE(s.is_zero());
  audit::ExactSum t;
  for (const double x : {0.1, 0.2, -0.3}) t.add(x);
  EXPECT_FALSE(t.is_zero());
}

TEST(Reward, RandomizedAuditHolds) {
  const audit::RewardAuditResult r = audit::reward_audit(101, 40);
  EXPECT_EQ(r.failures, 0) << r.first_failure;
  EXPECT_GE(r.steps, 1000);
  for (int t = 1; t < 5; ++t) EXPECT_GT(r.terminals[t], 0) << t;
}
