#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sidewalk/episode.hpp"
#include "sidewalk/policy.hpp"
#include "sidewalk/walkable_map.hpp"

namespace sidewalk {

struct EpisodeRecord {
  std::size_t index = 0;
  std::size_t map_index = 0;
  std::uint64_t seed = 0;
  Terminal terminal = Terminal::kNone;
  int steps = 0;
  double total_reward = 0.0;
  // The policy raised (e.g. the teacher lost its path); counted as a timeout.
  bool aborted = false;
};

struct EvalReport {
  std::string policy;
  std::size_t n_episodes = 0;
  double success_rate = 0.0;
  double collision_rate = 0.0;
  double sidewalk_violation_rate = 0.0;
  double timeout_rate = 0.0;
  double mean_length = 0.0;
  double mean_reward = 0.0;
  std::vector<EpisodeRecord> episodes;
};

nlohmann::json to_json(const EvalReport& report);

using PolicyFactory = std::function<std::unique_ptr<Policy>()>;

struct EvalOptions {
  std::size_t n_episodes = 100;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  EpisodeConfig env{};
  std::optional<std::filesystem::path> log_dir;  // one JSONL file per episode
};

// Seed of episode i in a suite run with the given base seed.
std::uint64_t episode_seed(std::uint64_t base_seed, std::size_t episode);

// Runs one episode to its terminal with the policy. The observation mode is
// taken from the policy. When log is set, writes the header and step records.
EpisodeRecord run_episode(SidewalkEnv& env, Policy& policy, std::uint64_t seed,
                          std::vector<nlohmann::json>* log = nullptr);

// Episode i runs on maps[i % maps.size()] with episode_seed(seed, i). Workers
// take interleaved episodes; the report is reduced in episode order.
EvalReport evaluate(const PolicyFactory& make_policy, const std::vector<WalkableMap>& maps,
                    const EvalOptions& options);
EvalReport evaluate(Policy& policy, const std::vector<WalkableMap>& maps, const EvalOptions& options);

// Validation/training map sets: cycling grid, L-shape and corridor layouts with
// sidewalk widths drawn from [2, 5] m.
std::vector<WalkableMap> make_map_suite(std::uint64_t seed, std::size_t count);
inline constexpr std::uint64_t kTrainSuiteSeed = 1000;
inline constexpr std::uint64_t kValidSuiteSeed = 2000;

enum class BenchMode { kNone, kLidarOnly, kFullPrivileged };
std::string_view to_string(BenchMode mode);

struct BenchEntry {
  BenchMode mode = BenchMode::kNone;
  double steps_per_second = 0.0;
  std::size_t steps = 0;
  double seconds = 0.0;
};

struct BenchReport {
  std::vector<BenchEntry> entries;
  nlohmann::json episode_config;
  double wall_time = 0.0;
};

nlohmann::json to_json(const BenchReport& report);

// Times env steps under each mode with a fixed action script; resets are not
// timed. lidar_only renders the realistic LiDAR and noisy goal; full_privileged
// renders the BEV stack, 64-ray LiDAR and exact goal.
BenchReport bench(const WalkableMap& map, const std::vector<BenchMode>& modes, std::size_t n_steps,
                  std::uint64_t seed, EpisodeConfig config = {});

struct ReplayOptions {
  std::optional<std::filesystem::path> dump_bev_dir;
  std::optional<std::filesystem::path> svg_path;
};

struct ReplayResult {
  int steps = 0;
  Terminal terminal = Terminal::kNone;
};

// Re-simulates a log from its header and actions and checks every record
// bit-for-bit. Throws IntegrityError at the first disagreeing step.
ReplayResult replay(const std::filesystem::path& log_path, const ReplayOptions& options = {});
ReplayResult replay_records(const std::vector<nlohmann::json>& records,
                            const ReplayOptions& options = {});

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& records);

// Overhead plot of the map, obstacles, trajectory, start and goal.
std::string trajectory_svg(const WalkableMap& map, const std::vector<Obstacle>& obstacles,
                           const std::vector<Vec2>& trajectory, Vec2 goal);

// Aligned text table: one row per agent, train/valid success and the
// validation failure breakdown.
struct TableRow {
  std::string agent;
  std::optional<EvalReport> train;
  std::optional<EvalReport> valid;
};
std::string format_table(const std::vector<TableRow>& rows);

}  // namespace sidewalk
