#include "sidewalk/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "sidewalk/errors.hpp"

namespace sidewalk {

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json episodes = nlohmann::json::array();
  for (const EpisodeRecord& e : r.episodes) {
    episodes.push_back({{"index", e.index},
                        {"map", e.map_index},
                        {"seed", e.seed},
                        {"terminal", std::string(to_string(e.terminal))},
                        {"steps", e.steps},
                        {"reward", e.total_reward},
                        {"aborted", e.aborted}});
  }
  return {{"policy", r.policy},
          {"n_episodes", r.n_episodes},
          {"success_rate", r.success_rate},
          {"collision_rate", r.collision_rate},
          {"sidewalk_violation_rate", r.sidewalk_violation_rate},
          {"timeout_rate", r.timeout_rate},
          {"mean_length", r.mean_length},
          {"mean_reward", r.mean_reward},
          {"episodes", episodes}};
}

std::uint64_t episode_seed(std::uint64_t base_seed, std::size_t episode) {
  return derive_seed(base_seed, 1'000'000 + episode);
}

EpisodeRecord run_episode(SidewalkEnv& env, Policy& policy, std::uint64_t seed,
                          std::vector<nlohmann::json>* log) {
  EpisodeRecord rec;
  rec.seed = seed;
  policy.reset();
  Observation obs = env.reset(seed);
  if (log != nullptr) {
    log->clear();
    log->push_back(env.header_record());
  }
  while (!env.done()) {
    Action action;
    try {
      action = policy.act(PolicyInput{obs, env.world(), env.map(), env.target()});
    } catch (const NoPathError&) {
      rec.aborted = true;
      rec.terminal = Terminal::kTimeout;
      break;
    }
    StepOutcome out = env.step(action);
    rec.total_reward += out.reward.total;
    ++rec.steps;
    if (log != nullptr) {
      log->push_back(step_record(env.world().step_count, env.world().agent, action, out.reward,
                                 out.terminal, env.target()));
    }
    rec.terminal = out.terminal;
    obs = std::move(out.observation);
  }
  return rec;
}

namespace {

EvalReport reduce(std::string policy, std::vector<EpisodeRecord> records) {
  EvalReport r;
  r.policy = std::move(policy);
  r.n_episodes = records.size();
  std::size_t counts[5] = {0, 0, 0, 0, 0};
  double length = 0.0;
  double reward = 0.0;
  for (const EpisodeRecord& e : records) {
    ++counts[static_cast<int>(e.terminal)];
    length += e.steps;
    reward += e.total_reward;
  }
  if (!records.empty()) {
    const double n = static_cast<double>(records.size());
    r.success_rate = counts[static_cast<int>(Terminal::kSuccess)] / n;
    r.collision_rate = counts[static_cast<int>(Terminal::kCollision)] / n;
    r.sidewalk_violation_rate = counts[static_cast<int>(Terminal::kSidewalkViolation)] / n;
    r.timeout_rate = counts[static_cast<int>(Terminal::kTimeout)] / n;
    r.mean_length = length / n;
    r.mean_reward = reward / n;
  }
  r.episodes = std::move(records);
  return r;
}

void run_worker(Policy& policy, const std::vector<WalkableMap>& maps, const EvalOptions& options,
                unsigned worker, unsigned n_workers, std::vector<EpisodeRecord>& out) {
  EpisodeConfig cfg = options.env;
  cfg.observe = policy.required_observation();
  std::vector<std::unique_ptr<SidewalkEnv>> envs(maps.size());
  std::vector<nlohmann::json> log;
  for (std::size_t i = worker; i < options.n_episodes; i += n_workers) {
    const std::size_t m = i % maps.size();
    if (!envs[m]) envs[m] = std::make_unique<SidewalkEnv>(maps[m], cfg);
    const std::uint64_t seed = episode_seed(options.seed, i);
    EpisodeRecord rec = run_episode(*envs[m], policy, seed, options.log_dir ? &log : nullptr);
    rec.index = i;
    rec.map_index = m;
    if (options.log_dir) {
      char name[64];
      std::snprintf(name, sizeof(name), "episode_%05zu.jsonl", i);
      write_jsonl(*options.log_dir / name, log);
    }
    out[i] = rec;
  }
}

}  // namespace

EvalReport evaluate(const PolicyFactory& make_policy, const std::vector<WalkableMap>& maps,
                    const EvalOptions& options) {
  if (options.n_episodes == 0) throw ConfigError("evaluation needs at least one episode");
  if (maps.empty()) throw ConfigError("evaluation needs at least one map");
  const unsigned n_workers =
      std::max(1u, std::min<unsigned>(options.workers, static_cast<unsigned>(options.n_episodes)));
  std::vector<EpisodeRecord> records(options.n_episodes);
  std::string name;
  if (n_workers == 1) {
    auto policy = make_policy();
    name = policy->name();
    run_worker(*policy, maps, options, 0, 1, records);
  } else {
    std::vector<std::unique_ptr<Policy>> policies;
    for (unsigned w = 0; w < n_workers; ++w) policies.push_back(make_policy());
    name = policies.front()->name();
    std::vector<std::exception_ptr> errors(n_workers);
    std::vector<std::thread> threads;
    for (unsigned w = 0; w < n_workers; ++w) {
      threads.emplace_back([&, w] {
        try {
          run_worker(*policies[w], maps, options, w, n_workers, records);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return reduce(name, std::move(records));
}

EvalReport evaluate(Policy& policy, const std::vector<WalkableMap>& maps, const EvalOptions& options) {
  if (options.n_episodes == 0) throw ConfigError("evaluation needs at least one episode");
  if (maps.empty()) throw ConfigError("evaluation needs at least one map");
  std::vector<EpisodeRecord> records(options.n_episodes);
  run_worker(policy, maps, options, 0, 1, records);
  return reduce(policy.name(), std::move(records));
}

std::vector<WalkableMap> make_map_suite(std::uint64_t seed, std::size_t count) {
  std::vector<WalkableMap> maps;
  maps.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t map_seed = derive_seed(seed, i);
    std::mt19937_64 rng(map_seed);
    std::uniform_real_distribution<double> width(kMinSidewalkWidth, kMaxSidewalkWidth);
    SyntheticMapSpec spec;
    switch (i % 3) {
      case 0:
        spec = {SyntheticKind::kGrid, 30.0, width(rng)};
        break;
      case 1:
        spec = {SyntheticKind::kLShape, 22.0, width(rng)};
        break;
      default:
        spec = {SyntheticKind::kCorridor, 32.0, width(rng)};
        break;
    }
    maps.push_back(generate_synthetic_map(spec, map_seed));
  }
  return maps;
}

std::string_view to_string(BenchMode mode) {
  switch (mode) {
    case BenchMode::kNone:
      return "none";
    case BenchMode::kLidarOnly:
      return "lidar_only";
    case BenchMode::kFullPrivileged:
      return "full_privileged";
  }
  return "none";
}

nlohmann::json to_json(const BenchReport& report) {
  nlohmann::json modes = nlohmann::json::object();
  for (const BenchEntry& e : report.entries) {
    modes[std::string(to_string(e.mode))] = {
        {"steps_per_second", e.steps_per_second}, {"steps", e.steps}, {"seconds", e.seconds}};
  }
  return {{"modes", modes}, {"episode_config", report.episode_config}, {"wall_time", report.wall_time}};
}

BenchReport bench(const WalkableMap& map, const std::vector<BenchMode>& modes, std::size_t n_steps,
                  std::uint64_t seed, EpisodeConfig config) {
  if (n_steps < 1000) throw ConfigError("bench needs at least 1000 steps");
  using Clock = std::chrono::steady_clock;
  const auto wall_start = Clock::now();
  BenchReport report;
  for (const BenchMode mode : modes) {
    EpisodeConfig cfg = config;
    cfg.observe = mode == BenchMode::kNone        ? ObservationMode::kNone
                  : mode == BenchMode::kLidarOnly ? ObservationMode::kRealistic
                                                  : ObservationMode::kPrivileged;
    report.episode_config = to_json(cfg);
    SidewalkEnv env(map, cfg);
    std::uint64_t episode = 0;
    env.reset(episode_seed(seed, episode));
    Clock::duration timed{0};
    for (std::size_t t = 0; t < n_steps; ++t) {
      if (env.done()) env.reset(episode_seed(seed, ++episode));
      const Action action(0.15, 0.4 * std::sin(0.3 * static_cast<double>(t)));
      const auto t0 = Clock::now();
      env.step(action);
      timed += Clock::now() - t0;
    }
    const double seconds = std::chrono::duration<double>(timed).count();
    report.entries.push_back(
        {mode, seconds > 0.0 ? static_cast<double>(n_steps) / seconds : 0.0, n_steps, seconds});
  }
  report.wall_time = std::chrono::duration<double>(Clock::now() - wall_start).count();
  return report;
}

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<nlohmann::json> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw IntegrityError(std::string("malformed log line: ") + e.what(),
                           static_cast<long long>(line_no));
    }
  }
  return out;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& records) {
  std::string text;
  for (const auto& r : records) {
    text += r.dump();
    text += '\n';
  }
  write_text_file(path, text);
}

namespace {

Vec2 vec_from(const nlohmann::json& a) { return {a.at(0).get<double>(), a.at(1).get<double>()}; }

}  // namespace

ReplayResult replay_records(const std::vector<nlohmann::json>& records, const ReplayOptions& options) {
  if (records.empty() || records.front().value("type", "") != "header") {
    throw IntegrityError("log does not start with a header record", 0);
  }
  const nlohmann::json& header = records.front();
  WalkableMap map;
  EpisodeConfig cfg;
  std::uint64_t seed = 0;
  try {
    map = map_from_json(header.at("map"));
    cfg = episode_config_from_json(header.at("config"));
    seed = header.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("bad header: ") + e.what(), 0);
  }
  cfg.observe = options.dump_bev_dir ? ObservationMode::kPrivileged : ObservationMode::kNone;
  SidewalkEnv env(map, cfg);
  Observation obs = env.reset(seed);

  const nlohmann::json expected_header = env.header_record();
  for (const char* key : {"start", "goal", "waypoints", "obstacles"}) {
    if (header.value(key, nlohmann::json()) != expected_header.at(key)) {
      throw IntegrityError(std::string("header field '") + key + "' disagrees with re-simulation", 0);
    }
  }

  std::vector<Vec2> trajectory{env.world().agent.position};
  const std::vector<Obstacle> initial_obstacles = env.world().obstacles;
  ReplayResult result;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const nlohmann::json& rec = records[i];
    const long long t = rec.value("t", static_cast<long long>(i));
    if (env.done()) throw IntegrityError("log continues after the episode ended", t);
    Action action;
    try {
      action = Action(rec.at("action").at(0).get<double>(), rec.at("action").at(1).get<double>());
    } catch (const nlohmann::json::exception& e) {
      throw IntegrityError(std::string("bad step record: ") + e.what(), t);
    }
    StepOutcome out = env.step(action);
    const nlohmann::json expected = step_record(env.world().step_count, env.world().agent, action,
                                                out.reward, out.terminal, env.target());
    if (expected != rec) throw IntegrityError("trajectory diverges from re-simulation", t);
    if (options.dump_bev_dir && out.observation.privileged) {
      char name[64];
      std::snprintf(name, sizeof(name), "bev_%04lld.pgm", t);
      write_text_file(*options.dump_bev_dir / name, bev_to_pgm(out.observation.privileged->bev.channels[0]));
    }
    trajectory.push_back(env.world().agent.position);
    result.steps = static_cast<int>(i);
    result.terminal = out.terminal;
    obs = std::move(out.observation);
  }
  if (options.svg_path) {
    write_text_file(*options.svg_path, trajectory_svg(map, initial_obstacles, trajectory, env.goal()));
  }
  return result;
}

ReplayResult replay(const std::filesystem::path& log_path, const ReplayOptions& options) {
  return replay_records(read_jsonl(log_path), options);
}

std::string trajectory_svg(const WalkableMap& map, const std::vector<Obstacle>& obstacles,
                           const std::vector<Vec2>& trajectory, Vec2 goal) {
  constexpr double kScale = 10.0;  // pixels per meter
  constexpr double kPad = 1.0;
  const Box& b = map.bounds();
  const double w = (b.width() + 2 * kPad) * kScale;
  const double h = (b.height() + 2 * kPad) * kScale;
  const auto px = [&](Vec2 p) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f,%.2f", (p.x - b.min_x + kPad) * kScale,
                  (b.max_y - p.y + kPad) * kScale);
    return std::string(buf);
  };
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"#444\"/>\n";
  for (const Polygon& poly : map.polygons()) {
    svg << "<polygon fill=\"#ddd\" stroke=\"none\" points=\"";
    for (const Vec2& v : poly) svg << px(v) << ' ';
    svg << "\"/>\n";
  }
  for (const Obstacle& ob : obstacles) {
    if (const auto* c = std::get_if<Cylinder>(&ob.shape)) {
      const std::string centre = px(ob.position);
      const auto comma = centre.find(',');
      svg << "<circle cx=\"" << centre.substr(0, comma) << "\" cy=\"" << centre.substr(comma + 1)
          << "\" r=\"" << c->radius * kScale << "\" fill=\"#c33\"/>\n";
    } else {
      const auto& box = std::get<Cuboid>(ob.shape);
      svg << "<polygon fill=\"#c33\" points=\"";
      for (const Vec2 corner : {Vec2{box.half_w, box.half_h}, Vec2{-box.half_w, box.half_h},
                                Vec2{-box.half_w, -box.half_h}, Vec2{box.half_w, -box.half_h}}) {
        svg << px(ob.position + rotate(corner, box.yaw)) << ' ';
      }
      svg << "\"/>\n";
    }
  }
  svg << "<polyline fill=\"none\" stroke=\"#06c\" stroke-width=\"2\" points=\"";
  for (const Vec2& p : trajectory) svg << px(p) << ' ';
  svg << "\"/>\n";
  if (!trajectory.empty()) {
    const std::string s = px(trajectory.front());
    svg << "<circle cx=\"" << s.substr(0, s.find(',')) << "\" cy=\"" << s.substr(s.find(',') + 1)
        << "\" r=\"4\" fill=\"#0a0\"/>\n";
  }
  const std::string g = px(goal);
  svg << "<circle cx=\"" << g.substr(0, g.find(',')) << "\" cy=\"" << g.substr(g.find(',') + 1)
      << "\" r=\"" << kDefaultSuccessRadius * kScale << "\" fill=\"none\" stroke=\"#fc0\" stroke-width=\"2\"/>\n";
  svg << "</svg>\n";
  return svg.str();
}

std::string format_table(const std::vector<TableRow>& rows) {
  const auto pct = [](const std::optional<EvalReport>& r, double EvalReport::*field) {
    if (!r) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f%%", 100.0 * ((*r).*field));
    return std::string(buf);
  };
  std::vector<std::array<std::string, 6>> cells;
  cells.push_back({"Agent", "Train", "Valid", "Collision", "Sidewalk", "Timeout"});
  for (const TableRow& row : rows) {
    cells.push_back({row.agent, pct(row.train, &EvalReport::success_rate),
                     pct(row.valid, &EvalReport::success_rate),
                     pct(row.valid, &EvalReport::collision_rate),
                     pct(row.valid, &EvalReport::sidewalk_violation_rate),
                     pct(row.valid, &EvalReport::timeout_rate)});
  }
  std::array<std::size_t, 6> width{};
  for (const auto& r : cells) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (std::size_t c = 0; c < cells[i].size(); ++c) {
      const std::string& s = cells[i][c];
      if (c == 0) {
        out += s + std::string(width[c] - s.size(), ' ');
      } else {
        out += "  " + std::string(width[c] - s.size(), ' ') + s;
      }
    }
    out += '\n';
    if (i == 0) {
      std::size_t total = width[0];
      for (std::size_t c = 1; c < width.size(); ++c) total += 2 + width[c];
      out += std::string(total, '-') + '\n';
    }
  }
  return out;
}

}  // namespace sidewalk
