#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sidewalk/distill.hpp"
#include "sidewalk/errors.hpp"
#include "sidewalk/eval.hpp"
#include "sidewalk/osm.hpp"
#include "sidewalk/student.hpp"
#include "sidewalk/teacher.hpp"
#include "sidewalk/walkable_map.hpp"

namespace fs = std::filesystem;
using namespace sidewalk;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIntegrity = 3;

struct Globals {
  std::uint64_t seed = 0;
  std::string log_dir;
  unsigned workers = 1;
};

LatLon parse_latlon(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw ConfigError("origin must be 'lat,lon', got '" + text + "'");
  try {
    return {std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1))};
  } catch (const std::exception&) {
    throw ConfigError("origin must be 'lat,lon', got '" + text + "'");
  }
}

void write_json(const fs::path& path, const nlohmann::json& doc) {
  write_text_file(path, doc.dump(2) + "\n");
}

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + " is not valid JSON: " + e.what());
  }
}

// Maps from a directory (*.json, sorted by name), one file, or a synthetic suite.
std::vector<WalkableMap> load_maps(const std::string& map_file, const std::string& map_dir,
                                   const std::string& suite, std::size_t suite_count) {
  std::vector<WalkableMap> maps;
  if (!map_file.empty()) maps.push_back(load_map(map_file));
  if (!map_dir.empty()) {
    if (!fs::is_directory(map_dir)) throw ConfigError("map directory " + map_dir + " does not exist");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(map_dir)) {
      if (entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) maps.push_back(load_map(f));
  }
  if (maps.empty()) {
    if (suite == "train") {
      maps = make_map_suite(kTrainSuiteSeed, suite_count);
    } else if (suite == "valid") {
      maps = make_map_suite(kValidSuiteSeed, suite_count);
    } else {
      throw ConfigError("unknown suite '" + suite + "' (expected train or valid)");
    }
  }
  if (maps.empty()) throw ConfigError("no maps found");
  return maps;
}

// "oracle", "zero", or a model file.
PolicyFactory policy_factory(const std::string& spec) {
  if (spec == "oracle") return [] { return std::make_unique<OracleTeacher>(); };
  if (spec == "zero") return [] { return std::make_unique<ConstantPolicy>(Action(0.0, 0.0), "zero"); };
  auto net = std::make_shared<StudentNet>(load_model(spec));
  const std::string name = fs::path(spec).stem().string();
  return [net, name] { return std::make_unique<StudentPolicy>(*net, name); };
}

struct EnvFlags {
  double density = 5.0;
  int pedestrians = 0;
  bool geodesic = false;

  void add(CLI::App* app) {
    app->add_option("--density", density, "obstacles per 100 m^2")->capture_default_str();
    app->add_option("--pedestrians", pedestrians, "moving pedestrians per episode")->capture_default_str();
    app->add_flag("--geodesic", geodesic, "approach reward on geodesic distance");
  }
  EpisodeConfig config() const {
    EpisodeConfig c;
    c.obstacle_density = density;
    c.pedestrians = pedestrians;
    c.geodesic_approach = geodesic;
    c.validate();
    return c;
  }
};

struct MapFlags {
  std::string map;
  std::string map_dir;
  std::string suite = "valid";
  std::size_t suite_count = 12;

  void add(CLI::App* app) {
    app->add_option("--map", map, "map cache file");
    app->add_option("--map-dir", map_dir, "directory of map cache files");
    app->add_option("--suite", suite, "synthetic suite when no map is given (train|valid)")
        ->capture_default_str();
    app->add_option("--suite-count", suite_count, "maps in the synthetic suite")->capture_default_str();
  }
  std::vector<WalkableMap> load() const { return load_maps(map, map_dir, suite, suite_count); }
};

void print_report_line(const EvalReport& r) {
  std::printf("%s: %zu episodes, success %.4f, collision %.4f, sidewalk %.4f, timeout %.4f\n",
              r.policy.c_str(), r.n_episodes, r.success_rate, r.collision_rate,
              r.sidewalk_violation_rate, r.timeout_rate);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sidewalk navigation simulator and teacher-student distillation"};
  app.require_subcommand(1);
  // Global flags may also follow the subcommand.
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "base random seed")->capture_default_str();
  app.add_option("--log-dir", g.log_dir, "directory for per-episode JSONL logs");
  app.add_option("--workers", g.workers, "worker threads")->capture_default_str()->check(CLI::Range(1u, 256u));

  // ingest
  auto* ingest = app.add_subcommand("ingest", "compile OSM XML into a walkable map");
  std::string osm_file, origin_text, ingest_out;
  double cell_size = kDefaultCellSize;
  ingest->add_option("--osm", osm_file, "OSM XML file")->required();
  ingest->add_option("--origin", origin_text, "projection origin lat,lon")->required();
  ingest->add_option("--out", ingest_out, "map cache output")->required();
  ingest->add_option("--cell-size", cell_size, "grid index cell size in meters")->capture_default_str();

  // gen-map
  auto* gen = app.add_subcommand("gen-map", "generate a synthetic map or map suite");
  std::string kind = "corridor", gen_out, gen_suite;
  double length = 20.0, width = 3.0;
  std::size_t gen_count = 12;
  gen->add_option("--kind", kind, "corridor | grid | L-shape")->capture_default_str();
  gen->add_option("--length", length, "meters")->capture_default_str();
  gen->add_option("--width", width, "sidewalk width in meters")->capture_default_str();
  gen->add_option("--out", gen_out, "output file, or directory with --suite")->required();
  gen->add_option("--suite", gen_suite, "write the train or valid suite instead");
  gen->add_option("--count", gen_count, "suite size")->capture_default_str();

  // rollout
  auto* rollout = app.add_subcommand("rollout", "run episodes with a policy and log them");
  std::string rollout_policy = "oracle", rollout_out, rollout_log;
  std::size_t rollout_episodes = 10;
  MapFlags rollout_maps;
  EnvFlags rollout_env;
  rollout->add_option("--policy", rollout_policy, "oracle | zero | model.json")->capture_default_str();
  rollout->add_option("--episodes", rollout_episodes)->capture_default_str();
  rollout->add_option("--log", rollout_log, "episode log directory (same as --log-dir)");
  rollout->add_option("--out", rollout_out, "JSON report");
  rollout_maps.add(rollout);
  rollout_env.add(rollout);

  // collect
  auto* collect = app.add_subcommand("collect", "collect teacher-labelled transitions");
  std::string collect_policy = "oracle", collect_out;
  std::size_t collect_episodes = 10;
  std::size_t collect_count = 0;
  MapFlags collect_maps;
  collect_maps.suite = "train";
  EnvFlags collect_env;
  collect->add_option("--policy", collect_policy,
                      "oracle (successful teacher episodes only) or a student model.json")
      ->capture_default_str();
  collect->add_option("--episodes", collect_episodes, "student episodes")->capture_default_str();
  collect->add_option("--count", collect_count, "transitions to store with --policy oracle");
  collect->add_option("--out", collect_out, "transitions JSONL")->required();
  collect_maps.add(collect);
  collect_env.add(collect);

  // distill
  auto* distill = app.add_subcommand("distill", "train a realistic-sensor student with DAGGER");
  std::string distill_config, distill_out, distill_report, distill_map_dir, distill_valid_dir;
  distill->add_option("--config", distill_config, "training config JSON");
  distill->add_option("--out", distill_out, "model output")->required();
  distill->add_option("--report", distill_report, "per-round report JSON");
  distill->add_option("--map-dir", distill_map_dir, "training maps (default: synthetic train suite)");
  distill->add_option("--valid-dir", distill_valid_dir, "validation maps (default: synthetic valid suite)");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate policies on train and validation maps");
  std::vector<std::string> eval_policies;
  std::size_t eval_episodes = 100;
  std::size_t eval_suite_count = 12;
  std::string eval_out, eval_map_dir;
  EnvFlags eval_env;
  eval->add_option("--policy", eval_policies, "oracle | zero | model.json (repeatable)")->required();
  eval->add_option("--episodes", eval_episodes)->capture_default_str();
  eval->add_option("--suite-count", eval_suite_count, "maps per suite")->capture_default_str();
  eval->add_option("--map-dir", eval_map_dir, "validation maps instead of the synthetic suite");
  eval->add_option("--out", eval_out, "JSON report");
  eval_env.add(eval);

  // bench
  auto* benchc = app.add_subcommand("bench", "measure env steps per second per observation mode");
  std::string bench_map, bench_out;
  std::size_t bench_steps = 5000;
  std::vector<std::string> bench_modes{"none", "lidar_only", "full_privileged"};
  EnvFlags bench_env;
  benchc->add_option("--map", bench_map, "map cache file (default: 40 m synthetic grid)");
  benchc->add_option("--steps", bench_steps)->capture_default_str();
  benchc->add_option("--modes", bench_modes)->delimiter(',')->capture_default_str();
  benchc->add_option("--out", bench_out, "JSON report");
  bench_env.add(benchc);

  // replay
  auto* replayc = app.add_subcommand("replay", "re-simulate a log and verify it");
  std::string replay_log, replay_bev, replay_svg;
  replayc->add_option("--log", replay_log, "episode JSONL log")->required();
  replayc->add_option("--dump-bev", replay_bev, "write one PGM per step into this directory");
  replayc->add_option("--svg", replay_svg, "write an overhead trajectory plot");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  const bool seed_given = app.count("--seed") > 0;
  const std::optional<fs::path> log_dir =
      g.log_dir.empty() ? std::nullopt : std::optional<fs::path>(g.log_dir);

  try {
    if (*ingest) {
      const OsmDocument doc = parse_osm(read_text_file(osm_file));
      const LatLon origin = parse_latlon(origin_text);
      std::mt19937_64 rng(g.seed);
      const SidewalkNetwork net = extract_sidewalks(doc, origin, rng);
      const WalkableMap map = build_walkable_map(net, cell_size, origin);
      save_map(map, ingest_out);
      std::printf("%zu sidewalks, %zu polygons, %.2f m^2 walkable -> %s\n", net.polylines.size(),
                  map.polygons().size(), map.area(), ingest_out.c_str());
    } else if (*gen) {
      if (!gen_suite.empty()) {
        const auto maps = load_maps("", "", gen_suite, gen_count);
        fs::create_directories(gen_out);
        for (std::size_t i = 0; i < maps.size(); ++i) {
          char name[32];
          std::snprintf(name, sizeof(name), "map_%03zu.json", i);
          save_map(maps[i], fs::path(gen_out) / name);
        }
        std::printf("%zu maps -> %s\n", maps.size(), gen_out.c_str());
      } else {
        const WalkableMap map =
            generate_synthetic_map({parse_synthetic_kind(kind), length, width}, g.seed);
        save_map(map, gen_out);
        std::printf("%.2f m^2 walkable -> %s\n", map.area(), gen_out.c_str());
      }
    } else if (*rollout) {
      EvalOptions opt;
      opt.n_episodes = rollout_episodes;
      opt.seed = g.seed;
      opt.workers = g.workers;
      opt.env = rollout_env.config();
      if (!rollout_log.empty()) {
        opt.log_dir = fs::path(rollout_log);
      } else {
        opt.log_dir = log_dir;
      }
      if (opt.log_dir) fs::create_directories(*opt.log_dir);
      const EvalReport report = evaluate(policy_factory(rollout_policy), rollout_maps.load(), opt);
      print_report_line(report);
      if (!rollout_out.empty()) write_json(rollout_out, to_json(report));
    } else if (*collect) {
      TrainConfig cfg;
      cfg.seed = g.seed;
      cfg.workers = g.workers;
      cfg.env = collect_env.config();
      const auto maps = collect_maps.load();
      AggregatedDataset dataset(std::max<std::size_t>({cfg.capacity, collect_count, 1}));
      if (collect_policy == "oracle") {
        if (collect_count == 0) throw ConfigError("--count is required with --policy oracle");
        cfg.capacity = dataset.capacity();
        prefill(dataset, maps, cfg, collect_count);
      } else {
        const StudentNet net = load_model(collect_policy);
        collect_round(dataset, net, maps, cfg, 0, collect_episodes);
      }
      std::vector<nlohmann::json> lines;
      for (std::size_t i = 0; i < dataset.size(); ++i) {
        const Transition& t = dataset[i];
        lines.push_back({{"episode", t.episode_id},
                         {"step", t.step_index},
                         {"round", t.round},
                         {"features", t.features},
                         {"label", {t.label.speed, t.label.yaw}}});
      }
      write_jsonl(collect_out, lines);
      std::printf("%zu transitions -> %s\n", dataset.size(), collect_out.c_str());
    } else if (*distill) {
      TrainConfig cfg = distill_config.empty() ? TrainConfig{}
                                               : train_config_from_json(read_json(distill_config));
      if (seed_given) cfg.seed = g.seed;
      cfg.workers = g.workers;
      cfg.validate();
      const auto train_maps = load_maps("", distill_map_dir, "train", cfg.train_maps);
      const auto valid_maps = load_maps("", distill_valid_dir, "valid", cfg.valid_maps);
      const auto start = std::chrono::steady_clock::now();
      const DaggerResult result =
          dagger_run(cfg, train_maps, valid_maps, [&](const RoundReport& r) {
            const double s =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            std::fprintf(stderr, "round %d: dataset %zu, loss %.4f, valid success %.3f (%.0f s)\n",
                         r.round, r.dataset_size, r.losses.empty() ? 0.0 : r.losses.back(),
                         r.validation.success_rate, s);
          });
      save_model(result.best, distill_out);
      if (!distill_report.empty()) {
        nlohmann::json doc = to_json(result);
        doc["config"] = to_json(cfg);
        write_json(distill_report, doc);
      }
      std::printf("best round %d, valid success %.4f -> %s\n", result.best_round,
                  result.rounds[static_cast<std::size_t>(result.best_round)].validation.success_rate,
                  distill_out.c_str());
    } else if (*eval) {
      const auto train_maps = make_map_suite(kTrainSuiteSeed, eval_suite_count);
      const auto valid_maps = load_maps("", eval_map_dir, "valid", eval_suite_count);
      EvalOptions opt;
      opt.n_episodes = eval_episodes;
      opt.seed = g.seed;
      opt.workers = g.workers;
      opt.env = eval_env.config();
      std::vector<TableRow> rows;
      nlohmann::json doc = nlohmann::json::array();
      for (const std::string& spec : eval_policies) {
        const PolicyFactory factory = policy_factory(spec);
        TableRow row;
        EvalOptions train_opt = opt;
        row.train = evaluate(factory, train_maps, train_opt);
        EvalOptions valid_opt = opt;
        if (log_dir) {
          valid_opt.log_dir = *log_dir / row.train->policy;
          fs::create_directories(*valid_opt.log_dir);
        }
        row.valid = evaluate(factory, valid_maps, valid_opt);
        row.agent = row.valid->policy;
        doc.push_back({{"agent", row.agent}, {"train", to_json(*row.train)}, {"valid", to_json(*row.valid)}});
        rows.push_back(std::move(row));
      }
      std::fputs(format_table(rows).c_str(), stdout);
      if (!eval_out.empty()) write_json(eval_out, doc);
    } else if (*benchc) {
      std::vector<BenchMode> modes;
      for (const std::string& m : bench_modes) {
        if (m == "none") {
          modes.push_back(BenchMode::kNone);
        } else if (m == "lidar_only") {
          modes.push_back(BenchMode::kLidarOnly);
        } else if (m == "full_privileged") {
          modes.push_back(BenchMode::kFullPrivileged);
        } else {
          throw ConfigError("unknown bench mode '" + m + "'");
        }
      }
      const WalkableMap map = bench_map.empty()
                                  ? generate_synthetic_map({SyntheticKind::kGrid, 40.0, 3.0}, g.seed)
                                  : load_map(bench_map);
      const BenchReport report = bench(map, modes, bench_steps, g.seed, bench_env.config());
      for (const BenchEntry& e : report.entries) {
        std::printf("%-16s %10.1f steps/s\n", std::string(to_string(e.mode)).c_str(), e.steps_per_second);
      }
      if (!bench_out.empty()) write_json(bench_out, to_json(report));
    } else if (*replayc) {
      ReplayOptions opt;
      if (!replay_bev.empty()) {
        fs::create_directories(replay_bev);
        opt.dump_bev_dir = fs::path(replay_bev);
      }
      if (!replay_svg.empty()) opt.svg_path = fs::path(replay_svg);
      const ReplayResult r = replay(replay_log, opt);
      std::printf("integrity OK: %d steps, terminal %s\n", r.steps,
                  std::string(to_string(r.terminal)).c_str());
    }
  } catch (const IntegrityError& e) {
    std::fprintf(stderr, "integrity error: %s\n", e.what());
    return kExitIntegrity;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "divergence: %s\n", e.what());
    return kExitIntegrity;
  } catch (const ReferentialIntegrityError& e) {
    std::fprintf(stderr, "integrity error: %s\n", e.what());
    return kExitIntegrity;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
