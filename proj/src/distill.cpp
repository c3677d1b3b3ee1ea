#include "sidewalk/distill.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <random>
#include <thread>

#include "sidewalk/errors.hpp"

namespace sidewalk {

AggregatedDataset::AggregatedDataset(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("dataset capacity must be positive");
}

void AggregatedDataset::append(const Transition& t) {
  if (data_.size() == capacity_) {
    data_.pop_front();
    ++evicted_;
  }
  data_.push_back(t);
  if (!round_counts_.empty()) ++round_counts_.back().second;
}

void AggregatedDataset::append(const std::vector<Transition>& ts) {
  for (const Transition& t : ts) append(t);
}

void AggregatedDataset::begin_round(int round) { round_counts_.emplace_back(round, 0); }

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be a finite non-negative number");
  }
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (epochs_per_round <= 0) throw ConfigError("epochs_per_round must be positive");
  if (rounds < 0) throw ConfigError("rounds must be non-negative");
  if (capacity == 0) throw ConfigError("capacity must be positive");
  if (prefill_count > capacity) throw ConfigError("prefill_count exceeds the dataset capacity");
  if (eval_episodes == 0) throw ConfigError("eval_episodes must be positive");
  if (train_maps == 0 || valid_maps == 0) throw ConfigError("map counts must be positive");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0, 1]");
  if (prefill_stall_episodes == 0) throw ConfigError("prefill_stall_episodes must be positive");
  if (workers == 0) throw ConfigError("workers must be positive");
  env.validate();
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"epochs_per_round", c.epochs_per_round},
          {"rounds", c.rounds},
          {"prefill_count", c.prefill_count},
          {"capacity", c.capacity},
          {"seed", c.seed},
          {"collect_episodes", c.collect_episodes},
          {"eval_episodes", c.eval_episodes},
          {"train_maps", c.train_maps},
          {"valid_maps", c.valid_maps},
          {"beta", c.beta},
          {"prefill_stall_episodes", c.prefill_stall_episodes},
          {"env", to_json(c.env)}};
}

TrainConfig train_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("training config must be a JSON object");
  static const char* const kKeys[] = {"learning_rate", "batch_size",  "epochs_per_round",
                                      "rounds",        "prefill_count", "capacity",
                                      "seed",          "collect_episodes", "eval_episodes",
                                      "train_maps",    "valid_maps",  "beta",
                                      "prefill_stall_episodes", "env"};
  for (const auto& [key, value] : doc.items()) {
    if (std::find_if(std::begin(kKeys), std::end(kKeys), [&](const char* k) { return key == k; }) ==
        std::end(kKeys)) {
      throw ConfigError("unknown training config key '" + key + "'");
    }
  }
  TrainConfig c;
  try {
    c.learning_rate = doc.value("learning_rate", c.learning_rate);
    c.batch_size = doc.value("batch_size", c.batch_size);
    c.epochs_per_round = doc.value("epochs_per_round", c.epochs_per_round);
    c.rounds = doc.value("rounds", c.rounds);
    c.prefill_count = doc.value("prefill_count", c.prefill_count);
    c.capacity = doc.value("capacity", c.capacity);
    c.seed = doc.value("seed", c.seed);
    c.collect_episodes = doc.value("collect_episodes", c.collect_episodes);
    c.eval_episodes = doc.value("eval_episodes", c.eval_episodes);
    c.train_maps = doc.value("train_maps", c.train_maps);
    c.valid_maps = doc.value("valid_maps", c.valid_maps);
    c.beta = doc.value("beta", c.beta);
    c.prefill_stall_episodes = doc.value("prefill_stall_episodes", c.prefill_stall_episodes);
    if (doc.contains("env")) c.env = episode_config_from_json(doc.at("env"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("training config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

constexpr std::uint64_t kPrefillStream = 11;
constexpr std::uint64_t kCollectStream = 100;
constexpr std::uint64_t kTrainStream = 500;
constexpr std::uint64_t kInitStream = 1;

struct LabeledEpisode {
  std::vector<Transition> transitions;
  Terminal terminal = Terminal::kNone;
};

// Per-thread state for labelled rollouts: a teacher and one env per map.
class Labeler {
 public:
  Labeler(const std::vector<WalkableMap>& maps, const TrainConfig& config)
      : maps_(&maps), config_(config), teacher_(config.teacher), envs_(maps.size()) {
    config_.env.observe = ObservationMode::kBoth;
  }

  // student == nullptr: the teacher drives.
  LabeledEpisode run(std::size_t map_index, std::uint64_t seed, std::uint64_t episode_id, int round,
                     const StudentNet* student) {
    auto& env = envs_[map_index];
    if (!env) env = std::make_unique<SidewalkEnv>((*maps_)[map_index], config_.env);
    std::mt19937_64 mix_rng(derive_seed(seed, 7));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    LabeledEpisode out;
    teacher_.reset();
    Observation obs = env->reset(seed);
    int step = 0;
    while (!env->done()) {
      Action label;
      try {
        label = teacher_.act(PolicyInput{obs, env->world(), env->map(), env->target()});
      } catch (const NoPathError&) {
        out.terminal = Terminal::kTimeout;  // no label available from here on
        return out;
      }
      Transition t;
      t.features = encode_observation(*obs.realistic);
      t.label = normalize_action(label);
      t.episode_id = episode_id;
      t.step_index = step++;
      t.round = round;
      out.transitions.push_back(t);

      Action executed = label;
      if (student != nullptr) {
        const bool use_teacher = config_.beta > 0.0 && unit(mix_rng) < config_.beta;
        if (!use_teacher) executed = denormalize_action(student->predict(t.features));
      }
      StepOutcome next = env->step(executed);
      out.terminal = next.terminal;
      obs = std::move(next.observation);
    }
    return out;
  }

 private:
  const std::vector<WalkableMap>* maps_;
  TrainConfig config_;
  OracleTeacher teacher_;
  std::vector<std::unique_ptr<SidewalkEnv>> envs_;
};

// Runs episodes [first, first + n) across worker threads; results come back in
// episode order regardless of the worker count.
std::vector<LabeledEpisode> run_batch(std::vector<Labeler>& labelers, std::size_t n_maps,
                                      std::size_t first, std::size_t n, std::uint64_t stream_seed,
                                      int round, const StudentNet* student) {
  std::vector<LabeledEpisode> results(n);
  const auto work = [&](std::size_t w, std::size_t n_workers) {
    for (std::size_t i = w; i < n; i += n_workers) {
      const std::size_t e = first + i;
      results[i] = labelers[w].run(e % n_maps, derive_seed(stream_seed, e), e, round, student);
    }
  };
  const std::size_t n_workers = std::min(labelers.size(), n);
  if (n_workers <= 1) {
    work(0, 1);
    return results;
  }
  std::vector<std::exception_ptr> errors(n_workers);
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < n_workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        work(w, n_workers);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

std::vector<Labeler> make_labelers(const std::vector<WalkableMap>& maps, const TrainConfig& config) {
  if (maps.empty()) throw ConfigError("no maps to roll out on");
  std::vector<Labeler> labelers;
  for (unsigned w = 0; w < std::max(1u, config.workers); ++w) labelers.emplace_back(maps, config);
  return labelers;
}

}  // namespace

std::uint64_t prefill_episode_seed(const TrainConfig& config, std::size_t episode) {
  return derive_seed(derive_seed(config.seed, kPrefillStream), episode);
}

std::uint64_t collect_episode_seed(const TrainConfig& config, int round, std::size_t episode) {
  return derive_seed(derive_seed(config.seed, kCollectStream + static_cast<std::uint64_t>(round)), episode);
}

void prefill(AggregatedDataset& dataset, const std::vector<WalkableMap>& maps,
             const TrainConfig& config, std::size_t count) {
  if (count == 0) return;
  std::vector<Labeler> labelers = make_labelers(maps, config);
  const std::uint64_t stream_seed = derive_seed(config.seed, kPrefillStream);
  dataset.begin_round(-1);
  std::size_t stored = 0;
  std::size_t consecutive_failures = 0;
  std::size_t next_episode = 0;
  const std::size_t batch = labelers.size();
  while (stored < count) {
    const auto episodes = run_batch(labelers, maps.size(), next_episode, batch, stream_seed, -1, nullptr);
    next_episode += batch;
    for (const LabeledEpisode& ep : episodes) {
      if (stored == count) break;
      if (ep.terminal != Terminal::kSuccess) {
        if (++consecutive_failures >= config.prefill_stall_episodes) {
          throw PrefillStallError("teacher failed " + std::to_string(consecutive_failures) +
                                  " consecutive prefill episodes");
        }
        continue;
      }
      consecutive_failures = 0;
      for (const Transition& t : ep.transitions) {
        if (stored == count) break;
        dataset.append(t);
        ++stored;
      }
    }
  }
}

std::size_t collect_round(AggregatedDataset& dataset, const StudentNet& student,
                          const std::vector<WalkableMap>& maps, const TrainConfig& config,
                          int round, std::size_t n_episodes) {
  std::vector<Labeler> labelers = make_labelers(maps, config);
  const std::uint64_t stream_seed =
      derive_seed(config.seed, kCollectStream + static_cast<std::uint64_t>(round));
  const auto episodes = run_batch(labelers, maps.size(), 0, n_episodes, stream_seed, round, &student);
  dataset.begin_round(round);
  std::size_t added = 0;
  for (const LabeledEpisode& ep : episodes) {
    dataset.append(ep.transitions);
    added += ep.transitions.size();
  }
  return added;
}

std::vector<double> train_epochs(StudentNet& net, AdamOptimizer& optimizer,
                                 const AggregatedDataset& dataset, int epochs,
                                 std::size_t batch_size, std::uint64_t seed) {
  if (dataset.empty()) throw ConfigError("cannot train on an empty dataset");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(dataset.size());
  std::vector<double> history;
  StudentNet::Gradients grad;
  Eigen::MatrixXd x;
  Eigen::MatrixXd y;
  std::size_t batch_index = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch_size, ++batch_index) {
      const std::size_t b = std::min(batch_size, order.size() - start);
      x.resize(kStudentInputs, static_cast<Eigen::Index>(b));
      y.resize(kStudentOutputs, static_cast<Eigen::Index>(b));
      for (std::size_t j = 0; j < b; ++j) {
        const Transition& t = dataset[order[start + j]];
        const auto col = static_cast<Eigen::Index>(j);
        for (int i = 0; i < kStudentInputs; ++i) x(i, col) = t.features[static_cast<std::size_t>(i)];
        y(0, col) = t.label.speed;
        y(1, col) = t.label.yaw;
      }
      const double loss = net.loss_and_gradient(x, y, grad);
      const bool finite = std::isfinite(loss) && grad.w1.allFinite() && grad.w2.allFinite() &&
                          grad.w3.allFinite() && grad.b1.allFinite() && grad.b2.allFinite() &&
                          grad.b3.allFinite();
      if (!finite) throw DivergenceError("non-finite loss or gradient", batch_index);
      optimizer.step(net, grad);
      total += loss * static_cast<double>(b);
    }
    history.push_back(total / static_cast<double>(order.size()));
  }
  return history;
}

nlohmann::json to_json(const DaggerResult& result) {
  nlohmann::json rounds = nlohmann::json::array();
  for (const RoundReport& r : result.rounds) {
    nlohmann::json v = to_json(r.validation);
    v.erase("episodes");
    rounds.push_back({{"round", r.round},
                      {"dataset_size", r.dataset_size},
                      {"collected", r.collected},
                      {"losses", r.losses},
                      {"validation", v}});
  }
  return {{"best_round", result.best_round}, {"rounds", rounds}};
}

DaggerResult dagger_run(const TrainConfig& config, const std::vector<WalkableMap>& train_maps,
                        const std::vector<WalkableMap>& valid_maps, const ProgressFn& progress) {
  config.validate();
  AggregatedDataset dataset(config.capacity);
  prefill(dataset, train_maps, config, config.prefill_count);
  if (dataset.empty()) throw ConfigError("prefill_count must be positive to train a student");

  StudentNet net(derive_seed(config.seed, kInitStream));
  AdamOptimizer optimizer(config.learning_rate);
  EvalOptions eval;
  eval.n_episodes = config.eval_episodes;
  eval.seed = config.seed;
  eval.workers = config.workers;
  eval.env = config.env;

  DaggerResult result;
  double best_success = -1.0;
  std::size_t collected = 0;
  for (int round = 0; round <= config.rounds; ++round) {
    RoundReport report;
    report.round = round;
    report.collected = collected;
    report.losses = train_epochs(net, optimizer, dataset, config.epochs_per_round, config.batch_size,
                                 derive_seed(config.seed, kTrainStream + static_cast<std::uint64_t>(round)));
    report.dataset_size = dataset.size();
    report.validation =
        evaluate([&net] { return std::make_unique<StudentPolicy>(net); }, valid_maps, eval);
    if (report.validation.success_rate > best_success) {
      best_success = report.validation.success_rate;
      result.best = net;
      result.best_round = round;
    }
    if (progress) progress(report);
    result.rounds.push_back(std::move(report));
    if (round < config.rounds) {
      collected = collect_round(dataset, net, train_maps, config, round, config.collect_episodes);
    }
  }
  return result;
}

}  // namespace sidewalk
