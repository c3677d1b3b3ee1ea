#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "sidewalk/episode.hpp"
#include "sidewalk/eval.hpp"
#include "sidewalk/student.hpp"
#include "sidewalk/teacher.hpp"

namespace sidewalk {

// One teacher-labelled realistic observation.
struct Transition {
  Features features{};
  NormalizedAction label;
  std::uint64_t episode_id = 0;
  int step_index = 0;
  int round = 0;  // -1 for prefill
};

// Capacity-bounded FIFO of transitions. Appends keep insertion order; when
// full, the oldest transitions go first.
class AggregatedDataset {
 public:
  explicit AggregatedDataset(std::size_t capacity = 200'000);

  void append(const Transition& t);
  void append(const std::vector<Transition>& ts);
  // Marks the start of a collection round for the per-round counters.
  void begin_round(int round);

  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& operator[](std::size_t i) const { return data_[i]; }
  std::size_t evicted() const { return evicted_; }
  // Transitions appended during each round, in begin_round order.
  const std::vector<std::pair<int, std::size_t>>& round_counts() const { return round_counts_; }

 private:
  std::size_t capacity_;
  std::deque<Transition> data_;
  std::size_t evicted_ = 0;
  std::vector<std::pair<int, std::size_t>> round_counts_;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 256;
  int epochs_per_round = 5;
  int rounds = 10;
  std::size_t prefill_count = 20'000;
  std::size_t capacity = 200'000;
  std::uint64_t seed = 0;
  std::size_t collect_episodes = 60;  // student rollouts per round
  std::size_t eval_episodes = 100;    // validation episodes per round
  std::size_t train_maps = 12;
  std::size_t valid_maps = 12;
  // Probability of executing the teacher's action instead of the student's
  // during collection; 0 is pure student rollouts.
  double beta = 0.0;
  // Prefill gives up after this many consecutive failed teacher episodes.
  std::size_t prefill_stall_episodes = 200;
  unsigned workers = 1;
  EpisodeConfig env{};
  TeacherParams teacher{};

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& doc);

// Seeds of prefill episode e and of collection episode e in a round. Episode e
// runs on maps[e % maps.size()].
std::uint64_t prefill_episode_seed(const TrainConfig& config, std::size_t episode);
std::uint64_t collect_episode_seed(const TrainConfig& config, int round, std::size_t episode);

// Runs teacher episodes over the maps, keeping transitions from successful
// episodes only, until exactly count are stored.
void prefill(AggregatedDataset& dataset, const std::vector<WalkableMap>& maps,
             const TrainConfig& config, std::size_t count);

// Student-driven rollouts (teacher-driven with probability beta per step),
// each visited state labelled with the teacher action. Returns the number of
// transitions appended.
std::size_t collect_round(AggregatedDataset& dataset, const StudentNet& student,
                          const std::vector<WalkableMap>& maps, const TrainConfig& config,
                          int round, std::size_t n_episodes);

// Mini-batch Adam on mean L1 loss; returns the mean training loss per epoch.
// Batches are drawn from a seeded shuffle. Throws DivergenceError on a
// non-finite loss or gradient.
std::vector<double> train_epochs(StudentNet& net, AdamOptimizer& optimizer,
                                 const AggregatedDataset& dataset, int epochs,
                                 std::size_t batch_size, std::uint64_t seed);

struct RoundReport {
  int round = 0;
  std::size_t dataset_size = 0;
  std::size_t collected = 0;
  std::vector<double> losses;
  EvalReport validation;
};

struct DaggerResult {
  StudentNet best;
  int best_round = 0;
  std::vector<RoundReport> rounds;
};

nlohmann::json to_json(const DaggerResult& result);

// Prefill, then for each round: train, validate, collect (except after the
// last). rounds = 0 is plain behaviour cloning on the prefill. Returns the
// student with the best validation success rate (earliest on ties).
using ProgressFn = std::function<void(const RoundReport&)>;
DaggerResult dagger_run(const TrainConfig& config, const std::vector<WalkableMap>& train_maps,
                        const std::vector<WalkableMap>& valid_maps, const ProgressFn& progress = {});

}  // namespace sidewalk
