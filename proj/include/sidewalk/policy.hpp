#pragma once

#include <string>

#include "sidewalk/episode.hpp"
#include "sidewalk/sensors.hpp"
#include "sidewalk/world.hpp"

namespace sidewalk {

// What a policy sees at one step. Learned policies read only the observation;
// the oracle teacher is privileged and also reads the world and map.
struct PolicyInput {
  const Observation& observation;
  const WorldState& world;
  const WalkableMap& map;
  Vec2 target;
};

class Policy {
 public:
  virtual ~Policy() = default;

  // Called at the start of every episode.
  virtual void reset() {}
  virtual Action act(const PolicyInput& input) = 0;
  // Observation variant(s) the policy needs rendered.
  virtual ObservationMode required_observation() const = 0;
  virtual std::string name() const = 0;
};

// Replays a fixed action forever; used for interface and harness tests.
class ConstantPolicy final : public Policy {
 public:
  explicit ConstantPolicy(Action action, std::string name = "constant")
      : action_(action), name_(std::move(name)) {}

  Action act(const PolicyInput&) override { return action_; }
  ObservationMode required_observation() const override { return ObservationMode::kNone; }
  std::string name() const override { return name_; }

 private:
  Action action_;
  std::string name_;
};

}  // namespace sidewalk
