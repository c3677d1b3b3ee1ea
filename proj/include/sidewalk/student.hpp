#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "sidewalk/policy.hpp"
#include "sidewalk/sensors.hpp"
#include "sidewalk/world.hpp"

namespace sidewalk {

inline constexpr int kStudentInputs = kRealisticRays + 3;  // ranges, goal distance, sin, cos
inline constexpr int kStudentHidden1 = 256;
inline constexpr int kStudentHidden2 = 128;
inline constexpr int kStudentOutputs = 2;
inline constexpr double kGoalDistanceClip = 15.0;
inline constexpr int kModelFileVersion = 1;

using Features = std::array<float, kStudentInputs>;

// Realistic observation -> [0, 1] ranges, clipped goal distance / 15, sin and
// cos of the bearing.
Features encode_observation(const RealisticObservation& obs);

struct NormalizedAction {
  double speed = 0.0;  // [-1, 1] over [kMinSpeed, kMaxSpeed]
  double yaw = 0.0;    // [-1, 1] over [-kMaxYawDelta, kMaxYawDelta]
};

NormalizedAction normalize_action(const Action& a);
Action denormalize_action(const NormalizedAction& a);

// 275 -> 256 -> 128 -> 2 multilayer perceptron with rectifier hidden layers
// and a tanh output, so outputs always map into the action bounds.
class StudentNet {
 public:
  struct Gradients {
    Eigen::MatrixXd w1, w2, w3;
    Eigen::VectorXd b1, b2, b3;
  };

  // Intermediate values of a batch forward pass; columns are samples.
  struct Activations {
    Eigen::MatrixXd z1, h1, z2, h2, z3, y;
  };

  StudentNet();
  explicit StudentNet(std::uint64_t seed);

  static constexpr std::size_t parameter_count() {
    return std::size_t{kStudentHidden1} * kStudentInputs + kStudentHidden1 +
           std::size_t{kStudentHidden2} * kStudentHidden1 + kStudentHidden2 +
           std::size_t{kStudentOutputs} * kStudentHidden2 + kStudentOutputs;
  }

  Activations forward(const Eigen::MatrixXd& inputs) const;
  NormalizedAction predict(const Features& features) const;

  // Mean absolute error over every output of every sample, and its gradient.
  // The rectifier and the absolute value use sub-gradient 0 at their kinks.
  double loss(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets) const;
  double loss_and_gradient(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                           Gradients& grad) const;

  // Flat parameter order: w1 (row-major), b1, w2, b2, w3, b3.
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> flat);
  static std::vector<double> flatten(const Gradients& grad);

  Eigen::MatrixXd w1, w2, w3;
  Eigen::VectorXd b1, b2, b3;
};

// Adaptive moment estimation with (0.9, 0.999) decay.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                         double epsilon = 1e-8);

  void step(StudentNet& net, const StudentNet::Gradients& grad);
  double learning_rate() const { return lr_; }

 private:
  double lr_;
  double beta1_;
  double beta2_;
  double epsilon_;
  long long t_ = 0;
  StudentNet::Gradients m_;
  StudentNet::Gradients v_;
  bool initialised_ = false;
};

nlohmann::json model_to_json(const StudentNet& net);
StudentNet model_from_json(const nlohmann::json& doc);
void save_model(const StudentNet& net, const std::filesystem::path& path);
StudentNet load_model(const std::filesystem::path& path);

// Drives the agent from the realistic observation only.
class StudentPolicy final : public Policy {
 public:
  explicit StudentPolicy(StudentNet net, std::string name = "student")
      : net_(std::move(net)), name_(std::move(name)) {}

  Action act(const PolicyInput& input) override;
  ObservationMode required_observation() const override { return ObservationMode::kRealistic; }
  std::string name() const override { return name_; }
  const StudentNet& net() const { return net_; }

 private:
  StudentNet net_;
  std::string name_;
};

}  // namespace sidewalk
