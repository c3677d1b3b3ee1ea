#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "gradcheck.hpp"
#include "sidewalk/distill.hpp"
#include "sidewalk/errors.hpp"
#include "sidewalk/student.hpp"
#include "support.hpp"

using namespace sidewalk;

namespace {

Eigen::MatrixXd column(const Features& f) {
  Eigen::MatrixXd x(kStudentInputs, 1);
  for (int i = 0; i < kStudentInputs; ++i) x(i, 0) = f[static_cast<std::size_t>(i)];
  return x;
}

Transition random_transition(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_real_distribution<double> u11(-1.0, 1.0);
  Transition t;
  for (auto& v : t.features) v = static_cast<float>(u01(rng));
  t.label = {u11(rng), u11(rng)};
  return t;
}

}  // namespace

TEST(ActionNormalization, RoundTrips) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> v(kMinSpeed, kMaxSpeed);
  std::uniform_real_distribution<double> w(-kMaxYawDelta, kMaxYawDelta);
  for (int i = 0; i < 10'000; ++i) {
    const Action a(v(rng), w(rng));
    const NormalizedAction n = normalize_action(a);
    ASSERT_GE(n.speed, -1.0);
    ASSERT_LE(n.speed, 1.0);
    ASSERT_GE(n.yaw, -1.0);
    ASSERT_LE(n.yaw, 1.0);
    const Action back = denormalize_action(n);
    ASSERT_NEAR(back.speed(), a.speed(), 1e-9);
    ASSERT_NEAR(back.yaw_delta(), a.yaw_delta(), 1e-9);
  }
}

TEST(ActionNormalization, Endpoints) {
  EXPECT_NEAR(normalize_action(Action(kMaxSpeed, kMaxYawDelta)).speed, 1.0, 1e-12);
  EXPECT_NEAR(normalize_action(Action(kMinSpeed, -kMaxYawDelta)).speed, -1.0, 1e-12);
  EXPECT_NEAR(normalize_action(Action(kMinSpeed, -kMaxYawDelta)).yaw, -1.0, 1e-12);
  EXPECT_NEAR(normalize_action(Action(0.05, 0.0)).speed, 0.0, 1e-12);
}

TEST(Features, FiniteAndBounded) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> range(0.0, kRealisticRange);
  std::uniform_real_distribution<double> dist(0.0, 200.0);
  std::uniform_real_distribution<double> bearing(-std::numbers::pi, std::numbers::pi);
  for (int i = 0; i < 500; ++i) {
    RealisticObservation obs;
    obs.rlid.max_range = kRealisticRange;
    for (int k = 0; k < kRealisticRays; ++k) obs.rlid.ranges.push_back(range(rng));
    obs.rgdd = {dist(rng), bearing(rng)};
    const Features f = encode_observation(obs);
    for (const float v : f) {
      ASSERT_TRUE(std::isfinite(v));
      ASSERT_GE(v, -1.0f);
      ASSERT_LE(v, 1.0f);
    }
    ASSERT_FLOAT_EQ(f[kRealisticRays], static_cast<float>(std::min(obs.rgdd.distance, kGoalDistanceClip) / kGoalDistanceClip));
  }
}

TEST(Features, WrongRayCountIsRejected) {
  RealisticObservation obs;
  obs.rlid.ranges.assign(64, 1.0);
  obs.rlid.max_range = kRealisticRange;
  EXPECT_THROW(encode_observation(obs), ContractViolation);
}

TEST(StudentNet, OutputsStayInBounds) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> wild(-1e3, 1e3);
  for (int n = 0; n < 20; ++n) {
    const StudentNet net(rng());
    for (int i = 0; i < 50; ++i) {
      Features f;
      for (auto& v : f) v = static_cast<float>(wild(rng));
      const NormalizedAction a = net.predict(f);
      ASSERT_GE(a.speed, -1.0);
      ASSERT_LE(a.speed, 1.0);
      ASSERT_GE(a.yaw, -1.0);
      ASSERT_LE(a.yaw, 1.0);
    }
  }
}

TEST(StudentNet, ParameterCountAndGlorotRange) {
  const StudentNet net(9);
  EXPECT_EQ(StudentNet::parameter_count(), 256u * 275 + 256 + 128u * 256 + 128 + 2u * 128 + 2);
  EXPECT_EQ(net.parameters().size(), StudentNet::parameter_count());
  const double l1 = std::sqrt(6.0 / (275 + 256));
  EXPECT_LE(net.w1.cwiseAbs().maxCoeff(), l1);
  EXPECT_EQ(net.b1.cwiseAbs().maxCoeff(), 0.0);
}

TEST(StudentNet, SameSeedSameWeights) {
  EXPECT_EQ(StudentNet(4).parameters(), StudentNet(4).parameters());
  EXPECT_NE(StudentNet(4).parameters(), StudentNet(5).parameters());
}

TEST(StudentNet, LossMatchesIndependentForward) {
  std::mt19937_64 rng(6);
  const StudentNet net(6);
  Eigen::MatrixXd x, y;
  oracle::random_batch(rng, 7, x, y);
  // Plain loops, no Eigen products.
  long double total = 0;
  for (int s = 0; s < 7; ++s) {
    std::vector<long double> h1(kStudentHidden1), h2(kStudentHidden2);
    for (int j = 0; j < kStudentHidden1; ++j) {
      long double z = net.b1(j);
      for (int i = 0; i < kStudentInputs; ++i) z += net.w1(j, i) * x(i, s);
      h1[j] = std::max<long double>(0, z);
    }
    for (int k = 0; k < kStudentHidden2; ++k) {
      long double z = net.b2(k);
      for (int j = 0; j < kStudentHidden1; ++j) z += net.w2(k, j) * h1[j];
      h2[k] = std::max<long double>(0, z);
    }
    for (int o = 0; o < kStudentOutputs; ++o) {
      long double z = net.b3(o);
      for (int k = 0; k < kStudentHidden2; ++k) z += net.w3(o, k) * h2[k];
      total += std::fabs(std::tanh(z) - y(o, s));
    }
  }
  EXPECT_NEAR(net.loss(x, y), static_cast<double>(total / 14), 1e-12);
  StudentNet::Gradients g;
  EXPECT_EQ(net.loss_and_gradient(x, y, g), net.loss(x, y));
}

TEST(StudentNet, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  for (int batch = 0; batch < 3; ++batch) {
    StudentNet net(rng());
    // Non-zero biases so the bias coordinates are exercised away from zero.
    std::normal_distribution<double> nb(0.0, 0.05);
    for (int j = 0; j < kStudentHidden1; ++j) net.b1(j) = nb(rng);
    for (int j = 0; j < kStudentHidden2; ++j) net.b2(j) = nb(rng);
    Eigen::MatrixXd x, y;
    oracle::random_batch(rng, 16, x, y);
    const oracle::GradCheckResult r = oracle::check_gradient(net, x, y, rng, 200);
    EXPECT_LT(r.max_relative_error, 1e-4);
    EXPECT_GT(r.checked, 3 * r.excluded);
  }
}

TEST(StudentNet, OverfitsSingleTransition) {
  std::mt19937_64 rng(8);
  AggregatedDataset data(10);
  data.append(random_transition(rng));
  StudentNet net(8);
  // L1 keeps a constant gradient near the fit, so the step is annealed.
  std::vector<double> losses;
  for (const double lr : {1e-3, 1e-4, 1e-5, 1e-6}) {
    AdamOptimizer adam(lr);
    const auto part = train_epochs(net, adam, data, 500, 1, 1);
    losses.insert(losses.end(), part.begin(), part.end());
  }
  Eigen::MatrixXd y(2, 1);
  y << data[0].label.speed, data[0].label.yaw;
  EXPECT_LT(net.loss(column(data[0].features), y), 1e-3);
  EXPECT_LT(losses.back(), losses.front());
}

TEST(StudentNet, ZeroLearningRateLeavesWeightsUntouched) {
  std::mt19937_64 rng(9);
  AggregatedDataset data(100);
  for (int i = 0; i < 64; ++i) data.append(random_transition(rng));
  StudentNet net(9);
  const auto before = net.parameters();
  AdamOptimizer adam(0.0);
  train_epochs(net, adam, data, 3, 16, 2);
  EXPECT_EQ(net.parameters(), before);
}

TEST(StudentNet, EpochLossIsMeanOfDatasetLossBeforeUpdate) {
  // With lr = 0 the epoch loss is exactly the dataset loss, batch-weighted.
  std::mt19937_64 rng(10);
  AggregatedDataset data(100);
  for (int i = 0; i < 50; ++i) data.append(random_transition(rng));
  StudentNet net(10);
  Eigen::MatrixXd x(kStudentInputs, 50), y(2, 50);
  for (int i = 0; i < 50; ++i) {
    x.col(i) = column(data[static_cast<std::size_t>(i)].features);
    y(0, i) = data[static_cast<std::size_t>(i)].label.speed;
    y(1, i) = data[static_cast<std::size_t>(i)].label.yaw;
  }
  AdamOptimizer adam(0.0);
  const auto losses = train_epochs(net, adam, data, 1, 16, 3);
  EXPECT_NEAR(losses[0], net.loss(x, y), 1e-12);
}

TEST(StudentNet, TrainingIsDeterministicAndReducesLoss) {
  std::mt19937_64 rng(11);
  AggregatedDataset data(1000);
  for (int i = 0; i < 300; ++i) {
    Transition t = random_transition(rng);
    t.label = {std::tanh(t.features[0] - t.features[1]), std::tanh(t.features[2] - 0.5)};
    data.append(t);
  }
  const auto run = [&] {
    StudentNet net(12);
    AdamOptimizer adam(1e-3);
    auto losses = train_epochs(net, adam, data, 20, 32, 4);
    return std::make_pair(losses, net.parameters());
  };
  const auto a = run();
  EXPECT_EQ(a, run());
  EXPECT_LT(a.first.back(), 0.5 * a.first.front());
}

TEST(StudentNet, NonFiniteWeightsRaiseDivergence) {
  std::mt19937_64 rng(12);
  AggregatedDataset data(10);
  for (int i = 0; i < 10; ++i) data.append(random_transition(rng));
  StudentNet net(1);
  net.w3(0, 0) = std::numeric_limits<double>::quiet_NaN();
  AdamOptimizer adam(1e-3);
  try {
    train_epochs(net, adam, data, 1, 4, 1);
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.batch(), 0u);
  }
}

TEST(ModelFile, RoundTripIsExact) {
  const StudentNet net(13);
  const auto path = std::filesystem::temp_directory_path() / "sidewalk_model_roundtrip.json";
  save_model(net, path);
  EXPECT_EQ(load_model(path).parameters(), net.parameters());
  std::filesystem::remove(path);
  EXPECT_EQ(model_from_json(model_to_json(net)).parameters(), net.parameters());
}

TEST(ModelFile, RejectsBadDocuments) {
  nlohmann::json doc = model_to_json(StudentNet(1));
  nlohmann::json bad = doc;
  bad["version"] = kModelFileVersion + 1;
  EXPECT_THROW(model_from_json(bad), ConfigError);
  bad = doc;
  bad["weights"].erase(0);
  EXPECT_THROW(model_from_json(bad), ConfigError);
  EXPECT_THROW(model_from_json(nlohmann::json::array()), ConfigError);
}
