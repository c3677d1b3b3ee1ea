#include "sidewalk/student.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sidewalk/errors.hpp"
#include "sidewalk/walkable_map.hpp"

namespace sidewalk {

Features encode_observation(const RealisticObservation& obs) {
  if (obs.rlid.ranges.size() != static_cast<std::size_t>(kRealisticRays)) {
    throw ContractViolation("realistic LiDAR must have " + std::to_string(kRealisticRays) + " rays");
  }
  Features f{};
  const double max_range = obs.rlid.max_range > 0.0 ? obs.rlid.max_range : kRealisticRange;
  for (int k = 0; k < kRealisticRays; ++k) {
    f[static_cast<std::size_t>(k)] =
        static_cast<float>(std::clamp(obs.rlid.ranges[static_cast<std::size_t>(k)] / max_range, 0.0, 1.0));
  }
  f[kRealisticRays] = static_cast<float>(std::min(obs.rgdd.distance, kGoalDistanceClip) / kGoalDistanceClip);
  f[kRealisticRays + 1] = static_cast<float>(std::sin(obs.rgdd.bearing));
  f[kRealisticRays + 2] = static_cast<float>(std::cos(obs.rgdd.bearing));
  return f;
}

namespace {

constexpr double kSpeedMid = 0.5 * (kMaxSpeed + kMinSpeed);
constexpr double kSpeedHalf = 0.5 * (kMaxSpeed - kMinSpeed);

}  // namespace

NormalizedAction normalize_action(const Action& a) {
  return {(a.speed() - kSpeedMid) / kSpeedHalf, a.yaw_delta() / kMaxYawDelta};
}

Action denormalize_action(const NormalizedAction& a) {
  return Action(kSpeedMid + a.speed * kSpeedHalf, a.yaw * kMaxYawDelta);
}

StudentNet::StudentNet()
    : w1(Eigen::MatrixXd::Zero(kStudentHidden1, kStudentInputs)),
      w2(Eigen::MatrixXd::Zero(kStudentHidden2, kStudentHidden1)),
      w3(Eigen::MatrixXd::Zero(kStudentOutputs, kStudentHidden2)),
      b1(Eigen::VectorXd::Zero(kStudentHidden1)),
      b2(Eigen::VectorXd::Zero(kStudentHidden2)),
      b3(Eigen::VectorXd::Zero(kStudentOutputs)) {}

StudentNet::StudentNet(std::uint64_t seed) : StudentNet() {
  std::mt19937_64 rng(seed);
  const auto fill = [&](Eigen::MatrixXd& w) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = u(rng);
    }
  };
  fill(w1);
  fill(w2);
  fill(w3);
}

StudentNet::Activations StudentNet::forward(const Eigen::MatrixXd& inputs) const {
  Activations a;
  a.z1.noalias() = w1 * inputs;
  a.z1.colwise() += b1;
  a.h1 = a.z1.cwiseMax(0.0);
  a.z2.noalias() = w2 * a.h1;
  a.z2.colwise() += b2;
  a.h2 = a.z2.cwiseMax(0.0);
  a.z3.noalias() = w3 * a.h2;
  a.z3.colwise() += b3;
  a.y = a.z3.array().tanh().matrix();
  return a;
}

NormalizedAction StudentNet::predict(const Features& features) const {
  Eigen::MatrixXd x(kStudentInputs, 1);
  for (int i = 0; i < kStudentInputs; ++i) x(i, 0) = features[static_cast<std::size_t>(i)];
  const Activations a = forward(x);
  return {a.y(0, 0), a.y(1, 0)};
}

double StudentNet::loss(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets) const {
  const Activations a = forward(inputs);
  return (a.y - targets).cwiseAbs().sum() / static_cast<double>(targets.size());
}

double StudentNet::loss_and_gradient(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                                     Gradients& grad) const {
  const Activations a = forward(inputs);
  const Eigen::MatrixXd residual = a.y - targets;
  const double scale = 1.0 / static_cast<double>(targets.size());
  const double value = residual.cwiseAbs().sum() * scale;

  // d|r|/dr is sign(r), 0 at r == 0; tanh' = 1 - y^2.
  const Eigen::MatrixXd dy = residual.unaryExpr([scale](double r) {
    return r > 0.0 ? scale : (r < 0.0 ? -scale : 0.0);
  });
  const Eigen::MatrixXd dz3 = dy.cwiseProduct((1.0 - a.y.array().square()).matrix());
  grad.w3.noalias() = dz3 * a.h2.transpose();
  grad.b3 = dz3.rowwise().sum();

  Eigen::MatrixXd dz2;
  dz2.noalias() = w3.transpose() * dz3;
  dz2 = dz2.cwiseProduct((a.z2.array() > 0.0).cast<double>().matrix());
  grad.w2.noalias() = dz2 * a.h1.transpose();
  grad.b2 = dz2.rowwise().sum();

  Eigen::MatrixXd dz1;
  dz1.noalias() = w2.transpose() * dz2;
  dz1 = dz1.cwiseProduct((a.z1.array() > 0.0).cast<double>().matrix());
  grad.w1.noalias() = dz1 * inputs.transpose();
  grad.b1 = dz1.rowwise().sum();
  return value;
}

namespace {

template <class Fn>
void for_each_block(StudentNet& net, Fn&& fn) {
  fn(net.w1);
  fn(net.b1);
  fn(net.w2);
  fn(net.b2);
  fn(net.w3);
  fn(net.b3);
}

template <class M>
void append_row_major(const M& m, std::vector<double>& out) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  }
}

}  // namespace

std::vector<double> StudentNet::parameters() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  append_row_major(w1, out);
  append_row_major(b1, out);
  append_row_major(w2, out);
  append_row_major(b2, out);
  append_row_major(w3, out);
  append_row_major(b3, out);
  return out;
}

std::vector<double> StudentNet::flatten(const Gradients& g) {
  std::vector<double> out;
  out.reserve(parameter_count());
  append_row_major(g.w1, out);
  append_row_major(g.b1, out);
  append_row_major(g.w2, out);
  append_row_major(g.b2, out);
  append_row_major(g.w3, out);
  append_row_major(g.b3, out);
  return out;
}

void StudentNet::set_parameters(std::span<const double> flat) {
  if (flat.size() != parameter_count()) {
    throw ConfigError("expected " + std::to_string(parameter_count()) + " parameters, got " +
                      std::to_string(flat.size()));
  }
  std::size_t k = 0;
  for_each_block(*this, [&](auto& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = flat[k++];
    }
  });
}

AdamOptimizer::AdamOptimizer(double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

void AdamOptimizer::step(StudentNet& net, const StudentNet::Gradients& g) {
  if (!initialised_) {
    m_ = {Eigen::MatrixXd::Zero(net.w1.rows(), net.w1.cols()),
          Eigen::MatrixXd::Zero(net.w2.rows(), net.w2.cols()),
          Eigen::MatrixXd::Zero(net.w3.rows(), net.w3.cols()),
          Eigen::VectorXd::Zero(net.b1.size()),
          Eigen::VectorXd::Zero(net.b2.size()),
          Eigen::VectorXd::Zero(net.b3.size())};
    v_ = m_;
    initialised_ = true;
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const auto update = [&](auto& param, auto& m, auto& v, const auto& grad) {
    m = beta1_ * m + (1.0 - beta1_) * grad;
    v = beta2_ * v + (1.0 - beta2_) * grad.cwiseProduct(grad);
    param.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + epsilon_);
  };
  update(net.w1, m_.w1, v_.w1, g.w1);
  update(net.b1, m_.b1, v_.b1, g.b1);
  update(net.w2, m_.w2, v_.w2, g.w2);
  update(net.b2, m_.b2, v_.b2, g.b2);
  update(net.w3, m_.w3, v_.w3, g.w3);
  update(net.b3, m_.b3, v_.b3, g.b3);
}

nlohmann::json model_to_json(const StudentNet& net) {
  return {
      {"version", kModelFileVersion},
      {"arch", {kStudentInputs, kStudentHidden1, kStudentHidden2, kStudentOutputs}},
      {"weights", net.parameters()},
      {"norm",
       {{"range_max", kRealisticRange},
        {"goal_clip", kGoalDistanceClip},
        {"speed", {kMinSpeed, kMaxSpeed}},
        {"yaw", {-kMaxYawDelta, kMaxYawDelta}}}},
  };
}

StudentNet model_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("version").get<int>() != kModelFileVersion) {
      throw ConfigError("unsupported model version " + doc.at("version").dump());
    }
    const auto arch = doc.at("arch").get<std::vector<int>>();
    if (arch != std::vector<int>{kStudentInputs, kStudentHidden1, kStudentHidden2, kStudentOutputs}) {
      throw ConfigError("model architecture " + doc.at("arch").dump() + " is not supported");
    }
    const auto weights = doc.at("weights").get<std::vector<double>>();
    StudentNet net;
    net.set_parameters(weights);
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model file: ") + e.what());
  }
}

void save_model(const StudentNet& net, const std::filesystem::path& path) {
  write_text_file(path, model_to_json(net).dump() + "\n");
}

StudentNet load_model(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("model file is not valid JSON: ") + e.what());
  }
  return model_from_json(doc);
}

Action StudentPolicy::act(const PolicyInput& input) {
  if (!input.observation.realistic) {
    throw ContractViolation("student policy needs the realistic observation");
  }
  return denormalize_action(net_.predict(encode_observation(*input.observation.realistic)));
}

}  // namespace sidewalk
