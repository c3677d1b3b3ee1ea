#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sidewalk/geometry.hpp"
#include "sidewalk/world.hpp"

namespace sidewalk {

// Agent-centred, heading-up occupancy image. Row 0 is the far edge ahead,
// column 0 is the agent's left; the agent sits on pixel (64, 64).
inline constexpr int kBevSize = 128;
inline constexpr int kBevCenter = 64;
inline constexpr double kBevExtent = 18.0;  // meters
inline constexpr double kBevResolution = kBevExtent / kBevSize;  // 0.140625 m per pixel
inline constexpr int kBevChannels = 4;  // current frame + three previous

inline constexpr int kPrivilegedRays = 64;
inline constexpr double kPrivilegedRange = 9.0;
inline constexpr int kRealisticRays = 272;
inline constexpr double kRealisticRange = 6.0;

using BevFrame = std::array<std::uint8_t, kBevSize * kBevSize>;

struct BevImage {
  std::array<BevFrame, kBevChannels> channels{};  // [0] is current

  std::uint8_t at(int channel, int row, int col) const {
    return channels[static_cast<std::size_t>(channel)][static_cast<std::size_t>(row * kBevSize + col)];
  }
  bool operator==(const BevImage&) const = default;
};

struct LidarScan {
  std::vector<double> ranges;  // ray k at heading + 2*pi*k/n, CCW
  double max_range = 0.0;
  bool operator==(const LidarScan&) const = default;
};

struct GoalPolar {
  double distance = 0.0;
  double bearing = 0.0;  // relative to heading, (-pi, pi]
  bool operator==(const GoalPolar&) const = default;
};

struct PrivilegedObservation {
  BevImage bev;
  LidarScan blid;
  GoalPolar gdd;
};

struct RealisticObservation {
  LidarScan rlid;
  GoalPolar rgdd;
};

// Either or both variants, each complete when present.
struct Observation {
  std::optional<PrivilegedObservation> privileged;
  std::optional<RealisticObservation> realistic;
};

// World coordinates of a BEV pixel centre.
Vec2 bev_pixel_center(const AgentState& agent, int row, int col);

// Pixel is 1 when its centre is walkable and outside every obstacle.
BevFrame render_bev_frame(const WorldState& world);

// New image with the current frame in channel 0 and the previous image's
// channels 0..2 shifted into 1..3. Without history every channel is the
// current frame.
BevImage render_bev(const WorldState& world, const BevImage* previous);

// Ranges to the first obstacle surface or walkable-area exit, clamped to
// max_range. A ray starting off the walkable area or inside an obstacle reads 0.
LidarScan raycast(const WorldState& world, int n_rays, double max_range);

struct GpsNoise {
  double sigma_pos = 0.5;  // meters, isotropic
  int latency_steps = 3;
};

GoalPolar compute_gdd(const AgentState& agent, Vec2 goal);

// Position history is newest-first; entry latency_steps (clamped to the oldest
// entry) is used, perturbed by N(0, sigma_pos^2) per axis.
GoalPolar compute_noisy_gdd(const AgentState& agent, const std::deque<Vec2>& position_history,
                            Vec2 goal, const GpsNoise& noise, std::mt19937_64& rng);

// Writes one channel as a binary PGM (P5, 0/255).
std::string bev_to_pgm(const BevFrame& frame);

}  // namespace sidewalk
