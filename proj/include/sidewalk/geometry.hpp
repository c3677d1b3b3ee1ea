#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

namespace sidewalk {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr bool operator==(const Vec2&) const = default;
};

constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }
inline Vec2 rotate(Vec2 v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}
inline Vec2 unit(double angle) { return {std::cos(angle), std::sin(angle)}; }

// Wraps an angle into (-pi, pi].
inline double normalize_angle(double a) {
  constexpr double kPi = std::numbers::pi;
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  if (a > -kPi && a <= kPi) return a;
  a = std::fmod(a, kTwoPi);
  if (a <= -kPi) a += kTwoPi;
  if (a > kPi) a -= kTwoPi;
  return a;
}

struct Box {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  double width() const { return max_x - min_x; }
  double height() const { return max_y - min_y; }
  bool contains(Vec2 p) const {
    return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
  }
  bool operator==(const Box&) const = default;
};

using Polygon = std::vector<Vec2>;

double signed_area(std::span<const Vec2> poly);
inline double area(std::span<const Vec2> poly) { return std::abs(signed_area(poly)); }

Box bounding_box(std::span<const Vec2> points);

// Crossing-number test. Points exactly on an edge may go either way; every
// caller in the library uses this one predicate so results stay consistent.
bool point_in_polygon(Vec2 p, std::span<const Vec2> poly);

// True when no two non-adjacent edges touch and no edge is degenerate.
bool is_simple(std::span<const Vec2> poly);

bool segments_intersect(Vec2 a0, Vec2 a1, Vec2 b0, Vec2 b1);

// Closed segment vs closed box.
bool segment_intersects_box(Vec2 a, Vec2 b, const Box& box);

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b);

// Ray parameter t >= 0 where origin + t*dir meets segment [a, b], if any.
// dir must be unit length for t to be a distance.
std::optional<double> ray_segment(Vec2 origin, Vec2 dir, Vec2 a, Vec2 b);

// Smallest t >= 0 at which the ray enters or sits inside the circle.
std::optional<double> ray_circle(Vec2 origin, Vec2 dir, Vec2 center, double radius);

}  // namespace sidewalk
