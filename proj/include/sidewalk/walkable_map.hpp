#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sidewalk/geometry.hpp"
#include "sidewalk/osm.hpp"

namespace sidewalk {

inline constexpr double kDefaultCellSize = 1.0;
inline constexpr int kMapFileVersion = 1;

// Immutable set of simple polygons whose union is the walkable area, plus a
// uniform grid index. Overlapping polygons are allowed; a point is walkable
// when it lies in any of them. Safe to share between threads once built.
class WalkableMap {
 public:
  WalkableMap() = default;

  // Validates every polygon (>= 3 vertices, simple) and builds the index.
  // With quantize set, coordinates are snapped to the 1e-6 m grid used by the
  // map file so that save/load is an exact round trip.
  static WalkableMap from_polygons(std::vector<Polygon> polygons, double cell_size,
                                   LatLon origin = {}, bool quantize = false);

  const std::vector<Polygon>& polygons() const { return polygons_; }
  const Box& bounds() const { return bounds_; }
  double cell_size() const { return cell_size_; }
  LatLon origin() const { return origin_; }
  bool empty() const { return polygons_.empty(); }

  // Union area, exact for cells fully inside a polygon and sub-sampled on a
  // 16x16 lattice in cells that a polygon boundary crosses.
  double area() const { return area_; }

  bool walkable(Vec2 p) const;
  bool walkable_brute_force(Vec2 p) const;

  // Ids of polygons whose index cells overlap the box, sorted and unique.
  void polygons_near(const Box& box, std::vector<std::uint32_t>& out) const;

  bool operator==(const WalkableMap& other) const {
    return polygons_ == other.polygons_ && bounds_ == other.bounds_ &&
           cell_size_ == other.cell_size_ && origin_ == other.origin_;
  }

 private:
  enum class CellState : std::uint8_t { kEmpty, kFull, kMixed };

  void build_index();
  bool cell_of(Vec2 p, std::size_t& index) const;

  std::vector<Polygon> polygons_;
  Box bounds_{};
  double cell_size_ = kDefaultCellSize;
  LatLon origin_{};
  double area_ = 0.0;

  std::size_t nx_ = 0;
  std::size_t ny_ = 0;
  std::vector<CellState> cell_state_;
  // CSR: polygons overlapping each cell; for kMixed cells only boundary-crossing
  // polygons matter for point queries, and those are listed first.
  std::vector<std::uint32_t> cell_offsets_;
  std::vector<std::uint32_t> cell_polys_;
};

// Buffers one polyline: a flat-capped rectangle per segment plus a clamped
// miter wedge (miter length at most 2x half-width) on the outside of each
// joint. Vertices closer than 1 mm are merged first. Throws GeometryError for a
// zero-length polyline.
std::vector<Polygon> buffer_polyline(const std::vector<Vec2>& vertices, double width);

WalkableMap build_walkable_map(const SidewalkNetwork& net, double cell_size = kDefaultCellSize,
                               LatLon origin = {});

enum class SyntheticKind { kCorridor, kGrid, kLShape };

struct SyntheticMapSpec {
  SyntheticKind kind = SyntheticKind::kCorridor;
  double length = 20.0;
  double width = 3.0;
};

SyntheticKind parse_synthetic_kind(std::string_view name);
std::string_view to_string(SyntheticKind kind);

// corridor: straight (0,0)-(L,0). L-shape: (0,0)-(L,0)-(L,L). grid: three
// horizontal and three vertical sidewalks spanning [0,L]; the seed jitters the
// middle lines by up to 10% of L.
WalkableMap generate_synthetic_map(const SyntheticMapSpec& spec, std::uint64_t seed,
                                   double cell_size = kDefaultCellSize);

// Map cache file: {version:1, origin:[lat,lon], cell_size, polygons, bounds},
// numbers written with six decimals.
std::string map_to_text(const WalkableMap& map);
WalkableMap map_from_text(std::string_view text);
nlohmann::json map_to_json(const WalkableMap& map);
WalkableMap map_from_json(const nlohmann::json& doc);

void save_map(const WalkableMap& map, const std::filesystem::path& path);
WalkableMap load_map(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace sidewalk
