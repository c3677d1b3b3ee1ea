#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "sidewalk/geometry.hpp"

namespace sidewalk {

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
  bool operator==(const LatLon&) const = default;
};

struct OsmWay {
  std::vector<std::int64_t> node_ids;
  std::map<std::string, std::string> tags;
};

// Nodes and ways of an OSM XML extract. Every node referenced by a way is present.
struct OsmDocument {
  std::map<std::int64_t, LatLon> nodes;
  std::map<std::int64_t, OsmWay> ways;
};

// Parses the node/way/nd/tag subset of OSM XML; other elements are skipped.
// Throws ParseError (with line/column) or ReferentialIntegrityError.
OsmDocument parse_osm(std::string_view xml_text);

struct SidewalkPolyline {
  std::vector<Vec2> vertices;  // local meters
  double width = 0.0;          // meters, in [kMinSidewalkWidth, kMaxSidewalkWidth]
};

struct SidewalkNetwork {
  std::vector<SidewalkPolyline> polylines;
};

inline constexpr double kEarthRadius = 6'371'000.0;
inline constexpr double kMinSidewalkWidth = 2.0;
inline constexpr double kMaxSidewalkWidth = 5.0;

// Equirectangular projection about origin; x east, y north, meters.
Vec2 project(LatLon p, LatLon origin);

// highway in {footway, path, pedestrian}, or a sidewalk key whose value is not no/none.
bool is_pedestrian_way(const std::map<std::string, std::string>& tags);

// Keeps pedestrian ways, projects them, and draws a width for each from
// U[2, 5] m. Consecutive duplicate vertices are merged and ways that collapse
// to a single point are dropped. Throws EmptyNetworkError when nothing survives
// and ConfigError when the origin lies outside the data extent.
SidewalkNetwork extract_sidewalks(const OsmDocument& doc, LatLon origin,
                                  std::mt19937_64& width_rng);

}  // namespace sidewalk
