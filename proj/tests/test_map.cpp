#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "sidewalk/errors.hpp"
#include "sidewalk/osm.hpp"
#include "sidewalk/walkable_map.hpp"
#include "support.hpp"

using namespace sidewalk;

namespace {

const char* kFootway = R"(<?xml version="1.0"?>
<osm version="0.6">
  <node id="1" lat="0.0" lon="0.0"/>
  <node id="2" lat="0.0" lon="0.001"/>
  <way id="10">
    <nd ref="1"/>
    <nd ref="2"/>
    <tag k="highway" v="footway"/>
  </way>
</osm>
)";

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("sidewalk_test_" + name);
}

}  // namespace

TEST(Osm, ParsesNodesWaysAndTags) {
  const OsmDocument doc = parse_osm(kFootway);
  EXPECT_EQ(doc.nodes.size(), 2u);
  ASSERT_EQ(doc.ways.size(), 1u);
  const OsmWay& way = doc.ways.at(10);
  EXPECT_EQ(way.node_ids, (std::vector<std::int64_t>{1, 2}));
  EXPECT_EQ(way.tags.at("highway"), "footway");
}

TEST(Osm, MissingNodeIsReferentialIntegrityError) {
  const char* xml = R"(<osm><node id="1" lat="0" lon="0"/>
<way id="5"><nd ref="1"/><nd ref="99"/><tag k="highway" v="footway"/></way></osm>)";
  try {
    parse_osm(xml);
    FAIL() << "expected ReferentialIntegrityError";
  } catch (const ReferentialIntegrityError& e) {
    EXPECT_EQ(e.way_id(), 5);
    EXPECT_EQ(e.node_id(), 99);
  }
}

TEST(Osm, TruncatedXmlReportsLineAndColumn) {
  const char* xml = "<osm>\n  <node id=\"1\" lat=\"0\" lon=\"0\">\n";
  try {
    parse_osm(xml);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_GE(e.line(), 1);
    EXPECT_GE(e.column(), 0);
  }
}

TEST(Osm, RoadsOnlyGiveEmptyNetwork) {
  const char* xml = R"(<osm><node id="1" lat="0" lon="0"/><node id="2" lat="0" lon="0.001"/>
<way id="1"><nd ref="1"/><nd ref="2"/><tag k="highway" v="residential"/></way></osm>)";
  std::mt19937_64 rng(1);
  EXPECT_THROW(extract_sidewalks(parse_osm(xml), {0.0, 0.0}, rng), EmptyNetworkError);
}

TEST(Osm, PedestrianTagAllowlist) {
  EXPECT_TRUE(is_pedestrian_way({{"highway", "footway"}}));
  EXPECT_TRUE(is_pedestrian_way({{"highway", "path"}}));
  EXPECT_TRUE(is_pedestrian_way({{"highway", "pedestrian"}}));
  EXPECT_TRUE(is_pedestrian_way({{"highway", "residential"}, {"sidewalk", "both"}}));
  EXPECT_FALSE(is_pedestrian_way({{"highway", "residential"}, {"sidewalk", "no"}}));
  EXPECT_FALSE(is_pedestrian_way({{"highway", "residential"}, {"sidewalk", "none"}}));
  EXPECT_FALSE(is_pedestrian_way({{"highway", "primary"}}));
}

TEST(Osm, EquatorLongitudeStepMatchesSphericalEarth) {
  std::mt19937_64 rng(3);
  const SidewalkNetwork net = extract_sidewalks(parse_osm(kFootway), {0.0, 0.0}, rng);
  ASSERT_EQ(net.polylines.size(), 1u);
  const auto& v = net.polylines[0].vertices;
  ASSERT_EQ(v.size(), 2u);
  const double length = std::hypot(v[1].x - v[0].x, v[1].y - v[0].y);
  const double expected = oracle::haversine(0.0, 0.0, 0.0, 0.001, 6'371'000.0);
  EXPECT_NEAR(length, expected, 1e-6);
  EXPECT_NEAR(length, 111.195, 0.01);
}

TEST(Osm, ProjectionAgreesWithHaversineAtCityScale) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> off(-0.009, 0.009);  // about 1 km
  const LatLon origin{60.17, 24.94};
  for (int i = 0; i < 200; ++i) {
    const LatLon p{origin.lat + off(rng), origin.lon + off(rng)};
    const Vec2 xy = project(p, origin);
    const double d = oracle::haversine(origin.lat, origin.lon, p.lat, p.lon, kEarthRadius);
    EXPECT_NEAR(std::hypot(xy.x, xy.y), d, 1e-3 * d + 1e-6);
  }
}

TEST(Osm, SampledWidthsStayInRange) {
  std::string xml = "<osm>";
  for (int i = 0; i < 60; ++i) {
    xml += "<node id=\"" + std::to_string(2 * i + 1) + "\" lat=\"0\" lon=\"" + std::to_string(i * 1e-4) + "\"/>";
    xml += "<node id=\"" + std::to_string(2 * i + 2) + "\" lat=\"0.0002\" lon=\"" + std::to_string(i * 1e-4) + "\"/>";
    xml += "<way id=\"" + std::to_string(i + 1) + "\"><nd ref=\"" + std::to_string(2 * i + 1) +
           "\"/><nd ref=\"" + std::to_string(2 * i + 2) + "\"/><tag k=\"highway\" v=\"footway\"/></way>";
  }
  xml += "</osm>";
  std::mt19937_64 rng(11);
  const SidewalkNetwork net = extract_sidewalks(parse_osm(xml), {0.0, 0.003}, rng);
  ASSERT_EQ(net.polylines.size(), 60u);
  for (const auto& p : net.polylines) {
    EXPECT_GE(p.width, kMinSidewalkWidth);
    EXPECT_LE(p.width, kMaxSidewalkWidth);
  }
}

TEST(Osm, OriginOutsideDataIsConfigError) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(extract_sidewalks(parse_osm(kFootway), {10.0, 10.0}, rng), ConfigError);
}

TEST(WalkableMap, StraightBufferAreaByShoelace) {
  const auto polys = buffer_polyline({{0.0, 0.0}, {10.0, 0.0}}, 3.0);
  ASSERT_EQ(polys.size(), 1u);
  EXPECT_NEAR(oracle::shoelace(polys[0]), 30.0, 1e-6);
}

TEST(WalkableMap, RandomStraightSegmentsHaveExactArea) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> coord(-50.0, 50.0);
  std::uniform_real_distribution<double> width(2.0, 5.0);
  for (int i = 0; i < 500; ++i) {
    const Vec2 a{coord(rng), coord(rng)};
    const Vec2 b{coord(rng), coord(rng)};
    const double w = width(rng);
    const double length = std::hypot(b.x - a.x, b.y - a.y);
    if (length < 0.01) continue;
    const auto polys = buffer_polyline({a, b}, w);
    ASSERT_EQ(polys.size(), 1u);
    EXPECT_NEAR(oracle::shoelace(polys[0]), length * w, 1e-6 * length * w);
  }
}

TEST(WalkableMap, HalfWidthBoundary) {
  SidewalkNetwork net;
  net.polylines.push_back({{{0.0, 0.0}, {10.0, 0.0}}, 3.0});
  const WalkableMap map = build_walkable_map(net);
  EXPECT_TRUE(map.walkable({5.0, 1.4}));
  EXPECT_TRUE(map.walkable({5.0, -1.4}));
  EXPECT_FALSE(map.walkable({5.0, 1.6}));
  EXPECT_FALSE(map.walkable({5.0, -1.6}));
}

TEST(WalkableMap, ZeroLengthPolylineIsGeometryError) {
  SidewalkNetwork net;
  net.polylines.push_back({{{1.0, 1.0}, {1.0, 1.0}}, 3.0});
  EXPECT_THROW(build_walkable_map(net), GeometryError);
}

TEST(WalkableMap, IndexMatchesBruteForceOracle) {
  std::mt19937_64 rng(7);
  for (int m = 0; m < 5; ++m) {
    const WalkableMap map = gen::random_map(rng);
    Box box = map.bounds();
    box.min_x -= 2;
    box.min_y -= 2;
    box.max_x += 2;
    box.max_y += 2;
    for (int i = 0; i < 10'000; ++i) {
      const Vec2 p = gen::point_in(box, rng);
      ASSERT_EQ(map.walkable(p), oracle::walkable(map.polygons(), p)) << p.x << "," << p.y;
    }
  }
}

TEST(WalkableMap, IndexMatchesOnCellAndVertexCoordinates) {
  // Points on index cell lines and polygon vertices exercise boundary handling.
  const WalkableMap map = generate_synthetic_map({SyntheticKind::kLShape, 12.0, 3.0}, 1, 1.0);
  for (double x = -3.0; x <= 16.0; x += 0.25) {
    for (double y = -3.0; y <= 16.0; y += 0.25) {
      ASSERT_EQ(map.walkable({x, y}), map.walkable_brute_force({x, y})) << x << "," << y;
    }
  }
}

TEST(WalkableMap, CorridorBounds) {
  const WalkableMap map = generate_synthetic_map({SyntheticKind::kCorridor, 20.0, 3.0}, 0);
  EXPECT_NEAR(map.bounds().width(), 20.0, 1e-9);
  EXPECT_NEAR(map.bounds().height(), 3.0, 1e-9);
  EXPECT_NEAR(map.area(), 60.0, 1e-6);
}

TEST(WalkableMap, GenerationIsDeterministic) {
  for (const auto kind : {SyntheticKind::kCorridor, SyntheticKind::kGrid, SyntheticKind::kLShape}) {
    const std::string a = map_to_text(generate_synthetic_map({kind, 25.0, 3.5}, 42));
    const std::string b = map_to_text(generate_synthetic_map({kind, 25.0, 3.5}, 42));
    EXPECT_EQ(a, b);
  }
}

TEST(WalkableMap, LShapeGeodesicByLatticeBfs) {
  const WalkableMap map = generate_synthetic_map({SyntheticKind::kLShape, 10.0, 3.0}, 0);
  // Arm ends (0,0) and (10,10) sit on the flat caps, so probe one lattice
  // step inside them; the centreline path between the probes is 19.9 m. A
  // 4-connected lattice walk is exactly Manhattan, which for this L equals
  // the centreline.
  const double d = oracle::lattice_bfs(map.bounds(), 0.05, {0.05, 0.0}, {10.0, 9.95},
                                       [&](Vec2 p) { return oracle::walkable(map.polygons(), p); });
  EXPECT_NEAR(d, 19.9, 0.1);
}

TEST(WalkableMap, SaveLoadRoundTrip) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 10; ++i) {
    const WalkableMap map = gen::random_map(rng);
    const auto path = temp_path("roundtrip.json");
    save_map(map, path);
    const WalkableMap loaded = load_map(path);
    EXPECT_TRUE(loaded == map);
    EXPECT_EQ(map_to_text(loaded), map_to_text(map));
  }
}

TEST(WalkableMap, OsmRoundTripKeepsOrigin) {
  std::mt19937_64 rng(1);
  const LatLon origin{0.0, 0.0005};
  const WalkableMap map = build_walkable_map(extract_sidewalks(parse_osm(kFootway), origin, rng), 1.0, origin);
  const WalkableMap loaded = map_from_text(map_to_text(map));
  EXPECT_TRUE(loaded == map);
  EXPECT_EQ(loaded.origin(), origin);
}

TEST(WalkableMap, VersionMismatchIsVersionError) {
  nlohmann::json doc = map_to_json(generate_synthetic_map({}, 0));
  doc["version"] = 0;
  EXPECT_THROW(map_from_json(doc), MapVersionError);
}

TEST(WalkableMap, TwoVertexPolygonIsSchemaError) {
  nlohmann::json doc = map_to_json(generate_synthetic_map({}, 0));
  doc["polygons"][0] = nlohmann::json::array({{0.0, 0.0}, {1.0, 0.0}});
  EXPECT_THROW(map_from_json(doc), MapFormatError);
}

TEST(WalkableMap, MissingFieldIsSchemaError) {
  nlohmann::json doc = map_to_json(generate_synthetic_map({}, 0));
  doc.erase("polygons");
  EXPECT_THROW(map_from_json(doc), MapFormatError);
}

TEST(Geometry, NormalizeAngleRange) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  for (int i = 0; i < 10'000; ++i) {
    const double a = normalize_angle(u(rng));
    EXPECT_GT(a, -std::numbers::pi);
    EXPECT_LE(a, std::numbers::pi);
  }
  EXPECT_EQ(normalize_angle(-std::numbers::pi), std::numbers::pi);
}

TEST(Geometry, RayCircleAndSegment) {
  const auto t = ray_circle({0, 0}, {1, 0}, {3, 0}, 1.0);
  ASSERT_TRUE(t.has_value());
  EXPECT_NEAR(*t, 2.0, 1e-12);
  EXPECT_FALSE(ray_circle({0, 0}, {-1, 0}, {3, 0}, 1.0).has_value());
  const auto s = ray_segment({0, 0}, {1, 0}, {4, -1}, {4, 1});
  ASSERT_TRUE(s.has_value());
  EXPECT_NEAR(*s, 4.0, 1e-12);
}
