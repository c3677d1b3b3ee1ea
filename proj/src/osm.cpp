#include "sidewalk/osm.hpp"

#include <expat.h>

#include <charconv>
#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>

#include "sidewalk/errors.hpp"

namespace sidewalk {
namespace {

struct ParserDeleter {
  void operator()(XML_Parser p) const { XML_ParserFree(p); }
};

struct ParseState {
  XML_Parser parser = nullptr;
  OsmDocument doc;
  std::optional<std::int64_t> current_way;
  int depth_in_way = 0;
  std::string error;
  std::size_t error_line = 0;
  std::size_t error_column = 0;
};

const char* find_attr(const XML_Char** attrs, const char* name) {
  for (int i = 0; attrs[i] != nullptr; i += 2) {
    if (std::strcmp(attrs[i], name) == 0) return attrs[i + 1];
  }
  return nullptr;
}

void fail(ParseState& st, std::string message) {
  if (!st.error.empty()) return;
  st.error = std::move(message);
  st.error_line = XML_GetCurrentLineNumber(st.parser);
  st.error_column = XML_GetCurrentColumnNumber(st.parser) + 1;
  XML_StopParser(st.parser, XML_FALSE);
}

std::optional<std::int64_t> parse_id(const char* text) {
  if (text == nullptr) return std::nullopt;
  std::int64_t value = 0;
  const char* end = text + std::strlen(text);
  auto [ptr, ec] = std::from_chars(text, end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

std::optional<double> parse_coord(const char* text) {
  if (text == nullptr) return std::nullopt;
  char* end = nullptr;
  const double value = std::strtod(text, &end);
  if (end == text || *end != '\0' || !std::isfinite(value)) return std::nullopt;
  return value;
}

void XMLCALL on_start(void* user, const XML_Char* name, const XML_Char** attrs) {
  auto& st = *static_cast<ParseState*>(user);
  if (st.current_way) ++st.depth_in_way;

  if (std::strcmp(name, "node") == 0) {
    const auto id = parse_id(find_attr(attrs, "id"));
    const auto lat = parse_coord(find_attr(attrs, "lat"));
    const auto lon = parse_coord(find_attr(attrs, "lon"));
    if (!id || !lat || !lon) {
      fail(st, "node element needs integer id and finite lat/lon");
      return;
    }
    st.doc.nodes[*id] = LatLon{*lat, *lon};
  } else if (std::strcmp(name, "way") == 0) {
    const auto id = parse_id(find_attr(attrs, "id"));
    if (!id) {
      fail(st, "way element needs an integer id");
      return;
    }
    st.doc.ways[*id] = OsmWay{};
    st.current_way = *id;
    st.depth_in_way = 0;
  } else if (std::strcmp(name, "nd") == 0 && st.current_way && st.depth_in_way == 1) {
    const auto ref = parse_id(find_attr(attrs, "ref"));
    if (!ref) {
      fail(st, "nd element needs an integer ref");
      return;
    }
    st.doc.ways[*st.current_way].node_ids.push_back(*ref);
  } else if (std::strcmp(name, "tag") == 0 && st.current_way && st.depth_in_way == 1) {
    const char* k = find_attr(attrs, "k");
    const char* v = find_attr(attrs, "v");
    if (k == nullptr || v == nullptr) {
      fail(st, "tag element needs k and v");
      return;
    }
    st.doc.ways[*st.current_way].tags[k] = v;
  }
}

void XMLCALL on_end(void* user, const XML_Char* name) {
  auto& st = *static_cast<ParseState*>(user);
  if (!st.current_way) return;
  if (st.depth_in_way == 0 && std::strcmp(name, "way") == 0) {
    st.current_way.reset();
  } else {
    --st.depth_in_way;
  }
}

}  // namespace

OsmDocument parse_osm(std::string_view xml_text) {
  std::unique_ptr<XML_ParserStruct, ParserDeleter> parser(XML_ParserCreate(nullptr));
  if (!parser) throw Error("failed to allocate XML parser");

  ParseState st;
  st.parser = parser.get();
  XML_SetUserData(parser.get(), &st);
  XML_SetElementHandler(parser.get(), on_start, on_end);

  if (xml_text.size() > static_cast<std::size_t>(std::numeric_limits<int>::max())) {
    throw ConfigError("OSM document too large");
  }
  const auto status = XML_Parse(parser.get(), xml_text.data(), static_cast<int>(xml_text.size()),
                                XML_TRUE);
  if (!st.error.empty()) throw ParseError(st.error, st.error_line, st.error_column);
  if (status != XML_STATUS_OK) {
    throw ParseError(XML_ErrorString(XML_GetErrorCode(parser.get())),
                     XML_GetCurrentLineNumber(parser.get()),
                     XML_GetCurrentColumnNumber(parser.get()) + 1);
  }

  for (const auto& [way_id, way] : st.doc.ways) {
    for (const std::int64_t ref : way.node_ids) {
      if (!st.doc.nodes.contains(ref)) throw ReferentialIntegrityError(way_id, ref);
    }
  }
  return std::move(st.doc);
}

Vec2 project(LatLon p, LatLon origin) {
  constexpr double kDeg = std::numbers::pi / 180.0;
  const double x = kEarthRadius * (p.lon - origin.lon) * kDeg * std::cos(origin.lat * kDeg);
  const double y = kEarthRadius * (p.lat - origin.lat) * kDeg;
  return {x, y};
}

bool is_pedestrian_way(const std::map<std::string, std::string>& tags) {
  if (auto it = tags.find("highway"); it != tags.end()) {
    if (it->second == "footway" || it->second == "path" || it->second == "pedestrian") {
      return true;
    }
  }
  if (auto it = tags.find("sidewalk"); it != tags.end()) {
    return it->second != "no" && it->second != "none";
  }
  return false;
}

SidewalkNetwork extract_sidewalks(const OsmDocument& doc, LatLon origin,
                                  std::mt19937_64& width_rng) {
  if (!doc.nodes.empty()) {
    double min_lat = std::numeric_limits<double>::infinity();
    double max_lat = -min_lat;
    double min_lon = min_lat;
    double max_lon = -min_lat;
    for (const auto& [id, ll] : doc.nodes) {
      min_lat = std::min(min_lat, ll.lat);
      max_lat = std::max(max_lat, ll.lat);
      min_lon = std::min(min_lon, ll.lon);
      max_lon = std::max(max_lon, ll.lon);
    }
    if (origin.lat < min_lat || origin.lat > max_lat || origin.lon < min_lon ||
        origin.lon > max_lon) {
      throw ConfigError("projection origin lies outside the data extent");
    }
  }

  std::uniform_real_distribution<double> width_dist(kMinSidewalkWidth, kMaxSidewalkWidth);
  SidewalkNetwork net;
  for (const auto& [way_id, way] : doc.ways) {
    if (!is_pedestrian_way(way.tags)) continue;
    SidewalkPolyline line;
    for (const std::int64_t ref : way.node_ids) {
      const auto it = doc.nodes.find(ref);
      if (it == doc.nodes.end()) throw ReferentialIntegrityError(way_id, ref);
      const Vec2 p = project(it->second, origin);
      if (line.vertices.empty() || !(line.vertices.back() == p)) line.vertices.push_back(p);
    }
    if (line.vertices.size() < 2) continue;
    line.width = width_dist(width_rng);
    net.polylines.push_back(std::move(line));
  }
  if (net.polylines.empty()) throw EmptyNetworkError("no pedestrian ways in OSM document");
  return net;
}

}  // namespace sidewalk
