#include "sidewalk/walkable_map.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "sidewalk/errors.hpp"

namespace sidewalk {
namespace {

constexpr double kQuantum = 1e-6;
constexpr double kMergeDistance = 1e-3;
constexpr double kMinJoinAngle = 1e-4;
constexpr int kAreaSubsamples = 16;

double quantize(double v) {
  const double q = std::round(v / kQuantum) * kQuantum;
  return q == 0.0 ? 0.0 : q;  // no negative zero in files
}

}  // namespace

WalkableMap WalkableMap::from_polygons(std::vector<Polygon> polygons, double cell_size,
                                       LatLon origin, bool quantize_coords) {
  if (!(cell_size > 0.0) || !std::isfinite(cell_size)) {
    throw ConfigError("index cell size must be positive");
  }
  if (polygons.empty()) throw GeometryError("walkable map needs at least one polygon");
  for (auto& poly : polygons) {
    if (quantize_coords) {
      for (Vec2& v : poly) v = {quantize(v.x), quantize(v.y)};
    }
    for (const Vec2& v : poly) {
      if (!std::isfinite(v.x) || !std::isfinite(v.y)) {
        throw GeometryError("polygon vertex is not finite");
      }
    }
    if (poly.size() < 3) throw GeometryError("polygon needs at least 3 vertices");
    if (!is_simple(poly)) throw GeometryError("polygon is not simple");
  }

  WalkableMap map;
  map.polygons_ = std::move(polygons);
  map.cell_size_ = cell_size;
  map.origin_ = origin;
  Box bounds = bounding_box(map.polygons_.front());
  for (const auto& poly : map.polygons_) {
    const Box b = bounding_box(poly);
    bounds.min_x = std::min(bounds.min_x, b.min_x);
    bounds.min_y = std::min(bounds.min_y, b.min_y);
    bounds.max_x = std::max(bounds.max_x, b.max_x);
    bounds.max_y = std::max(bounds.max_y, b.max_y);
  }
  map.bounds_ = bounds;
  map.build_index();
  return map;
}

void WalkableMap::build_index() {
  nx_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(bounds_.width() / cell_size_)));
  ny_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(bounds_.height() / cell_size_)));
  const std::size_t n_cells = nx_ * ny_;
  cell_state_.assign(n_cells, CellState::kEmpty);

  // (cell, polygon, crosses-boundary) triples, bucketed afterwards.
  std::vector<std::vector<std::uint32_t>> boundary(n_cells);
  std::vector<std::vector<std::uint32_t>> containing(n_cells);

  for (std::uint32_t pid = 0; pid < polygons_.size(); ++pid) {
    const Polygon& poly = polygons_[pid];
    const Box pb = bounding_box(poly);
    const auto clamp_x = [&](double x) {
      const double c = std::floor((x - bounds_.min_x) / cell_size_);
      return static_cast<std::size_t>(std::clamp(c, 0.0, static_cast<double>(nx_ - 1)));
    };
    const auto clamp_y = [&](double y) {
      const double c = std::floor((y - bounds_.min_y) / cell_size_);
      return static_cast<std::size_t>(std::clamp(c, 0.0, static_cast<double>(ny_ - 1)));
    };
    const std::size_t ix0 = clamp_x(pb.min_x);
    const std::size_t ix1 = clamp_x(pb.max_x);
    const std::size_t iy0 = clamp_y(pb.min_y);
    const std::size_t iy1 = clamp_y(pb.max_y);
    for (std::size_t iy = iy0; iy <= iy1; ++iy) {
      for (std::size_t ix = ix0; ix <= ix1; ++ix) {
        const Box cell{bounds_.min_x + static_cast<double>(ix) * cell_size_,
                       bounds_.min_y + static_cast<double>(iy) * cell_size_,
                       bounds_.min_x + static_cast<double>(ix + 1) * cell_size_,
                       bounds_.min_y + static_cast<double>(iy + 1) * cell_size_};
        bool crosses = false;
        for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
          if (segment_intersects_box(poly[j], poly[i], cell)) {
            crosses = true;
            break;
          }
        }
        const std::size_t idx = iy * nx_ + ix;
        if (crosses) {
          boundary[idx].push_back(pid);
        } else if (point_in_polygon({0.5 * (cell.min_x + cell.max_x), 0.5 * (cell.min_y + cell.max_y)},
                                    poly)) {
          containing[idx].push_back(pid);
        }
      }
    }
  }

  cell_offsets_.assign(n_cells + 1, 0);
  cell_polys_.clear();
  for (std::size_t idx = 0; idx < n_cells; ++idx) {
    if (!containing[idx].empty()) {
      cell_state_[idx] = CellState::kFull;
    } else if (!boundary[idx].empty()) {
      cell_state_[idx] = CellState::kMixed;
    }
    cell_polys_.insert(cell_polys_.end(), boundary[idx].begin(), boundary[idx].end());
    cell_polys_.insert(cell_polys_.end(), containing[idx].begin(), containing[idx].end());
    cell_offsets_[idx + 1] = static_cast<std::uint32_t>(cell_polys_.size());
  }

  double total = 0.0;
  const double cell_area = cell_size_ * cell_size_;
  for (std::size_t iy = 0; iy < ny_; ++iy) {
    for (std::size_t ix = 0; ix < nx_; ++ix) {
      const std::size_t idx = iy * nx_ + ix;
      if (cell_state_[idx] == CellState::kFull) {
        total += cell_area;
      } else if (cell_state_[idx] == CellState::kMixed) {
        int hits = 0;
        for (int sy = 0; sy < kAreaSubsamples; ++sy) {
          for (int sx = 0; sx < kAreaSubsamples; ++sx) {
            const Vec2 p{bounds_.min_x + (static_cast<double>(ix) + (sx + 0.5) / kAreaSubsamples) * cell_size_,
                         bounds_.min_y + (static_cast<double>(iy) + (sy + 0.5) / kAreaSubsamples) * cell_size_};
            if (walkable(p)) ++hits;
          }
        }
        total += cell_area * hits / (kAreaSubsamples * kAreaSubsamples);
      }
    }
  }
  area_ = total;
}

bool WalkableMap::cell_of(Vec2 p, std::size_t& index) const {
  if (!(p.x >= bounds_.min_x && p.x <= bounds_.max_x && p.y >= bounds_.min_y &&
        p.y <= bounds_.max_y)) {
    return false;
  }
  auto ix = static_cast<std::size_t>((p.x - bounds_.min_x) / cell_size_);
  auto iy = static_cast<std::size_t>((p.y - bounds_.min_y) / cell_size_);
  ix = std::min(ix, nx_ - 1);
  iy = std::min(iy, ny_ - 1);
  index = iy * nx_ + ix;
  return true;
}

bool WalkableMap::walkable(Vec2 p) const {
  std::size_t idx = 0;
  if (!cell_of(p, idx)) return false;
  switch (cell_state_[idx]) {
    case CellState::kEmpty:
      return false;
    case CellState::kFull:
      return true;
    case CellState::kMixed:
      break;
  }
  for (std::uint32_t k = cell_offsets_[idx]; k < cell_offsets_[idx + 1]; ++k) {
    if (point_in_polygon(p, polygons_[cell_polys_[k]])) return true;
  }
  return false;
}

bool WalkableMap::walkable_brute_force(Vec2 p) const {
  return std::any_of(polygons_.begin(), polygons_.end(),
                     [&](const Polygon& poly) { return point_in_polygon(p, poly); });
}

void WalkableMap::polygons_near(const Box& box, std::vector<std::uint32_t>& out) const {
  out.clear();
  if (box.max_x < bounds_.min_x || box.min_x > bounds_.max_x || box.max_y < bounds_.min_y ||
      box.min_y > bounds_.max_y) {
    return;
  }
  const auto to_ix = [&](double x) {
    const double c = std::floor((x - bounds_.min_x) / cell_size_);
    return static_cast<std::size_t>(std::clamp(c, 0.0, static_cast<double>(nx_ - 1)));
  };
  const auto to_iy = [&](double y) {
    const double c = std::floor((y - bounds_.min_y) / cell_size_);
    return static_cast<std::size_t>(std::clamp(c, 0.0, static_cast<double>(ny_ - 1)));
  };
  const std::size_t ix0 = to_ix(box.min_x);
  const std::size_t ix1 = to_ix(box.max_x);
  const std::size_t iy0 = to_iy(box.min_y);
  const std::size_t iy1 = to_iy(box.max_y);
  for (std::size_t iy = iy0; iy <= iy1; ++iy) {
    for (std::size_t ix = ix0; ix <= ix1; ++ix) {
      const std::size_t idx = iy * nx_ + ix;
      out.insert(out.end(), cell_polys_.begin() + cell_offsets_[idx],
                 cell_polys_.begin() + cell_offsets_[idx + 1]);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
}

std::vector<Polygon> buffer_polyline(const std::vector<Vec2>& vertices, double width) {
  if (!(width > 0.0)) throw GeometryError("buffer width must be positive");
  std::vector<Vec2> pts;
  for (const Vec2& v : vertices) {
    if (pts.empty() || distance(pts.back(), v) >= kMergeDistance) pts.push_back(v);
  }
  if (pts.size() < 2) throw GeometryError("degenerate polyline: zero length");

  const double hw = 0.5 * width;
  std::vector<Polygon> out;
  std::vector<Vec2> dirs;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const Vec2 a = pts[i];
    const Vec2 b = pts[i + 1];
    const Vec2 d = (b - a) * (1.0 / distance(a, b));
    const Vec2 n{-d.y, d.x};
    out.push_back({a - n * hw, b - n * hw, b + n * hw, a + n * hw});
    dirs.push_back(d);
  }
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    const Vec2 d1 = dirs[i - 1];
    const Vec2 d2 = dirs[i];
    const double turn = std::atan2(cross(d1, d2), dot(d1, d2));
    if (std::abs(turn) < kMinJoinAngle || std::abs(turn) > std::numbers::pi - kMinJoinAngle) {
      continue;
    }
    // Outer side is right of a left turn and left of a right turn.
    const double side = turn > 0.0 ? -1.0 : 1.0;
    const Vec2 o1 = Vec2{-d1.y, d1.x} * side;
    const Vec2 o2 = Vec2{-d2.y, d2.x} * side;
    const Vec2 bis = (o1 + o2) * (1.0 / norm(o1 + o2));
    const double miter = std::min(hw / dot(bis, o1), 2.0 * hw);
    const Vec2 p = pts[i];
    out.push_back({p, p + o1 * hw, p + bis * miter, p + o2 * hw});
  }
  return out;
}

WalkableMap build_walkable_map(const SidewalkNetwork& net, double cell_size, LatLon origin) {
  if (net.polylines.empty()) throw EmptyNetworkError("sidewalk network is empty");
  if (!(cell_size > 0.0)) throw ConfigError("index cell size must be positive");
  std::vector<Polygon> polys;
  for (const auto& line : net.polylines) {
    auto parts = buffer_polyline(line.vertices, line.width);
    polys.insert(polys.end(), std::make_move_iterator(parts.begin()),
                 std::make_move_iterator(parts.end()));
  }
  return WalkableMap::from_polygons(std::move(polys), cell_size, origin, true);
}

SyntheticKind parse_synthetic_kind(std::string_view name) {
  if (name == "corridor") return SyntheticKind::kCorridor;
  if (name == "grid") return SyntheticKind::kGrid;
  if (name == "L-shape" || name == "l-shape" || name == "lshape") return SyntheticKind::kLShape;
  throw ConfigError("unknown map kind '" + std::string(name) + "'");
}

std::string_view to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::kCorridor:
      return "corridor";
    case SyntheticKind::kGrid:
      return "grid";
    case SyntheticKind::kLShape:
      return "L-shape";
  }
  return "corridor";
}

WalkableMap generate_synthetic_map(const SyntheticMapSpec& spec, std::uint64_t seed,
                                   double cell_size) {
  if (!(spec.length > 0.0) || !(spec.width > 0.0)) {
    throw ConfigError("synthetic map length and width must be positive");
  }
  const double L = spec.length;
  SidewalkNetwork net;
  switch (spec.kind) {
    case SyntheticKind::kCorridor:
      net.polylines.push_back({{{0.0, 0.0}, {L, 0.0}}, spec.width});
      break;
    case SyntheticKind::kLShape:
      net.polylines.push_back({{{0.0, 0.0}, {L, 0.0}, {L, L}}, spec.width});
      break;
    case SyntheticKind::kGrid: {
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> jitter(-0.1 * L, 0.1 * L);
      const double mid_h = 0.5 * L + jitter(rng);
      const double mid_v = 0.5 * L + jitter(rng);
      const double hw = 0.5 * spec.width;
      for (double y : {0.0, mid_h, L}) {
        net.polylines.push_back({{{-hw, y}, {L + hw, y}}, spec.width});
      }
      for (double x : {0.0, mid_v, L}) {
        net.polylines.push_back({{{x, -hw}, {x, L + hw}}, spec.width});
      }
      break;
    }
  }
  return build_walkable_map(net, cell_size);
}

namespace {

void append_number(std::string& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", quantize(v));
  out += buf;
}

}  // namespace

std::string map_to_text(const WalkableMap& map) {
  std::string out;
  out += "{\"version\":";
  out += std::to_string(kMapFileVersion);
  out += ",\"origin\":[";
  append_number(out, map.origin().lat);
  out += ',';
  append_number(out, map.origin().lon);
  out += "],\"cell_size\":";
  append_number(out, map.cell_size());
  out += ",\"polygons\":[";
  for (std::size_t i = 0; i < map.polygons().size(); ++i) {
    if (i > 0) out += ',';
    out += '[';
    const auto& poly = map.polygons()[i];
    for (std::size_t k = 0; k < poly.size(); ++k) {
      if (k > 0) out += ',';
      out += '[';
      append_number(out, poly[k].x);
      out += ',';
      append_number(out, poly[k].y);
      out += ']';
    }
    out += ']';
  }
  out += "],\"bounds\":[";
  const Box& b = map.bounds();
  append_number(out, b.min_x);
  out += ',';
  append_number(out, b.min_y);
  out += ',';
  append_number(out, b.max_x);
  out += ',';
  append_number(out, b.max_y);
  out += "]}\n";
  return out;
}

nlohmann::json map_to_json(const WalkableMap& map) {
  return nlohmann::json::parse(map_to_text(map));
}

WalkableMap map_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw MapFormatError("map document must be a JSON object");
  if (!doc.contains("version") || !doc["version"].is_number_integer()) {
    throw MapFormatError("map document lacks an integer version");
  }
  if (doc["version"].get<int>() != kMapFileVersion) {
    throw MapVersionError("unsupported map version " + std::to_string(doc["version"].get<int>()) +
                          " (expected " + std::to_string(kMapFileVersion) + ")");
  }
  try {
    const auto& origin = doc.at("origin");
    if (!origin.is_array() || origin.size() != 2) throw MapFormatError("origin must be [lat, lon]");
    const double cell_size = doc.at("cell_size").get<double>();
    const auto& polys = doc.at("polygons");
    if (!polys.is_array()) throw MapFormatError("polygons must be an array");
    std::vector<Polygon> polygons;
    polygons.reserve(polys.size());
    for (const auto& p : polys) {
      if (!p.is_array() || p.size() < 3) {
        throw MapFormatError("polygon needs at least 3 vertices");
      }
      Polygon poly;
      for (const auto& v : p) {
        if (!v.is_array() || v.size() != 2) throw MapFormatError("vertex must be [x, y]");
        poly.push_back({v[0].get<double>(), v[1].get<double>()});
      }
      polygons.push_back(std::move(poly));
    }
    const auto& bounds = doc.at("bounds");
    if (!bounds.is_array() || bounds.size() != 4) {
      throw MapFormatError("bounds must be [minx, miny, maxx, maxy]");
    }
    WalkableMap map = WalkableMap::from_polygons(
        std::move(polygons), cell_size, LatLon{origin[0].get<double>(), origin[1].get<double>()},
        true);
    const Box stored{bounds[0].get<double>(), bounds[1].get<double>(), bounds[2].get<double>(),
                     bounds[3].get<double>()};
    const Box& actual = map.bounds();
    const double tol = 1e-6;
    if (std::abs(stored.min_x - actual.min_x) > tol || std::abs(stored.min_y - actual.min_y) > tol ||
        std::abs(stored.max_x - actual.max_x) > tol || std::abs(stored.max_y - actual.max_y) > tol) {
      throw MapFormatError("bounds disagree with polygons");
    }
    return map;
  } catch (const nlohmann::json::exception& e) {
    throw MapFormatError(std::string("map schema violation: ") + e.what());
  } catch (const GeometryError& e) {
    throw MapFormatError(std::string("map schema violation: ") + e.what());
  }
}

WalkableMap map_from_text(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw MapFormatError(std::string("map file is not valid JSON: ") + e.what());
  }
  return map_from_json(doc);
}

void save_map(const WalkableMap& map, const std::filesystem::path& path) {
  write_text_file(path, map_to_text(map));
}

WalkableMap load_map(const std::filesystem::path& path) { return map_from_text(read_text_file(path)); }

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw ConfigError("failed writing " + path.string());
}

}  // namespace sidewalk
