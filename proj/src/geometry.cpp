#include "passifi/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "passifi/errors.hpp"

namespace passifi {

double distance(const Point2D& a, const Point2D& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

bool Rect::contains(const Point2D& p) const {
  return p.x >= x && p.x <= x + w && p.y >= y && p.y <= y + h;
}

// Liang-Barsky clip of the segment against the rectangle's slabs.
bool segment_intersects(const Rect& r, const Point2D& a, const Point2D& b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  double t0 = 0.0, t1 = 1.0;

  const auto clip = [&](double p, double q) {
    if (p == 0.0) return q >= 0.0;  // parallel: inside the slab or not at all
    const double t = q / p;
    if (p < 0.0) {
      if (t > t1) return false;
      if (t > t0) t0 = t;
    } else {
      if (t < t0) return false;
      if (t < t1) t1 = t;
    }
    return true;
  };

  return clip(-dx, a.x - r.x) && clip(dx, r.x + r.w - a.x) &&
         clip(-dy, a.y - r.y) && clip(dy, r.y + r.h - a.y);
}

double time_of_flight(const Point2D& a, const Point2D& b, const PhysicalConstants& k) {
  return distance(a, b) / k.c;
}

void StationLayout::validate() const {
  if (responders.empty()) throw DataError("layout needs at least one responder");
  std::set<std::string> ids;
  for (const auto& s : responders) {
    if (!ids.insert(s.id).second) throw DataError("duplicate station id: " + s.id);
    if (!bounds.contains(s.position)) throw DataError("responder outside bounds: " + s.id);
  }
  if (!ids.insert(initiator.id).second) throw DataError("duplicate station id: " + initiator.id);
  if (!bounds.contains(initiator.position))
    throw DataError("initiator outside bounds: " + initiator.id);
}

std::optional<std::size_t> StationLayout::responder_index(const std::string& id) const {
  for (std::size_t i = 0; i < responders.size(); ++i)
    if (responders[i].id == id) return i;
  return std::nullopt;
}

const Station& StationLayout::responder_at(std::size_t index) const {
  if (index >= responders.size()) throw DataError("responder index out of range");
  return responders[index];
}

namespace {

Station station_from_json(const nlohmann::json& j) {
  return Station{j.at("id").get<std::string>(),
                 {j.at("x").get<double>(), j.at("y").get<double>()}};
}

}  // namespace

StationLayout parse_layout(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("layout parse error: ") + e.what());
  }
  StationLayout layout;
  try {
    layout.bounds = Rect{0.0, 0.0, j.at("bounds").at("w").get<double>(),
                         j.at("bounds").at("h").get<double>()};
    layout.initiator = station_from_json(j.at("initiator"));
    for (const auto& r : j.at("responders")) layout.responders.push_back(station_from_json(r));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("layout field error: ") + e.what());
  }
  layout.validate();
  return layout;
}

StationLayout load_layout(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open layout file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_layout(buf.str());
}

std::string layout_to_json(const StationLayout& layout) {
  nlohmann::json j;
  j["bounds"] = {{"w", layout.bounds.w}, {"h", layout.bounds.h}};
  j["initiator"] = {{"id", layout.initiator.id},
                    {"x", layout.initiator.position.x},
                    {"y", layout.initiator.position.y}};
  auto rs = nlohmann::json::array();
  for (const auto& r : layout.responders)
    rs.push_back({{"id", r.id}, {"x", r.position.x}, {"y", r.position.y}});
  j["responders"] = rs;
  return j.dump(2) + "\n";
}

void save_layout(const std::string& path, const StationLayout& layout) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write layout file: " + path);
  out << layout_to_json(layout);
}

}  // namespace passifi
