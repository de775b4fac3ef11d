#pragma once

#include <optional>
#include <string>
#include <vector>

namespace passifi {

struct Point2D {
  double x{0.0};
  double y{0.0};

  friend bool operator==(const Point2D& a, const Point2D& b) { return a.x == b.x && a.y == b.y; }
};

/// Euclidean distance between two points, meters.
double distance(const Point2D& a, const Point2D& b);

// Axis-aligned rectangle with corner (x, y) and extent (w, h).
struct Rect {
  double x{0.0};
  double y{0.0};
  double w{0.0};
  double h{0.0};

  bool contains(const Point2D& p) const;
};

// True if the segment ab touches or crosses the rectangle.
bool segment_intersects(const Rect& r, const Point2D& a, const Point2D& b);

struct PhysicalConstants {
  double c{3.0e8};  // propagation speed, m/s
};

/// Signal time of flight between two points, seconds.
double time_of_flight(const Point2D& a, const Point2D& b, const PhysicalConstants& k);

struct Station {
  std::string id;
  Point2D position;
};

// Fixed deployment of one initiating station and n responding stations.
// Responder order is authoritative: it defines feature-vector indexing
// everywhere downstream.
struct StationLayout {
  std::vector<Station> responders;
  Station initiator;
  Rect bounds;

  // Throws DataError on duplicate ids, an empty responder set, or stations
  // outside the bounds.
  void validate() const;

  std::optional<std::size_t> responder_index(const std::string& id) const;
  const Station& responder_at(std::size_t index) const;
};

StationLayout parse_layout(const std::string& json_text);
StationLayout load_layout(const std::string& path);
std::string layout_to_json(const StationLayout& layout);
void save_layout(const std::string& path, const StationLayout& layout);

}  // namespace passifi
