#pragma once

#include "thingcrawl/errors.hpp"

namespace thingcrawl {

struct GeoPoint {
  double latitude = 0.0;
  double longitude = 0.0;

  bool operator==(const GeoPoint&) const = default;
  auto operator<=>(const GeoPoint&) const = default;
};

// True iff latitude ∈ [-90, 90] and longitude ∈ [-180, 180]. Total function.
bool validate_point(const GeoPoint& p);

// Axis-aligned box in lat/lon degrees. Antimeridian-crossing boxes are
// rejected at construction.
struct BoundingBox {
  GeoPoint min_corner;
  GeoPoint max_corner;

  BoundingBox() = default;
  BoundingBox(GeoPoint min_c, GeoPoint max_c);

  double lat_span() const { return max_corner.latitude - min_corner.latitude; }
  double lon_span() const { return max_corner.longitude - min_corner.longitude; }

  bool operator==(const BoundingBox&) const = default;
};

// Inclusive componentwise containment.
bool box_contains(const BoundingBox& b, const GeoPoint& p);

}  // namespace thingcrawl
