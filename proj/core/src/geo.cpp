#include "thingcrawl/geo.hpp"

namespace thingcrawl {

bool validate_point(const GeoPoint& p) {
  return p.latitude >= -90.0 && p.latitude <= 90.0 &&
         p.longitude >= -180.0 && p.longitude <= 180.0;
}

BoundingBox::BoundingBox(GeoPoint min_c, GeoPoint max_c)
    : min_corner(min_c), max_corner(max_c) {
  if (!validate_point(min_corner) || !validate_point(max_corner))
    throw InvalidRegion("bounding box corner out of coordinate range");
  if (min_corner.latitude > max_corner.latitude ||
      min_corner.longitude > max_corner.longitude)
    throw InvalidRegion("bounding box corners inverted (antimeridian wrap not supported)");
}

bool box_contains(const BoundingBox& b, const GeoPoint& p) {
  return p.latitude >= b.min_corner.latitude &&
         p.latitude <= b.max_corner.latitude &&
         p.longitude >= b.min_corner.longitude &&
         p.longitude <= b.max_corner.longitude;
}

}  // namespace thingcrawl
