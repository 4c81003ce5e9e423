#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "thingcrawl/geo.hpp"
#include "thingcrawl/record.hpp"

namespace thingcrawl {

// Per-cell record counts over a grid at one timestamp.
struct DensityMatrix {
  BoundingBox region;
  int rows = 0;
  int cols = 0;
  std::vector<std::int64_t> counts;  // row-major, rows*cols entries
  Timestamp timestamp = 0;

  std::int64_t& at(int r, int c) { return counts[static_cast<std::size_t>(r) * cols + c]; }
  std::int64_t at(int r, int c) const { return counts[static_cast<std::size_t>(r) * cols + c]; }
  std::int64_t total() const;
};

DensityMatrix make_density_matrix(const BoundingBox& region, int rows, int cols,
                                  Timestamp t = 0);

// Cell census of a snapshot. Cells are half-open; the region's max edges are
// closed. Records outside the region are ignored.
DensityMatrix density(const Snapshot& snapshot, const BoundingBox& region,
                      int rows, int cols);

// Row/col cell index of a point, or -1/-1 when outside the region.
std::pair<int, int> cell_of(const BoundingBox& region, int rows, int cols,
                            const GeoPoint& p);

// CSV: rows x cols integer counts, comma separator, newline \n, no header.
std::string density_to_csv(const DensityMatrix& m);
// Parses a bare counts CSV; region/timestamp are left at defaults.
DensityMatrix density_from_csv(const std::string& text);

// Binary PGM (P5, maxval 255), value = round(255*count/max); all-zero input
// yields an all-zero image.
std::string density_to_pgm(const DensityMatrix& m);

}  // namespace thingcrawl
