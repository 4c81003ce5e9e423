#include "thingcrawl/density.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace thingcrawl {

std::int64_t DensityMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

DensityMatrix make_density_matrix(const BoundingBox& region, int rows, int cols,
                                  Timestamp t) {
  if (rows < 1 || cols < 1) throw DimensionMismatch("density grid dims must be >= 1");
  DensityMatrix m;
  m.region = region;
  m.rows = rows;
  m.cols = cols;
  m.counts.assign(static_cast<std::size_t>(rows) * cols, 0);
  m.timestamp = t;
  return m;
}

std::pair<int, int> cell_of(const BoundingBox& region, int rows, int cols,
                            const GeoPoint& p) {
  if (!box_contains(region, p)) return {-1, -1};
  double lat_span = region.lat_span();
  double lon_span = region.lon_span();
  int r = 0, c = 0;
  if (lat_span > 0) {
    r = static_cast<int>((p.latitude - region.min_corner.latitude) / lat_span * rows);
    r = std::min(r, rows - 1);  // max edge closed
  }
  if (lon_span > 0) {
    c = static_cast<int>((p.longitude - region.min_corner.longitude) / lon_span * cols);
    c = std::min(c, cols - 1);
  }
  return {r, c};
}

DensityMatrix density(const Snapshot& snapshot, const BoundingBox& region,
                      int rows, int cols) {
  DensityMatrix m = make_density_matrix(region, rows, cols, snapshot.round_timestamp);
  for (const auto& rec : snapshot.records) {
    auto [r, c] = cell_of(region, rows, cols, rec.position);
    if (r >= 0) ++m.at(r, c);
  }
  return m;
}

std::string density_to_csv(const DensityMatrix& m) {
  std::ostringstream out;
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) {
      if (c) out << ',';
      out << m.at(r, c);
    }
    out << '\n';
  }
  return out.str();
}

DensityMatrix density_from_csv(const std::string& text) {
  std::vector<std::vector<std::int64_t>> grid;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::int64_t> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stoll(cell));
    grid.push_back(std::move(row));
  }
  if (grid.empty()) throw Error("density CSV is empty");
  std::size_t cols = grid.front().size();
  for (const auto& row : grid)
    if (row.size() != cols) throw Error("density CSV has ragged rows");
  DensityMatrix m;
  m.rows = static_cast<int>(grid.size());
  m.cols = static_cast<int>(cols);
  m.counts.reserve(grid.size() * cols);
  for (const auto& row : grid)
    m.counts.insert(m.counts.end(), row.begin(), row.end());
  return m;
}

std::string density_to_pgm(const DensityMatrix& m) {
  std::int64_t maxc = m.counts.empty()
      ? 0 : *std::max_element(m.counts.begin(), m.counts.end());
  std::ostringstream out;
  out << "P5\n" << m.cols << ' ' << m.rows << "\n255\n";
  for (std::int64_t c : m.counts) {
    unsigned char v = 0;
    if (maxc > 0)
      v = static_cast<unsigned char>(std::llround(255.0 * static_cast<double>(c) / static_cast<double>(maxc)));
    out.put(static_cast<char>(v));
  }
  return out.str();
}

}  // namespace thingcrawl
