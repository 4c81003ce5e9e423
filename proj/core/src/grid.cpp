#include "thingcrawl/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace thingcrawl {

GridPlan make_grid(const BoundingBox& region, int rows, int cols,
                   double margin_fraction) {
  if (rows < 1 || cols < 1) throw InvalidRegion("grid dims must be >= 1");
  if (region.lat_span() <= 0.0 || region.lon_span() <= 0.0)
    throw InvalidRegion("region has zero area");
  if (!(margin_fraction >= 0.0 && margin_fraction < 0.25))
    throw InvalidMargin("margin fraction must be in [0, 0.25)");

  GridPlan plan;
  plan.region = region;
  plan.rows = rows;
  plan.cols = cols;
  plan.margin_fraction = margin_fraction;
  plan.segments.reserve(static_cast<std::size_t>(rows) * cols);

  const double cell_lat = region.lat_span() / rows;
  const double cell_lon = region.lon_span() / cols;
  const double inset_lat = margin_fraction * cell_lat;
  const double inset_lon = margin_fraction * cell_lon;

  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double lat0 = region.min_corner.latitude + r * cell_lat;
      double lon0 = region.min_corner.longitude + c * cell_lon;
      // last row/col snapped to the region edge to keep the union exact
      double lat1 = (r == rows - 1) ? region.max_corner.latitude : lat0 + cell_lat;
      double lon1 = (c == cols - 1) ? region.max_corner.longitude : lon0 + cell_lon;
      Segment s;
      s.index = {r, c};
      s.bounds = BoundingBox{{lat0, lon0}, {lat1, lon1}};
      s.fetch_bounds = BoundingBox{{lat0 + inset_lat, lon0 + inset_lon},
                                   {lat1 - inset_lat, lon1 - inset_lon}};
      plan.segments.push_back(std::move(s));
    }
  }
  return plan;
}

GridPlan update_weights(const GridPlan& plan, const DensityMatrix& density,
                        const std::optional<DensityMatrix>& query_density,
                        double alpha, double beta) {
  if (density.rows != plan.rows || density.cols != plan.cols)
    throw DimensionMismatch("density dims do not match plan dims");
  if (query_density &&
      (query_density->rows != plan.rows || query_density->cols != plan.cols))
    throw DimensionMismatch("query density dims do not match plan dims");
  if (alpha < 0.0 || beta < 0.0 || alpha + beta <= 0.0)
    throw Error("weights require alpha, beta >= 0 and alpha + beta > 0");

  const std::int64_t dmax =
      *std::max_element(density.counts.begin(), density.counts.end());
  std::int64_t qmax = 0;
  if (query_density)
    qmax = *std::max_element(query_density->counts.begin(),
                             query_density->counts.end());

  GridPlan out = plan;
  for (int r = 0; r < plan.rows; ++r) {
    for (int c = 0; c < plan.cols; ++c) {
      Segment& s = out.segments[static_cast<std::size_t>(r) * plan.cols + c];
      double d_hat = dmax > 0 ? static_cast<double>(density.at(r, c)) / dmax : 0.0;
      double q_hat = 0.0;
      if (query_density && qmax > 0)
        q_hat = static_cast<double>(query_density->at(r, c)) / qmax;
      s.weight = alpha * d_hat + beta * q_hat;
      if (density.at(r, c) == 0)
        ++s.empty_rounds;
      else
        s.empty_rounds = 0;
    }
  }
  return out;
}

ScanQueue build_queue(const GridPlan& plan, double prune_threshold,
                      int revisit_every) {
  if (revisit_every < 1) throw Error("revisit_every must be >= 1");

  struct Entry {
    SegmentIndex index;
    double weight;
    int multiplicity;
    bool revisit_tail;  // forced back after pruning; appended once at the end
  };

  std::vector<Entry> kept;
  std::vector<SegmentIndex> tail;
  double w_min_positive = std::numeric_limits<double>::infinity();

  for (const Segment& s : plan.segments) {
    bool pruned = s.weight < prune_threshold && s.empty_rounds > 0;
    if (pruned) {
      if (s.empty_rounds % revisit_every == 0) tail.push_back(s.index);
      continue;
    }
    if (s.weight > 0.0) w_min_positive = std::min(w_min_positive, s.weight);
    kept.push_back({s.index, s.weight, 1, false});
  }

  if (std::isfinite(w_min_positive)) {
    for (Entry& e : kept)
      e.multiplicity = std::max(
          1, static_cast<int>(std::llround(e.weight / w_min_positive)));
  }

  std::stable_sort(kept.begin(), kept.end(), [](const Entry& a, const Entry& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.index < b.index;
  });

  ScanQueue q;
  for (const Entry& e : kept)
    for (int i = 0; i < e.multiplicity; ++i) q.entries.push_back(e.index);
  for (const SegmentIndex& i : tail) q.entries.push_back(i);
  return q;
}

}  // namespace thingcrawl
