#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "thingcrawl/density.hpp"
#include "thingcrawl/geo.hpp"

namespace thingcrawl {

// (row, col) index of a segment within its plan, row-major.
using SegmentIndex = std::pair<int, int>;

struct Segment {
  SegmentIndex index;
  BoundingBox bounds;
  BoundingBox fetch_bounds;  // bounds inset by the margin fraction per side
  double weight = 0.0;
  int empty_rounds = 0;
};

struct GridPlan {
  BoundingBox region;
  int rows = 1;
  int cols = 1;
  double margin_fraction = 0.0;
  std::vector<Segment> segments;  // row-major

  const Segment& at(int r, int c) const {
    return segments[static_cast<std::size_t>(r) * cols + c];
  }
};

// Ordered scan queue over segment indices; repetitions encode weight.
struct ScanQueue {
  std::vector<SegmentIndex> entries;
};

// Uniform tiling of region into rows x cols segments; each segment's
// fetch_bounds are inset by margin_fraction * (cell width/height) per side.
// margin_fraction must lie in [0, 0.25).
GridPlan make_grid(const BoundingBox& region, int rows, int cols,
                   double margin_fraction);

// weight(s) = alpha * d_hat(s) + beta * q_hat(s) with both matrices
// max-normalized to [0,1] (an all-zero matrix normalizes to all-zero).
// empty_rounds is incremented for segments with zero observed density and
// reset otherwise. Pure: returns a new plan.
GridPlan update_weights(const GridPlan& plan, const DensityMatrix& density,
                        const std::optional<DensityMatrix>& query_density,
                        double alpha, double beta);

// Segments with weight < prune_threshold and empty_rounds > 0 are omitted,
// except forced back once when empty_rounds % revisit_every == 0. Remaining
// segments appear max(1, round(w / w_min_positive)) times, ordered by
// descending weight, ties row-major. Deterministic.
ScanQueue build_queue(const GridPlan& plan, double prune_threshold,
                      int revisit_every);

}  // namespace thingcrawl
