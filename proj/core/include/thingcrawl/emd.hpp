#pragma once

#include "thingcrawl/density.hpp"

namespace thingcrawl {

// Normalized drift between two spatial distributions.
struct DriftScore {
  double value = 0.0;  // in [0, 1]; 0 when the distributions are equal
  Timestamp from_timestamp = 0;
  Timestamp to_timestamp = 0;
};

// Earth mover's distance between two density matrices of identical dims and
// region. Masses are normalized to sum 1; ground distance is the Euclidean
// distance between cell centers in cell-index space divided by the grid
// diagonal, so the result lies in [0, 1]. Solved exactly with a
// transportation simplex; grids above 32x32 raise GridTooLarge.
DriftScore emd(const DensityMatrix& a, const DensityMatrix& b);

}  // namespace thingcrawl
