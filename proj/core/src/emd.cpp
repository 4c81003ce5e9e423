#include "thingcrawl/emd.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <vector>

namespace thingcrawl {

namespace {

constexpr int kMaxGridSide = 32;
constexpr double kReducedCostTol = 1e-12;

struct Arc {
  int supply;  // index into supplies
  int demand;  // index into demands
  double flow;
};

// Exact optimal transport between weighted point sets via the transportation
// simplex (northwest-corner start + MODI pivots). Supplies and demands must
// each sum to the same total.
double solve_transport(const std::vector<double>& supply,
                       const std::vector<double>& demand,
                       const std::vector<std::vector<double>>& cost) {
  const int m = static_cast<int>(supply.size());
  const int n = static_cast<int>(demand.size());

  if (m == 1) {
    double total = 0.0;
    for (int j = 0; j < n; ++j) total += demand[j] * cost[0][j];
    return total;
  }
  if (n == 1) {
    double total = 0.0;
    for (int i = 0; i < m; ++i) total += supply[i] * cost[i][0];
    return total;
  }

  // Northwest-corner initial basis: exactly m+n-1 arcs, zero flows allowed.
  std::vector<Arc> basis;
  basis.reserve(static_cast<std::size_t>(m + n - 1));
  {
    std::vector<double> s = supply, d = demand;
    int i = 0, j = 0;
    while (true) {
      double f = std::min(s[i], d[j]);
      basis.push_back({i, j, f});
      s[i] -= f;
      d[j] -= f;
      if (i == m - 1 && j == n - 1) break;
      if (i == m - 1)
        ++j;
      else if (j == n - 1)
        ++i;
      else if (s[i] <= d[j])
        ++i;
      else
        ++j;
    }
  }

  const int nodes = m + n;  // supply i -> node i, demand j -> node m+j
  std::vector<std::vector<int>> adj(nodes);  // arc indices per node
  auto attach = [&](int arc_id) {
    adj[basis[arc_id].supply].push_back(arc_id);
    adj[m + basis[arc_id].demand].push_back(arc_id);
  };
  auto detach = [&](int arc_id) {
    auto& a = adj[basis[arc_id].supply];
    a.erase(std::find(a.begin(), a.end(), arc_id));
    auto& b = adj[m + basis[arc_id].demand];
    b.erase(std::find(b.begin(), b.end(), arc_id));
  };
  for (int k = 0; k < static_cast<int>(basis.size()); ++k) attach(k);

  std::vector<double> u(m), v(n);
  std::vector<int> parent_arc(nodes), parent_node(nodes);
  std::vector<char> seen(nodes);

  const long max_pivots = 200L * (m + n) * (m + n);
  for (long pivot = 0;; ++pivot) {
    if (pivot > max_pivots)
      throw Error("transportation simplex failed to converge");

    // Potentials from the basis tree: u_i + v_j = c_ij on basic arcs.
    std::fill(seen.begin(), seen.end(), 0);
    std::deque<int> queue{0};
    u[0] = 0.0;
    seen[0] = 1;
    while (!queue.empty()) {
      int node = queue.front();
      queue.pop_front();
      for (int arc_id : adj[node]) {
        const Arc& a = basis[arc_id];
        int other = (node == a.supply) ? m + a.demand : a.supply;
        if (seen[other]) continue;
        seen[other] = 1;
        if (other >= m)
          v[other - m] = cost[a.supply][a.demand] - u[a.supply];
        else
          u[other] = cost[a.supply][a.demand] - v[a.demand];
        queue.push_back(other);
      }
    }

    // Entering arc: most negative reduced cost.
    int best_i = -1, best_j = -1;
    double best_rc = -kReducedCostTol;
    for (int i = 0; i < m; ++i) {
      const double ui = u[i];
      for (int j = 0; j < n; ++j) {
        double rc = cost[i][j] - ui - v[j];
        if (rc < best_rc) {
          best_rc = rc;
          best_i = i;
          best_j = j;
        }
      }
    }
    if (best_i < 0) break;  // optimal

    // Unique tree path from supply node best_i to demand node m+best_j.
    std::fill(seen.begin(), seen.end(), 0);
    std::fill(parent_arc.begin(), parent_arc.end(), -1);
    queue.assign(1, best_i);
    seen[best_i] = 1;
    const int target = m + best_j;
    while (!queue.empty()) {
      int node = queue.front();
      queue.pop_front();
      if (node == target) break;
      for (int arc_id : adj[node]) {
        const Arc& a = basis[arc_id];
        int other = (node == a.supply) ? m + a.demand : a.supply;
        if (seen[other]) continue;
        seen[other] = 1;
        parent_arc[other] = arc_id;
        parent_node[other] = node;
        queue.push_back(other);
      }
    }

    // Walk back from demand to supply; arcs alternate -,+,-,... starting at
    // the one adjacent to the entering arc's demand end.
    std::vector<int> cycle;  // arc ids along the path
    for (int node = target; node != best_i; node = parent_node[node])
      cycle.push_back(parent_arc[node]);

    double theta = std::numeric_limits<double>::infinity();
    int leaving = -1;
    for (std::size_t k = 0; k < cycle.size(); k += 2) {  // minus positions
      const Arc& a = basis[cycle[k]];
      if (a.flow < theta) {
        theta = a.flow;
        leaving = cycle[k];
      }
    }

    for (std::size_t k = 0; k < cycle.size(); ++k) {
      if (k % 2 == 0)
        basis[cycle[k]].flow -= theta;
      else
        basis[cycle[k]].flow += theta;
    }

    // Replace the leaving arc with the entering one in place.
    detach(leaving);
    basis[leaving] = {best_i, best_j, theta};
    attach(leaving);
  }

  double total = 0.0;
  for (const Arc& a : basis) total += a.flow * cost[a.supply][a.demand];
  return total;
}

}  // namespace

DriftScore emd(const DensityMatrix& a, const DensityMatrix& b) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw DimensionMismatch("EMD inputs must share grid dims");
  if (!(a.region == b.region))
    throw DimensionMismatch("EMD inputs must share the region");
  if (a.rows > kMaxGridSide || a.cols > kMaxGridSide)
    throw GridTooLarge("EMD grids are capped at 32x32");

  const std::int64_t ta = a.total(), tb = b.total();
  if (ta <= 0 || tb <= 0)
    throw EmptyDistribution("EMD requires positive total mass on both sides");

  DriftScore score;
  score.from_timestamp = a.timestamp;
  score.to_timestamp = b.timestamp;

  const double diag = std::hypot(a.rows - 1, a.cols - 1);
  if (diag == 0.0) return score;  // 1x1 grid: both masses coincide

  std::vector<double> supply, demand;
  std::vector<std::pair<int, int>> s_cells, d_cells;
  for (int r = 0; r < a.rows; ++r) {
    for (int c = 0; c < a.cols; ++c) {
      if (a.at(r, c) > 0) {
        supply.push_back(static_cast<double>(a.at(r, c)) / ta);
        s_cells.emplace_back(r, c);
      }
      if (b.at(r, c) > 0) {
        demand.push_back(static_cast<double>(b.at(r, c)) / tb);
        d_cells.emplace_back(r, c);
      }
    }
  }
  // Force exact total equality against rounding in the normalization.
  auto rebalance = [](std::vector<double>& w) {
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < w.size(); ++k) sum += w[k];
    w.back() = 1.0 - sum;
  };
  rebalance(supply);
  rebalance(demand);

  std::vector<std::vector<double>> cost(supply.size(),
                                        std::vector<double>(demand.size()));
  for (std::size_t i = 0; i < s_cells.size(); ++i)
    for (std::size_t j = 0; j < d_cells.size(); ++j)
      cost[i][j] = std::hypot(s_cells[i].first - d_cells[j].first,
                              s_cells[i].second - d_cells[j].second) / diag;

  double value = solve_transport(supply, demand, cost);
  score.value = std::clamp(value, 0.0, 1.0);
  return score;
}

}  // namespace thingcrawl
