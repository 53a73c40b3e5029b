#pragma once

// Test-only oracle: solves the discrete optimal transport LP
//   min sum_ij pi_ij (x_i - y_j)^2   s.t. row sums = a, col sums = b
// with the transportation simplex (northwest corner start, MODI potentials,
// stepping-stone pivots).  Independent of the quantile-coupling route used by
// the library.

#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <stdexcept>
#include <vector>

namespace oracles {

inline double transport_lp_cost(const std::vector<double>& xs, std::vector<double> a,
                                const std::vector<double>& ys, std::vector<double> b) {
  const int m = static_cast<int>(xs.size()), k = static_cast<int>(ys.size());
  if (a.size() != xs.size() || b.size() != ys.size())
    throw std::invalid_argument("transport_lp: sizes");
  // tiny supply perturbation wards off degenerate pivots
  double bump = 0.0;
  for (int i = 0; i < m; ++i) {
    const double e = (i + 1) * 1e-13;
    a[i] += e;
    bump += e;
  }
  b.back() += bump;

  std::vector<std::vector<double>> cost(m, std::vector<double>(k));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < k; ++j) cost[i][j] = (xs[i] - ys[j]) * (xs[i] - ys[j]);

  std::vector<std::vector<double>> flow(m, std::vector<double>(k, 0.0));
  std::vector<std::vector<bool>> basis(m, std::vector<bool>(k, false));

  {  // northwest corner start
    int i = 0, j = 0;
    std::vector<double> ra = a, rb = b;
    while (i < m && j < k) {
      const double f = std::min(ra[i], rb[j]);
      flow[i][j] = f;
      basis[i][j] = true;
      ra[i] -= f;
      rb[j] -= f;
      if (i == m - 1 && j == k - 1) break;
      if (ra[i] <= rb[j])
        ++i;
      else
        ++j;
    }
  }

  const double kTol = 1e-12;
  for (int iter = 0;; ++iter) {
    if (iter > 20000) throw std::runtime_error("transport_lp: too many pivots");

    // MODI potentials from the basis tree
    std::vector<double> u(m, 0.0), v(k, 0.0);
    std::vector<bool> udone(m, false), vdone(k, false);
    udone[0] = true;
    for (bool progress = true; progress;) {
      progress = false;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < k; ++j) {
          if (!basis[i][j]) continue;
          if (udone[i] && !vdone[j]) {
            v[j] = cost[i][j] - u[i];
            vdone[j] = true;
            progress = true;
          } else if (vdone[j] && !udone[i]) {
            u[i] = cost[i][j] - v[j];
            udone[i] = true;
            progress = true;
          }
        }
    }

    double best = -kTol;
    int bi = -1, bj = -1;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < k; ++j) {
        if (basis[i][j]) continue;
        const double r = cost[i][j] - u[i] - v[j];
        if (r < best) {
          best = r;
          bi = i;
          bj = j;
        }
      }
    if (bi < 0) break;  // optimal

    // BFS on the bipartite basis graph from row bi to column bj.
    // Nodes: rows 0..m-1, columns m..m+k-1.
    const int nn = m + k;
    std::vector<int> parent(nn, -2);
    std::deque<int> queue;
    parent[bi] = -1;
    queue.push_back(bi);
    while (!queue.empty()) {
      const int node = queue.front();
      queue.pop_front();
      if (node == m + bj) break;
      if (node < m) {
        for (int j = 0; j < k; ++j)
          if (basis[node][j] && parent[m + j] == -2) {
            parent[m + j] = node;
            queue.push_back(m + j);
          }
      } else {
        const int j = node - m;
        for (int i = 0; i < m; ++i)
          if (basis[i][j] && parent[i] == -2) {
            parent[i] = node;
            queue.push_back(i);
          }
      }
    }
    if (parent[m + bj] == -2) throw std::runtime_error("transport_lp: basis not connected");

    // Cycle cells: entering (bi,bj), then basis cells along the tree path
    // from column bj back to row bi; alternate +/- starting with + at entry.
    std::vector<std::pair<int, int>> cycle{{bi, bj}};
    int node = m + bj;
    while (parent[node] != -1) {
      const int p = parent[node];
      if (node >= m)
        cycle.push_back({p, node - m});
      else
        cycle.push_back({node, p - m});
      node = p;
    }

    double theta = std::numeric_limits<double>::infinity();
    int li = -1, lj = -1;
    for (size_t p = 1; p < cycle.size(); p += 2) {
      const auto [ci, cj] = cycle[p];
      if (flow[ci][cj] < theta) {
        theta = flow[ci][cj];
        li = ci;
        lj = cj;
      }
    }
    for (size_t p = 0; p < cycle.size(); ++p) {
      const auto [ci, cj] = cycle[p];
      if (p % 2 == 0)
        flow[ci][cj] += theta;
      else
        flow[ci][cj] -= theta;
    }
    basis[bi][bj] = true;
    basis[li][lj] = false;
    flow[li][lj] = 0.0;
  }

  double total = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < k; ++j) total += flow[i][j] * cost[i][j];
  return total;
}

}  // namespace oracles
