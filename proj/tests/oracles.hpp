#pragma once

// Slow reference implementations used to check the library.

#include <algorithm>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <random>
#include <set>
#include <vector>

#include "mapping.hpp"

namespace oracle {

using namespace deux;

inline OccupancyGrid random_grid(int n, double p_free, std::mt19937_64& rng) {
  OccupancyGrid g(n, n, 0.25, Cell::Occupied);
  std::bernoulli_distribution free(p_free);
  for (auto& c : g.cells) c = free(rng) ? Cell::Free : Cell::Occupied;
  return g;
}

// Three-valued grid for frontier checks.
inline OccupancyGrid random_tri_grid(int n, std::mt19937_64& rng) {
  OccupancyGrid g(n, n, 0.25);
  std::discrete_distribution<int> kind({0.3, 0.5, 0.2});
  for (auto& c : g.cells) c = static_cast<Cell>(kind(rng));
  return g;
}

// Dijkstra with a binary heap over 4-connected unit-cost Free cells; -1 when unreachable.
inline std::vector<int> dijkstra(const OccupancyGrid& g, GridCell s) {
  const int inf = std::numeric_limits<int>::max();
  std::vector<int> dist(g.cells.size(), inf);
  using Item = std::pair<int, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  const int si = s.row * g.cols + s.col;
  dist[si] = 0;
  pq.push({0, si});
  while (!pq.empty()) {
    auto [d, i] = pq.top();
    pq.pop();
    if (d > dist[i]) continue;
    const int r = i / g.cols, c = i % g.cols;
    const int nb[4][2] = {{r + 1, c}, {r - 1, c}, {r, c + 1}, {r, c - 1}};
    for (const auto& p : nb) {
      if (!g.inside(p[0], p[1]) || g.at(p[0], p[1]) != Cell::Free) continue;
      const int j = p[0] * g.cols + p[1];
      if (d + 1 < dist[j]) {
        dist[j] = d + 1;
        pq.push({d + 1, j});
      }
    }
  }
  for (auto& d : dist)
    if (d == inf) d = -1;
  return dist;
}

// Checks a path is a 4-connected chain of Free cells from a to b.
inline bool valid_path(const OccupancyGrid& g, const std::vector<GridCell>& path, GridCell a, GridCell b) {
  if (path.empty() || path.front() != a || path.back() != b) return false;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (!g.inside(path[i]) || g.at(path[i]) != Cell::Free) return false;
    if (i > 0 && std::abs(path[i].row - path[i - 1].row) + std::abs(path[i].col - path[i - 1].col) != 1) return false;
  }
  return true;
}

struct BruteFrontier {
  std::set<GridCell> cells;
  // Each frontier cell's cluster, as the set of its members.
  std::vector<std::set<GridCell>> clusters;
};

// Frontier cells by direct definition, clustered with union-find over all 8-neighbour pairs.
inline BruteFrontier brute_frontiers(const OccupancyGrid& g, int min_cluster) {
  std::vector<GridCell> fs;
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      if (g.at(r, c) != Cell::Free) continue;
      bool edge = false;
      for (auto [dr, dc] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
        const int rr = r + dr, cc = c + dc;
        edge = edge || (g.inside(rr, cc) && g.at(rr, cc) == Cell::Unknown);
      }
      if (edge) fs.push_back({r, c});
    }
  }
  std::vector<int> parent(fs.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
  for (std::size_t i = 0; i < fs.size(); ++i)
    for (std::size_t j = i + 1; j < fs.size(); ++j)
      if (std::max(std::abs(fs[i].row - fs[j].row), std::abs(fs[i].col - fs[j].col)) == 1)
        parent[find(int(i))] = find(int(j));
  std::vector<std::set<GridCell>> groups(fs.size());
  for (std::size_t i = 0; i < fs.size(); ++i) groups[find(int(i))].insert(fs[i]);
  BruteFrontier out;
  for (std::size_t i = 0; i < fs.size(); ++i) {
    const auto& grp = groups[find(int(i))];
    if (int(grp.size()) < min_cluster) continue;
    out.cells.insert(fs[i]);
    out.clusters.push_back(grp);
  }
  return out;
}

// Compares extract_frontiers output against the brute-force oracle.
inline bool frontiers_match(const OccupancyGrid& g, const std::vector<Frontier>& got, int min_cluster) {
  const auto want = brute_frontiers(g, min_cluster);
  if (got.size() != want.cells.size()) return false;
  std::size_t k = 0;
  for (const auto& cell : want.cells) {
    const auto& f = got[k];
    if (f.cell != cell) return false;
    // Cluster identity: same id iff same oracle cluster.
    const auto& grp = want.clusters[k];
    if (f.cluster_size != int(grp.size())) return false;
    for (std::size_t j = 0; j < got.size(); ++j) {
      const bool same_id = got[j].cluster_id == f.cluster_id;
      if (same_id != (grp.count(got[j].cell) == 1)) return false;
    }
    ++k;
  }
  return true;
}

}  // namespace oracle
