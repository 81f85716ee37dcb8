#include "planning.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <tuple>

#include "error.hpp"

namespace deux {

std::optional<PlanResult> astar(const OccupancyGrid& planning, GridCell start, GridCell goal, int lookahead) {
  if (!planning.inside(start) || planning.at(start) != Cell::Free)
    fail(ErrorKind::Precondition, "astar: start cell is not free in the planning view");
  if (!planning.inside(goal) || planning.at(goal) != Cell::Free) return std::nullopt;

  const int cols = planning.cols;
  const std::size_t n = planning.cells.size();
  auto idx = [cols](GridCell c) { return std::size_t(c.row) * cols + c.col; };
  auto h = [&](GridCell c) { return std::abs(c.row - goal.row) + std::abs(c.col - goal.col); };

  std::vector<int> g(n, -1);
  std::vector<int> parent(n, -1);
  std::vector<std::uint8_t> closed(n, 0);
  // (f, row, col): ties on f expand the lower (row, col) first.
  using Entry = std::tuple<int, int, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  g[idx(start)] = 0;
  open.emplace(h(start), start.row, start.col);
  while (!open.empty()) {
    const auto [f, r, c] = open.top();
    open.pop();
    const GridCell cur{r, c};
    const std::size_t ci = idx(cur);
    if (closed[ci]) continue;
    closed[ci] = 1;
    if (cur == goal) break;
    const int nb[4][2] = {{-1, 0}, {0, -1}, {0, 1}, {1, 0}};
    for (const auto& d : nb) {
      const GridCell next{r + d[0], c + d[1]};
      if (!planning.inside(next) || planning.at(next) != Cell::Free) continue;
      const std::size_t ni = idx(next);
      if (closed[ni]) continue;
      const int cand = g[ci] + 1;
      if (g[ni] < 0 || cand < g[ni]) {
        g[ni] = cand;
        parent[ni] = static_cast<int>(ci);
        open.emplace(cand + h(next), next.row, next.col);
      }
    }
  }
  if (!closed[idx(goal)]) return std::nullopt;

  PlanResult out;
  out.cost = g[idx(goal)];
  out.next_index = lookahead;
  for (int at = static_cast<int>(idx(goal)); at >= 0; at = parent[at]) out.path.push_back({at / cols, at % cols});
  std::reverse(out.path.begin(), out.path.end());
  return out;
}

std::vector<int> distance_field(const OccupancyGrid& planning, GridCell start) {
  std::vector<int> dist(planning.cells.size(), -1);
  if (!planning.inside(start) || planning.at(start) != Cell::Free) return dist;
  std::queue<GridCell> q;
  dist[std::size_t(start.row) * planning.cols + start.col] = 0;
  q.push(start);
  while (!q.empty()) {
    const GridCell cur = q.front();
    q.pop();
    const int base = dist[std::size_t(cur.row) * planning.cols + cur.col];
    const int nb[4][2] = {{-1, 0}, {0, -1}, {0, 1}, {1, 0}};
    for (const auto& d : nb) {
      const GridCell next{cur.row + d[0], cur.col + d[1]};
      if (!planning.inside(next) || planning.at(next) != Cell::Free) continue;
      int& slot = dist[std::size_t(next.row) * planning.cols + next.col];
      if (slot >= 0) continue;
      slot = base + 1;
      q.push(next);
    }
  }
  return dist;
}

std::optional<GridCell> nearest_free_cell(const OccupancyGrid& planning, GridCell cell, int radius) {
  std::optional<GridCell> best;
  int best_d = 0;
  for (int dr = -radius; dr <= radius; ++dr) {
    for (int dc = -radius; dc <= radius; ++dc) {
      const GridCell c{cell.row + dr, cell.col + dc};
      if (!planning.inside(c) || planning.at(c) != Cell::Free) continue;
      const int d = dr * dr + dc * dc;
      if (!best || d < best_d || (d == best_d && c < *best)) {
        best = c;
        best_d = d;
      }
    }
  }
  return best;
}

GridCell next_waypoint(const PlanResult& plan) {
  if (plan.path.empty()) fail(ErrorKind::Usage, "next_waypoint: empty path");
  const int last = static_cast<int>(plan.path.size()) - 1;
  return plan.path[std::clamp(plan.next_index, 0, last)];
}

Action action_toward(const AgentState& state, double wx, double wy) {
  const double bearing = std::atan2(wy - state.y, wx - state.x);
  double err = std::remainder(bearing - state.heading(), 2.0 * std::numbers::pi);  // (-pi, pi]
  if (std::abs(err) <= kHeadingTolerance + 1e-12) return Action::Forward;
  if (std::abs(std::abs(err) - std::numbers::pi) < 1e-12) return Action::TurnLeft;
  return err > 0.0 ? Action::TurnLeft : Action::TurnRight;
}

Action unstuck_action(Rng& rng) {
  static constexpr Action kChoices[3] = {Action::Forward, Action::TurnLeft, Action::TurnRight};
  return kChoices[std::uniform_int_distribution<int>(0, 2)(rng)];
}

}  // namespace deux
