#pragma once

#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "mapping.hpp"
#include "world.hpp"

namespace deux {

inline constexpr int kLookahead = 3;

struct PlanResult {
  std::vector<GridCell> path;  // path.front() is the start
  int next_index = kLookahead;
  int cost = 0;  // in cells
};

// 4-connected A* with unit costs and Manhattan heuristic over the planning view.
// Only Free cells are traversable. Returns nullopt when the goal is unreachable.
// Throws Precondition if the start cell is not Free.
std::optional<PlanResult> astar(const OccupancyGrid& planning, GridCell start, GridCell goal, int lookahead = kLookahead);

// BFS step counts from start over Free cells; -1 where unreachable.
std::vector<int> distance_field(const OccupancyGrid& planning, GridCell start);

// Nearest Free cell to `cell` within Chebyshev `radius`, by squared distance then (row, col).
std::optional<GridCell> nearest_free_cell(const OccupancyGrid& planning, GridCell cell, int radius);

GridCell next_waypoint(const PlanResult& plan);

inline constexpr double kHeadingTolerance = 5.0 * std::numbers::pi / 180.0;

// Forward when the waypoint is within half a turn step of the heading, else turn toward it.
Action action_toward(const AgentState& state, double wx, double wy);

using Rng = std::mt19937_64;

// Uniform over {Forward, TurnLeft, TurnRight}.
Action unstuck_action(Rng& rng);

}  // namespace deux
