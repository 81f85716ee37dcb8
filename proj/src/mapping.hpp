#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geometry.hpp"

namespace deux {

enum class Cell : std::uint8_t { Unknown = 0, Free = 1, Occupied = 2 };

struct GridCell {
  int row = 0;
  int col = 0;
  auto operator<=>(const GridCell&) const = default;
};

struct OccupancyGrid {
  int rows = 0;
  int cols = 0;
  double origin_x = 0.0;  // world coordinates of the corner of cell (0, 0)
  double origin_y = 0.0;
  double resolution_m = 0.25;
  double floor_z = 0.25;
  std::vector<Cell> cells;

  OccupancyGrid() = default;
  OccupancyGrid(int rows_, int cols_, double resolution, Cell fill = Cell::Unknown)
      : rows(rows_), cols(cols_), resolution_m(resolution), cells(std::size_t(rows_) * cols_, fill) {}

  bool inside(int row, int col) const { return row >= 0 && col >= 0 && row < rows && col < cols; }
  bool inside(GridCell c) const { return inside(c.row, c.col); }
  Cell& at(int row, int col) { return cells[std::size_t(row) * cols + col]; }
  Cell at(int row, int col) const { return cells[std::size_t(row) * cols + col]; }
  Cell at(GridCell c) const { return at(c.row, c.col); }
  GridCell cell_of(double x, double y) const;
  // Center of a cell in world coordinates.
  std::pair<double, double> center(GridCell c) const;
  std::size_t count(Cell kind) const;
};

struct IntegrationParams {
  double band_low = 0.1;   // obstacle height band above the floor, meters
  double band_high = 1.5;
  double max_range = kMaxDepth;
};

// Projects a depth frame into the top-down grid. Occupied is sticky across frames.
OccupancyGrid integrate(OccupancyGrid grid, const Pose& frame_pose, const DepthMap& depth, const Intrinsics& k,
                        const IntegrationParams& params = {});

// Cells on the 2D line from a to b, both ends included.
std::vector<GridCell> line_cells(GridCell a, GridCell b);

struct Frontier {
  GridCell cell;
  int cluster_id = 0;
  int cluster_size = 0;
};

inline constexpr int kMinFrontierCluster = 3;

// Free cells 4-adjacent to Unknown, grouped into 8-connected clusters; small clusters dropped.
// Output is sorted by (row, col); cluster ids follow the first member in that order.
std::vector<Frontier> extract_frontiers(const OccupancyGrid& grid, int min_cluster_size = kMinFrontierCluster);

bool is_frontier_cell(const OccupancyGrid& grid, GridCell c);

// One representative per cluster: the member nearest the cluster centroid, ties to lowest (row, col).
std::vector<Frontier> frontier_representatives(const std::vector<Frontier>& frontiers);

// Planning view: 1-cell inflation of Occupied, then Unknown treated as Occupied.
OccupancyGrid process_map(const OccupancyGrid& grid);

// PGM (P5): Unknown=0, Free=128, Occupied=255; row 0 of the file is the grid's last row.
void write_pgm(const OccupancyGrid& grid, const std::string& path);

}  // namespace deux
