#include "mapping.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "error.hpp"

namespace deux {

GridCell OccupancyGrid::cell_of(double x, double y) const {
  return {static_cast<int>(std::floor((y - origin_y) / resolution_m)),
          static_cast<int>(std::floor((x - origin_x) / resolution_m))};
}

std::pair<double, double> OccupancyGrid::center(GridCell c) const {
  return {origin_x + (c.col + 0.5) * resolution_m, origin_y + (c.row + 0.5) * resolution_m};
}

std::size_t OccupancyGrid::count(Cell kind) const {
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), kind));
}

std::vector<GridCell> line_cells(GridCell a, GridCell b) {
  std::vector<GridCell> out;
  int x0 = a.col, y0 = a.row;
  const int x1 = b.col, y1 = b.row;
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    out.push_back({y0, x0});
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
  return out;
}

namespace {

// Clips the segment a->b to the grid, keeping a (assumed inside) fixed.
GridCell clip_to_grid(const OccupancyGrid& g, GridCell a, GridCell b) {
  if (g.inside(b)) return b;
  const auto cells = line_cells(a, b);
  GridCell last = a;
  for (const auto& c : cells) {
    if (!g.inside(c)) break;
    last = c;
  }
  return last;
}

}  // namespace

OccupancyGrid integrate(OccupancyGrid grid, const Pose& pose, const DepthMap& depth, const Intrinsics& k,
                        const IntegrationParams& params) {
  if (depth.width != k.width || depth.height != k.height) fail(ErrorKind::Shape, "integrate: depth/intrinsics mismatch");
  const GridCell agent = grid.cell_of(pose.translation.x(), pose.translation.y());
  if (!grid.inside(agent)) fail(ErrorKind::Domain, "integrate: pose outside the grid");

  // Endpoint kinds per cell: bit 0 free through the endpoint, bit 1 free up to it, bit 2 obstacle.
  std::vector<std::uint8_t> kinds(grid.cells.size(), 0);
  std::set<GridCell> outside;  // endpoints beyond the grid, traced up to the border
  constexpr double kNudge = 0.005;  // pushes surface points into the voxel they hit
  for (int row = 0; row < k.height; ++row) {
    for (int col = 0; col < k.width; ++col) {
      const double d = depth.at(row, col);
      if (!(d > kMinDepth)) continue;
      const bool far = d >= params.max_range;
      const Eigen::Vector3d pc = backproject({double(col), double(row)}, far ? params.max_range : d + kNudge, k);
      const Eigen::Vector3d pw = pose.apply(pc);
      const GridCell c = grid.cell_of(pw.x(), pw.y());
      if (!grid.inside(c)) {
        outside.insert(c);
        continue;
      }
      const double h = pw.z() - grid.floor_z;
      std::uint8_t bit;
      if (far || h > params.band_high) bit = 2;
      else if (h < params.band_low) bit = 1;
      else bit = 4;
      kinds[std::size_t(c.row) * grid.cols + c.col] |= bit;
    }
  }

  auto trace = [&](GridCell end, bool include_end) {
    const auto ray = line_cells(agent, end);
    const std::size_t n = include_end ? ray.size() : ray.size() - 1;
    for (std::size_t i = 0; i < n; ++i) {
      Cell& m = grid.at(ray[i].row, ray[i].col);
      if (m != Cell::Occupied) m = Cell::Free;
    }
  };
  std::vector<GridCell> obstacles;
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      const std::uint8_t bits = kinds[std::size_t(r) * grid.cols + c];
      if (!bits) continue;
      trace({r, c}, (bits & 1) != 0);
      if (bits & 4) obstacles.push_back({r, c});
    }
  }
  for (const auto& c : outside) trace(clip_to_grid(grid, agent, c), true);
  for (const auto& c : obstacles) grid.at(c.row, c.col) = Cell::Occupied;
  grid.at(agent.row, agent.col) = Cell::Free;
  return grid;
}

bool is_frontier_cell(const OccupancyGrid& grid, GridCell c) {
  if (!grid.inside(c) || grid.at(c) != Cell::Free) return false;
  const int nb[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  for (const auto& d : nb) {
    const GridCell n{c.row + d[0], c.col + d[1]};
    if (grid.inside(n) && grid.at(n) == Cell::Unknown) return true;
  }
  return false;
}

std::vector<Frontier> extract_frontiers(const OccupancyGrid& grid, int min_cluster_size) {
  const std::size_t n = grid.cells.size();
  std::vector<std::uint8_t> is_f(n, 0);
  for (int r = 0; r < grid.rows; ++r)
    for (int c = 0; c < grid.cols; ++c) is_f[std::size_t(r) * grid.cols + c] = is_frontier_cell(grid, {r, c}) ? 1 : 0;

  std::vector<int> cluster(n, -1);
  std::vector<std::vector<GridCell>> clusters;
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      const std::size_t i = std::size_t(r) * grid.cols + c;
      if (!is_f[i] || cluster[i] >= 0) continue;
      const int id = static_cast<int>(clusters.size());
      clusters.emplace_back();
      std::vector<GridCell> stack{{r, c}};
      cluster[i] = id;
      while (!stack.empty()) {
        const GridCell cur = stack.back();
        stack.pop_back();
        clusters[id].push_back(cur);
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const GridCell nb{cur.row + dr, cur.col + dc};
            if (!grid.inside(nb)) continue;
            const std::size_t j = std::size_t(nb.row) * grid.cols + nb.col;
            if (!is_f[j] || cluster[j] >= 0) continue;
            cluster[j] = id;
            stack.push_back(nb);
          }
        }
      }
    }
  }

  std::vector<Frontier> out;
  std::vector<int> remap(clusters.size(), -1);
  int next_id = 0;
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      const std::size_t i = std::size_t(r) * grid.cols + c;
      if (!is_f[i]) continue;
      const int id = cluster[i];
      const int size = static_cast<int>(clusters[id].size());
      if (size < min_cluster_size) continue;
      if (remap[id] < 0) remap[id] = next_id++;
      out.push_back({{r, c}, remap[id], size});
    }
  }
  return out;
}

std::vector<Frontier> frontier_representatives(const std::vector<Frontier>& frontiers) {
  std::map<int, std::vector<const Frontier*>> by_cluster;
  for (const auto& f : frontiers) by_cluster[f.cluster_id].push_back(&f);
  std::vector<Frontier> reps;
  for (const auto& [id, members] : by_cluster) {
    double mr = 0.0, mc = 0.0;
    for (const auto* f : members) {
      mr += f->cell.row;
      mc += f->cell.col;
    }
    mr /= double(members.size());
    mc /= double(members.size());
    const Frontier* best = nullptr;
    double best_d = 0.0;
    for (const auto* f : members) {
      const double d = (f->cell.row - mr) * (f->cell.row - mr) + (f->cell.col - mc) * (f->cell.col - mc);
      if (!best || d < best_d || (d == best_d && f->cell < best->cell)) {
        best = f;
        best_d = d;
      }
    }
    reps.push_back(*best);
  }
  return reps;
}

OccupancyGrid process_map(const OccupancyGrid& grid) {
  OccupancyGrid out = grid;
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      if (grid.at(r, c) != Cell::Occupied) continue;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc)
          if (grid.inside(r + dr, c + dc)) out.at(r + dr, c + dc) = Cell::Occupied;
    }
  }
  for (auto& c : out.cells)
    if (c == Cell::Unknown) c = Cell::Occupied;
  return out;
}

void write_pgm(const OccupancyGrid& grid, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorKind::Io, "write_pgm: cannot open " + path);
  os << "P5\n" << grid.cols << ' ' << grid.rows << "\n255\n";
  for (int r = grid.rows - 1; r >= 0; --r) {
    for (int c = 0; c < grid.cols; ++c) {
      const Cell v = grid.at(r, c);
      const unsigned char byte = v == Cell::Unknown ? 0 : (v == Cell::Free ? 128 : 255);
      os.put(static_cast<char>(byte));
    }
  }
  if (!os) fail(ErrorKind::Io, "write_pgm: write failed for " + path);
}

}  // namespace deux
