#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "error.hpp"
#include "mapping.hpp"
#include "oracles.hpp"
#include "world.hpp"

using namespace deux;

TEST_CASE("line cells") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> u(-20, 20);
  for (int i = 0; i < 200; ++i) {
    const GridCell a{u(rng), u(rng)}, b{u(rng), u(rng)};
    const auto line = line_cells(a, b);
    CHECK(line.front() == a);
    CHECK(line.back() == b);
    CHECK(line.size() == std::size_t(std::max(std::abs(a.row - b.row), std::abs(a.col - b.col)) + 1));
    for (std::size_t k = 1; k < line.size(); ++k)
      CHECK(std::max(std::abs(line[k].row - line[k - 1].row), std::abs(line[k].col - line[k - 1].col)) == 1);
  }
  CHECK(line_cells({2, 2}, {2, 2}).size() == 1);
}

TEST_CASE("grid coordinates") {
  OccupancyGrid g(10, 20, 0.5);
  g.origin_x = -1.0;
  g.origin_y = 2.0;
  CHECK(g.cell_of(-1.0, 2.0) == GridCell{0, 0});
  CHECK(g.cell_of(0.99, 2.51) == GridCell{1, 3});
  const auto [x, y] = g.center({3, 4});
  CHECK(x == doctest::Approx(-1.0 + 4.5 * 0.5));
  CHECK(y == doctest::Approx(2.0 + 3.5 * 0.5));
  CHECK(g.cell_of(x, y) == GridCell{3, 4});
}

TEST_CASE("frontiers agree with brute force") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const auto g = oracle::random_tri_grid(20, rng);
    for (int m : {1, 3}) CHECK(oracle::frontiers_match(g, extract_frontiers(g, m), m));
  }
  OccupancyGrid known(6, 6, 0.25, Cell::Free);
  CHECK(extract_frontiers(known).empty());
}

TEST_CASE("frontier representatives") {
  OccupancyGrid g(5, 7, 0.25, Cell::Unknown);
  for (int c = 1; c <= 5; ++c) g.at(2, c) = Cell::Free;
  const auto fs = extract_frontiers(g);
  REQUIRE(fs.size() == 5);
  const auto reps = frontier_representatives(fs);
  REQUIRE(reps.size() == 1);
  CHECK(reps[0].cell == GridCell{2, 3});

  // Even-length run: two cells tie at the centroid, the lower column wins.
  g.at(2, 5) = Cell::Unknown;
  const auto reps2 = frontier_representatives(extract_frontiers(g));
  REQUIRE(reps2.size() == 1);
  CHECK(reps2[0].cell == GridCell{2, 2});
}

TEST_CASE("process map inflates obstacles and closes unknown") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto g = oracle::random_tri_grid(15, rng);
    const auto p = process_map(g);
    for (int r = 0; r < g.rows; ++r) {
      for (int c = 0; c < g.cols; ++c) {
        bool near_obstacle = false;
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc)
            near_obstacle = near_obstacle || (g.inside(r + dr, c + dc) && g.at(r + dr, c + dc) == Cell::Occupied);
        const bool free = g.at(r, c) == Cell::Free && !near_obstacle;
        CHECK((p.at(r, c) == Cell::Free) == free);
        CHECK(p.at(r, c) != Cell::Unknown);
      }
    }
  }
}

TEST_CASE("integration against the scene") {
  const Scene s = generate_scene(23, WorldParams::preset(WorldFamily::Office));
  OccupancyGrid g(s.ny, s.nx, s.cell_size);
  g.floor_z = s.floor_z;
  const Intrinsics k = Intrinsics::square(64);
  AgentState a = spawn_state(s);
  for (int i = 0; i < kHeadingSteps; i += 3) {
    a.heading_index = i;
    const Pose pose = agent_pose(s, a);
    const Frame f = render(s, pose, k);
    const auto before = g;
    g = integrate(g, pose, f.depth_gt, k);
    for (std::size_t c = 0; c < g.cells.size(); ++c)
      if (before.cells[c] == Cell::Occupied) CHECK(g.cells[c] == Cell::Occupied);
  }
  CHECK(g.at(g.cell_of(a.x, a.y)) == Cell::Free);
  int occ = 0, occ_ok = 0, fr = 0, fr_ok = 0;
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      if (g.at(r, c) == Cell::Occupied) {
        ++occ;
        occ_ok += s.blocked(c, r);
      } else if (g.at(r, c) == Cell::Free) {
        ++fr;
        fr_ok += !s.blocked(c, r);
      }
    }
  }
  CHECK(occ > 20);
  CHECK(fr > 20);
  CHECK(double(occ_ok) / occ >= 0.95);
  CHECK(double(fr_ok) / fr >= 0.95);

  CHECK_THROWS_AS(integrate(g, agent_pose(s, a), DepthMap(10, 10, 1.0), k), Error);
}

TEST_CASE("pgm output") {
  OccupancyGrid g(2, 3, 0.25);
  g.at(0, 0) = Cell::Free;
  g.at(1, 2) = Cell::Occupied;
  const auto path = (std::filesystem::temp_directory_path() / "deux_test_map.pgm").string();
  write_pgm(g, path);
  std::ifstream in(path, std::ios::binary);
  std::string magic;
  int w = 0, h = 0, maxv = 0;
  in >> magic >> w >> h >> maxv;
  in.get();
  CHECK(magic == "P5");
  CHECK(w == 3);
  CHECK(h == 2);
  CHECK(maxv == 255);
  std::vector<unsigned char> px(6);
  in.read(reinterpret_cast<char*>(px.data()), 6);
  CHECK(px == std::vector<unsigned char>{0, 0, 255, 128, 0, 0});
  std::filesystem::remove(path);
}
