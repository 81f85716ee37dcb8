#include <doctest.h>

#include <Eigen/LU>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "error.hpp"
#include "world.hpp"

using namespace deux;

namespace {

const Scene& office() {
  static const Scene s = generate_scene(17, WorldParams::preset(WorldFamily::Office));
  return s;
}

// Fine ray march; returns camera-z depth of the first occupied voxel.
double marched_depth(const Scene& s, const Pose& pose, const Intrinsics& k, int row, int col) {
  const Eigen::Vector3d ray((col - k.cx) / k.fx, (row - k.cy) / k.fy, 1.0);
  const Eigen::Vector3d dir = pose.rotation * ray;
  const double step = 1e-3;
  for (double z = step; z < 20.0; z += step) {
    const Eigen::Vector3d p = pose.translation + dir * z;
    const int x = int(std::floor(p.x() / s.cell_size)), y = int(std::floor(p.y() / s.cell_size));
    const int h = int(std::floor(p.z() / s.cell_size));
    if (s.occupied(x, y, h)) return z;
  }
  return 20.0;
}

}  // namespace

TEST_CASE("scene generation is deterministic and closed") {
  const auto p = WorldParams::preset(WorldFamily::Office);
  const Scene a = generate_scene(17, p);
  const Scene& b = office();
  REQUIRE(a.voxels.size() == b.voxels.size());
  bool same = true;
  for (std::size_t i = 0; i < a.voxels.size(); ++i)
    same = same && a.voxels[i].occupied == b.voxels[i].occupied && a.voxels[i].albedo == b.voxels[i].albedo;
  CHECK(same);
  CHECK(a.spawn_col == b.spawn_col);

  const Scene c = generate_scene(18, p);
  bool differs = false;
  for (std::size_t i = 0; i < a.voxels.size() && !differs; ++i) differs = a.voxels[i].occupied != c.voxels[i].occupied;
  CHECK(differs);

  for (int x = 0; x < b.nx; ++x) {
    CHECK(b.blocked(x, 0));
    CHECK(b.blocked(x, b.ny - 1));
  }
  for (int y = 0; y < b.ny; ++y) {
    CHECK(b.blocked(0, y));
    CHECK(b.blocked(b.nx - 1, y));
  }
  CHECK(b.blocked(-1, 3));
  CHECK_FALSE(b.blocked(b.spawn_col, b.spawn_row));
}

TEST_CASE("both families generate across seeds") {
  for (auto fam : {WorldFamily::Office, WorldFamily::Warehouse}) {
    for (std::uint64_t seed = 100; seed < 106; ++seed) {
      const Scene s = generate_scene(seed, WorldParams::preset(fam));
      const auto comp = largest_free_component(s);
      CHECK(comp.size() > std::size_t(s.nx * s.ny / 4));
      CHECK(std::binary_search(comp.begin(), comp.end(), s.spawn_row * s.nx + s.spawn_col));
      std::set<int> rooms;
      for (auto r : s.room_of_cell)
        if (r >= 0) rooms.insert(r);
      CHECK(int(rooms.size()) == int(s.hard_room.size()));
    }
  }
}

TEST_CASE("largest free component is 4-connected and maximal") {
  const Scene& s = office();
  const auto comp = largest_free_component(s);
  const std::set<int> in(comp.begin(), comp.end());
  for (int id : comp) {
    CHECK_FALSE(s.blocked(id % s.nx, id / s.nx));
    const int c = id % s.nx, r = id / s.nx;
    const int nb[4][2] = {{c + 1, r}, {c - 1, r}, {c, r + 1}, {c, r - 1}};
    for (const auto& p : nb)
      if (!s.blocked(p[0], p[1])) CHECK(in.count(p[1] * s.nx + p[0]) == 1);
  }
  CHECK(int(comp.size()) <= s.free_cell_count());
}

TEST_CASE("world params validation") {
  WorldParams p;
  p.size_x = 4;
  CHECK_THROWS_AS(p.validate(), Error);
  p = WorldParams{};
  p.door_width = p.min_room_cells;
  CHECK_THROWS_AS(p.validate(), Error);
  p = WorldParams{};
  p.clutter_density = 0.9;
  CHECK_THROWS_AS(p.validate(), Error);
  CHECK(world_family_from_string("warehouse") == WorldFamily::Warehouse);
  CHECK_THROWS_AS(world_family_from_string("castle"), Error);
}

TEST_CASE("agent motion") {
  const Scene& s = office();
  AgentState a = spawn_state(s);
  const int h0 = a.heading_index;
  for (int i = 0; i < kHeadingSteps; ++i) a = step(s, a, Action::TurnLeft);
  CHECK(a.heading_index == h0);
  a = step(s, a, Action::TurnRight);
  CHECK(a.heading_index == (h0 + kHeadingSteps - 1) % kHeadingSteps);
  const AgentState still = step(s, a, Action::Stop);
  CHECK(still.x == a.x);
  CHECK(still.heading_index == a.heading_index);

  // Walk forward until something blocks; every successful move is one step along the heading.
  AgentState cur = spawn_state(s);
  int moves = 0;
  for (int i = 0; i < 400; ++i) {
    const AgentState next = step(s, cur, Action::Forward);
    if (next.collided_last) {
      CHECK(next.x == cur.x);
      CHECK(next.y == cur.y);
      break;
    }
    CHECK(std::hypot(next.x - cur.x, next.y - cur.y) == doctest::Approx(kForwardStep));
    CHECK(std::atan2(next.y - cur.y, next.x - cur.x) ==
          doctest::Approx(std::remainder(cur.heading(), 2 * std::numbers::pi)).epsilon(1e-9));
    CHECK(position_free(s, next.x, next.y));
    cur = next;
    ++moves;
  }
  CHECK(moves < 400);
}

TEST_CASE("agent pose looks along the heading") {
  const Scene& s = office();
  AgentState a = spawn_state(s);
  for (int i = 0; i < kHeadingSteps; ++i) {
    a.heading_index = i;
    const Pose p = agent_pose(s, a);
    CHECK((p.rotation.transpose() * p.rotation - Eigen::Matrix3d::Identity()).norm() <= 1e-12);
    CHECK(p.rotation.determinant() == doctest::Approx(1.0));
    const Eigen::Vector3d fwd = p.rotation.col(2), down = p.rotation.col(1);
    CHECK(fwd.x() == doctest::Approx(std::cos(a.heading())));
    CHECK(fwd.y() == doctest::Approx(std::sin(a.heading())));
    CHECK(down.z() == doctest::Approx(-1.0));
    CHECK(p.translation.z() == doctest::Approx(s.floor_z + kCameraHeight));
  }
}

TEST_CASE("render matches a fine ray march") {
  const Scene& s = office();
  const Intrinsics k = Intrinsics::square(48);
  AgentState a = spawn_state(s);
  for (int turn = 0; turn < 4; ++turn) {
    a.heading_index = (a.heading_index + 9) % kHeadingSteps;
    const Pose pose = agent_pose(s, a);
    const Frame f = render(s, pose, k, turn);
    CHECK(f.timestep == turn);
    for (int row = 0; row < 48; row += 7) {
      for (int col = 0; col < 48; col += 7) {
        const double oracle = std::clamp(marched_depth(s, pose, k, row, col), kMinDepth, kMaxDepth);
        // The march overshoots by at most one step along the ray.
        CHECK(std::abs(f.depth_gt.at(row, col) - oracle) <= 2e-3);
      }
    }
    for (double v : f.rgb.values) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      CHECK(std::abs(v * 255.0 - std::round(v * 255.0)) <= 1e-9);
    }
  }
  Pose inside = agent_pose(s, a);
  inside.translation = {0.1, 0.1, 1.0};
  CHECK_THROWS_AS(render(s, inside, k), Error);
}

TEST_CASE("scene files round-trip and reject corruption") {
  const Scene& s = office();
  const auto dir = std::filesystem::temp_directory_path() / "deux_test_world";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "scene.bin").string();
  save_scene(s, path);
  const Scene t = load_scene(path);
  CHECK(t.nx == s.nx);
  CHECK(t.seed == s.seed);
  CHECK(t.room_of_cell == s.room_of_cell);
  CHECK(t.hard_room == s.hard_room);
  bool same = true;
  for (std::size_t i = 0; i < s.voxels.size(); ++i)
    same = same && t.voxels[i].occupied == s.voxels[i].occupied && t.voxels[i].albedo == s.voxels[i].albedo;
  CHECK(same);

  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.put('X');
  }
  try {
    load_scene(path);
    FAIL("corrupted magic accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Format);
  }
  try {
    load_scene((dir / "missing.bin").string());
    FAIL("missing file accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Io);
  }
  std::filesystem::remove_all(dir);
}
