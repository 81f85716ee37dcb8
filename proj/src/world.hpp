#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "geometry.hpp"

namespace deux {

inline constexpr double kCellSize = 0.25;
inline constexpr double kForwardStep = 0.25;
inline constexpr int kTurnDegrees = 10;
inline constexpr int kHeadingSteps = 360 / kTurnDegrees;
inline constexpr double kCameraHeight = 1.25;  // above the floor surface
inline constexpr double kAgentRadius = 0.1;

enum class WorldFamily { Office, Warehouse };

const char* to_string(WorldFamily f);
WorldFamily world_family_from_string(const std::string& s);

struct WorldParams {
  WorldFamily family = WorldFamily::Office;
  int size_x = 48;  // cells
  int size_y = 48;
  int levels = 12;  // vertical voxel layers, floor and ceiling slabs included
  int rooms_min = 3;
  int rooms_max = 5;
  int min_room_cells = 9;  // minimum room side
  int door_width = 4;
  double clutter_density = 0.04;  // fraction of interior floor covered by boxes
  double noise_amplitude = 0.15;
  int hard_rooms = 1;
  double hard_noise_amplitude = 0.45;

  static WorldParams preset(WorldFamily family);
  void validate() const;
};

struct Voxel {
  bool occupied = false;
  std::array<float, 3> albedo{0.f, 0.f, 0.f};
};

struct Scene {
  std::uint64_t seed = 0;
  int nx = 0, ny = 0, nz = 0;
  double cell_size = kCellSize;
  double floor_z = kCellSize;  // top of the floor slab
  double ceiling_z = 0.0;      // bottom of the ceiling slab
  std::vector<Voxel> voxels;   // index (z * ny + y) * nx + x
  std::vector<std::int16_t> room_of_cell;  // per floor cell, -1 for walls
  std::vector<std::uint8_t> hard_room;     // per room id
  int spawn_col = 0, spawn_row = 0, spawn_heading = 0;

  const Voxel& voxel(int x, int y, int z) const { return voxels[(std::size_t(z) * ny + y) * nx + x]; }
  Voxel& voxel(int x, int y, int z) { return voxels[(std::size_t(z) * ny + y) * nx + x]; }
  bool occupied(int x, int y, int z) const;  // out of bounds counts as occupied
  // A floor cell is blocked if any voxel between floor and ceiling slabs is occupied.
  bool blocked(int col, int row) const;
  int free_cell_count() const;
  int room_at(double x, double y) const;
};

// Generates a closed multi-room scene. Deterministic per (seed, params).
// Throws Generation when the params cannot produce a valid scene.
Scene generate_scene(std::uint64_t seed, const WorldParams& params);

// Largest 4-connected component of unblocked floor cells (row-major cell indices, sorted).
std::vector<int> largest_free_component(const Scene& scene);

enum class Action : std::uint8_t { Forward = 0, TurnLeft = 1, TurnRight = 2, Stop = 3 };
const char* to_string(Action a);

struct AgentState {
  double x = 0.0;
  double y = 0.0;
  int heading_index = 0;  // heading = index * 10 degrees, counter-clockwise from +x
  bool collided_last = false;

  double heading() const;
  int col(double cell) const { return static_cast<int>(std::floor(x / cell)); }
  int row(double cell) const { return static_cast<int>(std::floor(y / cell)); }
};

AgentState spawn_state(const Scene& scene);
AgentState step(const Scene& scene, const AgentState& state, Action a);
// Camera pose (world-from-camera) for the agent.
Pose agent_pose(const Scene& scene, const AgentState& state);
bool position_free(const Scene& scene, double x, double y);

struct Frame {
  Image rgb;
  DepthMap depth_gt;
  Pose pose;
  Intrinsics intrinsics;
  int timestep = 0;
};

// Ray-voxel traversal; depth is camera z clipped to [0.1, 10]. Colors are quantized to 8 bits.
Frame render(const Scene& scene, const Pose& pose, const Intrinsics& k, int timestep = 0);

void save_scene(const Scene& scene, const std::string& path);
Scene load_scene(const std::string& path);

}  // namespace deux
