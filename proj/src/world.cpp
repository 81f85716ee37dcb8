#include "world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <queue>
#include <random>

#include "binio.hpp"
#include "error.hpp"

namespace deux {

const char* to_string(WorldFamily f) { return f == WorldFamily::Office ? "office" : "warehouse"; }

WorldFamily world_family_from_string(const std::string& s) {
  if (s == "office") return WorldFamily::Office;
  if (s == "warehouse") return WorldFamily::Warehouse;
  fail(ErrorKind::Usage, "unknown world family '" + s + "'");
}

WorldParams WorldParams::preset(WorldFamily family) {
  WorldParams p;
  p.family = family;
  if (family == WorldFamily::Warehouse) {
    p.size_x = 44;
    p.size_y = 44;
    p.rooms_min = 2;
    p.rooms_max = 3;
    p.min_room_cells = 12;
    p.clutter_density = 0.10;
    p.noise_amplitude = 0.12;
  }
  return p;
}

void WorldParams::validate() const {
  if (size_x < 12 || size_y < 12 || size_x > 512 || size_y > 512)
    fail(ErrorKind::Domain, "world: size must be within [12, 512] cells");
  if (levels < 9 || levels > 64) fail(ErrorKind::Domain, "world: levels must be within [9, 64]");
  if (rooms_min < 1 || rooms_max < rooms_min) fail(ErrorKind::Domain, "world: invalid room count range");
  if (min_room_cells < 4) fail(ErrorKind::Domain, "world: min_room_cells must be >= 4");
  if (door_width < 3 || door_width >= min_room_cells) fail(ErrorKind::Domain, "world: door_width must be in [3, min_room_cells)");
  if (!(clutter_density >= 0.0 && clutter_density <= 0.5)) fail(ErrorKind::Domain, "world: clutter_density must be in [0, 0.5]");
  if (!(noise_amplitude >= 0.0 && noise_amplitude <= 0.5) || !(hard_noise_amplitude >= 0.0 && hard_noise_amplitude <= 0.5))
    fail(ErrorKind::Domain, "world: noise amplitudes must be in [0, 0.5]");
  if (hard_rooms < 0) fail(ErrorKind::Domain, "world: hard_rooms must be >= 0");
}

bool Scene::occupied(int x, int y, int z) const {
  if (x < 0 || y < 0 || z < 0 || x >= nx || y >= ny || z >= nz) return true;
  return voxel(x, y, z).occupied;
}

bool Scene::blocked(int col, int row) const {
  if (col < 0 || row < 0 || col >= nx || row >= ny) return true;
  for (int z = 1; z < nz - 1; ++z) {
    if (voxel(col, row, z).occupied) return true;
  }
  return false;
}

int Scene::free_cell_count() const {
  int n = 0;
  for (int r = 0; r < ny; ++r)
    for (int c = 0; c < nx; ++c) n += blocked(c, r) ? 0 : 1;
  return n;
}

int Scene::room_at(double x, double y) const {
  const int c = static_cast<int>(std::floor(x / cell_size)), r = static_cast<int>(std::floor(y / cell_size));
  if (c < 0 || r < 0 || c >= nx || r >= ny) return -1;
  return room_of_cell[std::size_t(r) * nx + c];
}

std::vector<int> largest_free_component(const Scene& scene) {
  const int n = scene.nx * scene.ny;
  std::vector<int> label(n, -1);
  std::vector<int> best;
  int next = 0;
  for (int start = 0; start < n; ++start) {
    if (label[start] >= 0 || scene.blocked(start % scene.nx, start / scene.nx)) continue;
    std::vector<int> comp;
    std::queue<int> q;
    q.push(start);
    label[start] = next;
    while (!q.empty()) {
      const int cur = q.front();
      q.pop();
      comp.push_back(cur);
      const int c = cur % scene.nx, r = cur / scene.nx;
      const int nb[4][2] = {{c + 1, r}, {c - 1, r}, {c, r + 1}, {c, r - 1}};
      for (const auto& p : nb) {
        if (scene.blocked(p[0], p[1])) continue;
        const int id = p[1] * scene.nx + p[0];
        if (label[id] >= 0) continue;
        label[id] = next;
        q.push(id);
      }
    }
    ++next;
    if (comp.size() > best.size()) best = std::move(comp);
  }
  std::sort(best.begin(), best.end());
  return best;
}

namespace {

struct Rect {
  int x0, y0, x1, y1;  // inclusive
  int w() const { return x1 - x0 + 1; }
  int h() const { return y1 - y0 + 1; }
};

using Rng = std::mt19937_64;

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
double uniform_real(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

std::array<float, 3> hsv_color(double h, double s, double v) {
  const double c = v * s, hp = std::fmod(h, 360.0) / 60.0, x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) r = c, g = x;
  else if (hp < 2) r = x, g = c;
  else if (hp < 3) g = c, b = x;
  else if (hp < 4) g = x, b = c;
  else if (hp < 5) r = x, b = c;
  else r = c, b = x;
  const double m = v - c;
  return {float(r + m), float(g + m), float(b + m)};
}

std::array<float, 3> noisy(Rng& rng, const std::array<float, 3>& base, double amp) {
  std::array<float, 3> out;
  for (int c = 0; c < 3; ++c) out[c] = float(std::clamp(base[c] + uniform_real(rng, -amp, amp), 0.0, 1.0));
  return out;
}

struct RoomStyle {
  std::array<float, 3> wall, floor, ceiling;
  double amp;
};

std::optional<Scene> try_generate(std::uint64_t seed, const WorldParams& p, Rng& rng) {
  Scene s;
  s.seed = seed;
  s.nx = p.size_x;
  s.ny = p.size_y;
  s.nz = p.levels;
  s.cell_size = kCellSize;
  s.floor_z = kCellSize;
  s.ceiling_z = (p.levels - 1) * kCellSize;
  s.voxels.assign(std::size_t(s.nx) * s.ny * s.nz, Voxel{});
  s.room_of_cell.assign(std::size_t(s.nx) * s.ny, -1);

  // Walls as a 2D plan first: 1 = wall column.
  std::vector<std::uint8_t> wall(std::size_t(s.nx) * s.ny, 0), door(std::size_t(s.nx) * s.ny, 0);
  auto at = [&](std::vector<std::uint8_t>& v, int c, int r) -> std::uint8_t& { return v[std::size_t(r) * s.nx + c]; };
  for (int c = 0; c < s.nx; ++c) at(wall, c, 0) = at(wall, c, s.ny - 1) = 1;
  for (int r = 0; r < s.ny; ++r) at(wall, 0, r) = at(wall, s.nx - 1, r) = 1;

  const int target_rooms = uniform_int(rng, p.rooms_min, p.rooms_max);
  std::vector<Rect> rooms{{1, 1, s.nx - 2, s.ny - 2}};
  auto near_door = [&](int c, int r) {
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) {
        const int cc = c + dc, rr = r + dr;
        if (cc >= 0 && rr >= 0 && cc < s.nx && rr < s.ny && at(door, cc, rr)) return true;
      }
    return false;
  };
  while (static_cast<int>(rooms.size()) < target_rooms) {
    // Split the largest splittable room.
    int pick = -1;
    for (int i = 0; i < static_cast<int>(rooms.size()); ++i) {
      const Rect& r = rooms[i];
      if (std::max(r.w(), r.h()) < 2 * p.min_room_cells + 1) continue;
      if (pick < 0 || r.w() * r.h() > rooms[pick].w() * rooms[pick].h()) pick = i;
    }
    if (pick < 0) break;
    const Rect r = rooms[pick];
    const bool vertical = r.w() >= r.h();  // vertical wall splits along x
    const int span_lo = (vertical ? r.x0 : r.y0) + p.min_room_cells;
    const int span_hi = (vertical ? r.x1 : r.y1) - p.min_room_cells;
    int cut = -1;
    for (int attempt = 0; attempt < 32 && cut < 0; ++attempt) {
      const int c = uniform_int(rng, span_lo, span_hi);
      const bool blocks = vertical ? (near_door(c, r.y0 - 1) || near_door(c, r.y1 + 1))
                                   : (near_door(r.x0 - 1, c) || near_door(r.x1 + 1, c));
      if (!blocks) cut = c;
    }
    if (cut < 0) break;
    const int len = vertical ? r.h() : r.w();
    const int door_at = uniform_int(rng, 1, len - p.door_width - 1);
    for (int i = 0; i < len; ++i) {
      const int c = vertical ? cut : r.x0 + i;
      const int rr = vertical ? r.y0 + i : cut;
      if (i >= door_at && i < door_at + p.door_width) at(door, c, rr) = 1;
      else at(wall, c, rr) = 1;
    }
    Rect a = r, b = r;
    if (vertical) a.x1 = cut - 1, b.x0 = cut + 1;
    else a.y1 = cut - 1, b.y0 = cut + 1;
    rooms[pick] = a;
    rooms.push_back(b);
  }
  for (std::size_t i = 0; i < rooms.size(); ++i) {
    const Rect& r = rooms[i];
    for (int rr = r.y0; rr <= r.y1; ++rr)
      for (int c = r.x0; c <= r.x1; ++c) s.room_of_cell[std::size_t(rr) * s.nx + c] = static_cast<std::int16_t>(i);
  }

  // Styles; a few rooms get strong texture noise.
  s.hard_room.assign(rooms.size(), 0);
  std::vector<int> order(rooms.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::shuffle(order.begin(), order.end(), rng);
  for (int i = 0; i < std::min<int>(p.hard_rooms, static_cast<int>(order.size())); ++i) s.hard_room[order[i]] = 1;
  std::vector<RoomStyle> styles;
  for (std::size_t i = 0; i < rooms.size(); ++i) {
    const double hue = uniform_real(rng, 0.0, 360.0);
    RoomStyle st;
    st.wall = hsv_color(hue, uniform_real(rng, 0.2, 0.5), uniform_real(rng, 0.55, 0.8));
    st.floor = hsv_color(std::fmod(hue + 150.0, 360.0), uniform_real(rng, 0.2, 0.4), uniform_real(rng, 0.35, 0.55));
    st.ceiling = hsv_color(hue, 0.05, 0.85);
    st.amp = s.hard_room[i] ? p.hard_noise_amplitude : p.noise_amplitude;
    styles.push_back(st);
  }
  auto room_near = [&](int c, int r) {
    const int id = s.room_of_cell[std::size_t(r) * s.nx + c];
    if (id >= 0) return id;
    const int nb[8][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {-1, -1}, {1, -1}, {-1, 1}};
    for (const auto& d : nb) {
      const int cc = c + d[0], rr = r + d[1];
      if (cc < 0 || rr < 0 || cc >= s.nx || rr >= s.ny) continue;
      const int nid = s.room_of_cell[std::size_t(rr) * s.nx + cc];
      if (nid >= 0) return nid;
    }
    return 0;
  };

  for (int r = 0; r < s.ny; ++r) {
    for (int c = 0; c < s.nx; ++c) {
      const RoomStyle& st = styles[room_near(c, r)];
      for (int z = 0; z < s.nz; ++z) {
        Voxel& v = s.voxel(c, r, z);
        if (z == 0) {
          v.occupied = true;
          v.albedo = noisy(rng, st.floor, st.amp);
        } else if (z == s.nz - 1) {
          v.occupied = true;
          v.albedo = noisy(rng, st.ceiling, st.amp);
        } else if (at(wall, c, r)) {
          v.occupied = true;
          v.albedo = noisy(rng, st.wall, st.amp);
        }
      }
    }
  }

  // Clutter boxes, never disconnecting the free space.
  int interior = 0;
  for (int r = 0; r < s.ny; ++r)
    for (int c = 0; c < s.nx; ++c) interior += (!at(wall, c, r) && !at(door, c, r)) ? 1 : 0;
  const int clutter_target = static_cast<int>(std::round(p.clutter_density * interior));
  int placed = 0;
  int base_free = static_cast<int>(largest_free_component(s).size());
  for (int attempt = 0; placed < clutter_target && attempt < 60 * std::max(clutter_target, 1); ++attempt) {
    const int fw = uniform_int(rng, 1, 2), fh = uniform_int(rng, 1, 2);
    const int c0 = uniform_int(rng, 2, s.nx - 3 - fw), r0 = uniform_int(rng, 2, s.ny - 3 - fh);
    const bool pillar = uniform_real(rng, 0.0, 1.0) < 0.2;
    const int height = pillar ? s.nz - 2 : uniform_int(rng, 1, 6);
    const double hue = uniform_real(rng, 0.0, 360.0);
    const auto color = hsv_color(hue, uniform_real(rng, 0.3, 0.7), uniform_real(rng, 0.4, 0.9));
    bool ok = true;
    for (int r = r0 - 1; r <= r0 + fh && ok; ++r)
      for (int c = c0 - 1; c <= c0 + fw && ok; ++c)
        if (at(wall, c, r) || near_door(c, r) || s.blocked(c, r)) ok = false;
    if (!ok) continue;
    for (int r = r0; r < r0 + fh; ++r)
      for (int c = c0; c < c0 + fw; ++c)
        for (int z = 1; z <= height; ++z) s.voxel(c, r, z).occupied = true;
    const int now_free = static_cast<int>(largest_free_component(s).size());
    if (now_free != base_free - fw * fh) {
      for (int r = r0; r < r0 + fh; ++r)
        for (int c = c0; c < c0 + fw; ++c)
          for (int z = 1; z <= height; ++z) s.voxel(c, r, z).occupied = false;
      continue;
    }
    const double amp = styles[room_near(c0, r0)].amp;
    for (int r = r0; r < r0 + fh; ++r)
      for (int c = c0; c < c0 + fw; ++c)
        for (int z = 1; z <= height; ++z) s.voxel(c, r, z).albedo = noisy(rng, color, amp);
    base_free = now_free;
    placed += fw * fh;
  }

  const auto comp = largest_free_component(s);
  if (comp.size() < 100) return std::nullopt;
  std::vector<int> clear;
  for (int id : comp) {
    const int c = id % s.nx, r = id / s.nx;
    bool ok = true;
    for (int dr = -1; dr <= 1 && ok; ++dr)
      for (int dc = -1; dc <= 1 && ok; ++dc) ok = !s.blocked(c + dc, r + dr);
    if (ok) clear.push_back(id);
  }
  if (clear.empty()) return std::nullopt;
  const int spawn = clear[uniform_int(rng, 0, static_cast<int>(clear.size()) - 1)];
  s.spawn_col = spawn % s.nx;
  s.spawn_row = spawn / s.nx;
  s.spawn_heading = uniform_int(rng, 0, kHeadingSteps - 1);
  return s;
}

}  // namespace

Scene generate_scene(std::uint64_t seed, const WorldParams& params) {
  params.validate();
  Rng rng(seed);
  for (int attempt = 0; attempt < 8; ++attempt) {
    if (auto s = try_generate(seed, params, rng)) return std::move(*s);
  }
  fail(ErrorKind::Generation, "generate_scene: could not satisfy scene invariants for seed " + std::to_string(seed));
}

const char* to_string(Action a) {
  switch (a) {
    case Action::Forward: return "forward";
    case Action::TurnLeft: return "turn_left";
    case Action::TurnRight: return "turn_right";
    case Action::Stop: return "stop";
  }
  return "?";
}

double AgentState::heading() const { return heading_index * kTurnDegrees * std::numbers::pi / 180.0; }

bool position_free(const Scene& scene, double x, double y) {
  const int c = static_cast<int>(std::floor(x / scene.cell_size));
  const int r = static_cast<int>(std::floor(y / scene.cell_size));
  if (scene.blocked(c, r)) return false;
  for (int dr = -1; dr <= 1; ++dr) {
    for (int dc = -1; dc <= 1; ++dc) {
      if ((dr == 0 && dc == 0) || !scene.blocked(c + dc, r + dr)) continue;
      const double x0 = (c + dc) * scene.cell_size, y0 = (r + dr) * scene.cell_size;
      const double px = std::clamp(x, x0, x0 + scene.cell_size), py = std::clamp(y, y0, y0 + scene.cell_size);
      if (std::hypot(x - px, y - py) < kAgentRadius) return false;
    }
  }
  return true;
}

AgentState spawn_state(const Scene& scene) {
  AgentState s;
  s.x = (scene.spawn_col + 0.5) * scene.cell_size;
  s.y = (scene.spawn_row + 0.5) * scene.cell_size;
  s.heading_index = scene.spawn_heading;
  return s;
}

AgentState step(const Scene& scene, const AgentState& state, Action a) {
  AgentState next = state;
  next.collided_last = false;
  switch (a) {
    case Action::TurnLeft:
      next.heading_index = (state.heading_index + 1) % kHeadingSteps;
      break;
    case Action::TurnRight:
      next.heading_index = (state.heading_index + kHeadingSteps - 1) % kHeadingSteps;
      break;
    case Action::Forward: {
      const double h = state.heading();
      const double x = state.x + kForwardStep * std::cos(h), y = state.y + kForwardStep * std::sin(h);
      if (position_free(scene, x, y)) {
        next.x = x;
        next.y = y;
      } else {
        next.collided_last = true;
      }
      break;
    }
    case Action::Stop:
      break;
  }
  return next;
}

Pose agent_pose(const Scene& scene, const AgentState& state) {
  const double h = state.heading(), ch = std::cos(h), sh = std::sin(h);
  Pose p;
  p.rotation << sh, 0.0, ch,  //
      -ch, 0.0, sh,           //
      0.0, -1.0, 0.0;
  p.translation = {state.x, state.y, scene.floor_z + kCameraHeight};
  return p;
}

namespace {

struct Hit {
  double t;
  int x, y, z;
  int axis;  // 0,1,2
  int sign;  // direction of travel along axis
};

Hit trace_ray(const Scene& s, const Eigen::Vector3d& o, const Eigen::Vector3d& d) {
  const double cs = s.cell_size;
  int ix = static_cast<int>(std::floor(o.x() / cs));
  int iy = static_cast<int>(std::floor(o.y() / cs));
  int iz = static_cast<int>(std::floor(o.z() / cs));
  int step[3];
  double tmax[3], tdelta[3];
  const int idx[3] = {ix, iy, iz};
  for (int a = 0; a < 3; ++a) {
    if (d[a] > 0) {
      step[a] = 1;
      tmax[a] = ((idx[a] + 1) * cs - o[a]) / d[a];
      tdelta[a] = cs / d[a];
    } else if (d[a] < 0) {
      step[a] = -1;
      tmax[a] = (idx[a] * cs - o[a]) / d[a];
      tdelta[a] = -cs / d[a];
    } else {
      step[a] = 0;
      tmax[a] = std::numeric_limits<double>::infinity();
      tdelta[a] = std::numeric_limits<double>::infinity();
    }
  }
  for (int guard = 0; guard < 4 * (s.nx + s.ny + s.nz) + 8; ++guard) {
    int a = 0;
    if (tmax[1] < tmax[a]) a = 1;
    if (tmax[2] < tmax[a]) a = 2;
    const double t = tmax[a];
    if (a == 0) ix += step[0];
    else if (a == 1) iy += step[1];
    else iz += step[2];
    tmax[a] += tdelta[a];
    if (ix < 0 || iy < 0 || iz < 0 || ix >= s.nx || iy >= s.ny || iz >= s.nz) return {t, -1, -1, -1, a, step[a]};
    if (s.voxels[(std::size_t(iz) * s.ny + iy) * s.nx + ix].occupied) return {t, ix, iy, iz, a, step[a]};
  }
  return {std::numeric_limits<double>::infinity(), -1, -1, -1, 0, 0};
}

double face_shade(int axis, int sign) {
  if (axis == 0) return 0.8;
  if (axis == 1) return 0.9;
  return sign < 0 ? 1.0 : 0.7;  // looking down at a top face, or up at the ceiling
}

}  // namespace

Frame render(const Scene& scene, const Pose& pose, const Intrinsics& k, int timestep) {
  k.validate();
  const Eigen::Vector3d o = pose.translation;
  const int cx = static_cast<int>(std::floor(o.x() / scene.cell_size));
  const int cy = static_cast<int>(std::floor(o.y() / scene.cell_size));
  const int cz = static_cast<int>(std::floor(o.z() / scene.cell_size));
  if (scene.occupied(cx, cy, cz)) fail(ErrorKind::Domain, "render: camera is inside an occupied voxel");

  Frame f;
  f.rgb = Image(k.width, k.height);
  f.depth_gt = DepthMap(k.width, k.height);
  f.pose = pose;
  f.intrinsics = k;
  f.timestep = timestep;
  for (int row = 0; row < k.height; ++row) {
    for (int col = 0; col < k.width; ++col) {
      const Eigen::Vector3d dir = pose.rotation * Eigen::Vector3d((col - k.cx) / k.fx, (row - k.cy) / k.fy, 1.0);
      const Hit hit = trace_ray(scene, o, dir);
      const std::size_t i = std::size_t(row) * k.width + col;
      f.depth_gt.values[i] = std::clamp(hit.t, kMinDepth, kMaxDepth);
      double* px = &f.rgb.values[i * 3];
      if (hit.x < 0) {
        px[0] = px[1] = px[2] = 0.0;
        continue;
      }
      const auto& alb = scene.voxel(hit.x, hit.y, hit.z).albedo;
      const double shade = face_shade(hit.axis, hit.sign);
      for (int c = 0; c < 3; ++c) px[c] = std::round(std::clamp(alb[c] * shade, 0.0, 1.0) * 255.0) / 255.0;
    }
  }
  return f;
}

namespace {
constexpr char kSceneMagic[9] = "DEUXWRLD";
constexpr std::uint32_t kSceneVersion = 1;
}  // namespace

void save_scene(const Scene& s, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorKind::Io, "save_scene: cannot open " + path);
  binio::put_magic(os, kSceneMagic);
  binio::put<std::uint32_t>(os, kSceneVersion);
  binio::put<std::uint32_t>(os, s.nx);
  binio::put<std::uint32_t>(os, s.ny);
  binio::put<std::uint32_t>(os, s.nz);
  binio::put<double>(os, s.cell_size);
  binio::put<double>(os, s.floor_z);
  binio::put<double>(os, s.ceiling_z);
  binio::put<std::uint64_t>(os, s.seed);
  binio::put<std::int32_t>(os, s.spawn_col);
  binio::put<std::int32_t>(os, s.spawn_row);
  binio::put<std::int32_t>(os, s.spawn_heading);
  binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(s.hard_room.size()));
  for (auto h : s.hard_room) binio::put<std::uint8_t>(os, h);
  for (auto r : s.room_of_cell) binio::put<std::int16_t>(os, r);
  for (const auto& v : s.voxels) {
    binio::put<std::uint8_t>(os, v.occupied ? 1 : 0);
    for (float c : v.albedo) binio::put<float>(os, c);
  }
  if (!os) fail(ErrorKind::Io, "save_scene: write failed for " + path);
}

Scene load_scene(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::Io, "load_scene: cannot open " + path);
  binio::expect_magic(is, kSceneMagic, "scene file");
  if (binio::get<std::uint32_t>(is) != kSceneVersion) fail(ErrorKind::Format, "scene file: unsupported version");
  Scene s;
  s.nx = static_cast<int>(binio::get<std::uint32_t>(is));
  s.ny = static_cast<int>(binio::get<std::uint32_t>(is));
  s.nz = static_cast<int>(binio::get<std::uint32_t>(is));
  if (s.nx <= 0 || s.ny <= 0 || s.nz <= 0 || s.nx > 4096 || s.ny > 4096 || s.nz > 256)
    fail(ErrorKind::Format, "scene file: implausible dimensions");
  s.cell_size = binio::get<double>(is);
  s.floor_z = binio::get<double>(is);
  s.ceiling_z = binio::get<double>(is);
  s.seed = binio::get<std::uint64_t>(is);
  s.spawn_col = binio::get<std::int32_t>(is);
  s.spawn_row = binio::get<std::int32_t>(is);
  s.spawn_heading = binio::get<std::int32_t>(is);
  const auto rooms = binio::get<std::uint32_t>(is);
  if (rooms > 65536) fail(ErrorKind::Format, "scene file: implausible room count");
  s.hard_room.resize(rooms);
  for (auto& h : s.hard_room) h = binio::get<std::uint8_t>(is);
  s.room_of_cell.resize(std::size_t(s.nx) * s.ny);
  for (auto& r : s.room_of_cell) r = binio::get<std::int16_t>(is);
  s.voxels.resize(std::size_t(s.nx) * s.ny * s.nz);
  for (auto& v : s.voxels) {
    v.occupied = binio::get<std::uint8_t>(is) != 0;
    for (float& c : v.albedo) c = binio::get<float>(is);
  }
  return s;
}

}  // namespace deux
