#include "pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "binio.hpp"
#include "error.hpp"
#include "parallel.hpp"

namespace deux {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t derive_seed(std::uint64_t master, std::string_view stream, std::uint64_t index) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : stream) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(master) ^ h) ^ index);
}

std::optional<double> LogEntry::reward() const {
  if (!delta) return std::nullopt;
  return deux::reward(*delta);
}

OccupancyGrid GridSpec::empty_grid() const {
  OccupancyGrid g(rows, cols, resolution_m);
  g.floor_z = floor_z;
  g.origin_x = origin_x;
  g.origin_y = origin_y;
  return g;
}

Frame EpisodeRecord::frame(std::size_t i) const {
  if (i >= frame_timesteps.size()) fail(ErrorKind::Usage, "episode frame index out of range");
  if (!source) fail(ErrorKind::Usage, "episode has no frame source");
  return source(frame_timesteps[i], poses[i]);
}

double EpisodeRecord::episode_return() const {
  double j = 0.0;
  for (const auto& e : log)
    if (auto r = e.reward()) j += *r;
  return j;
}

FrameSource scene_source(std::shared_ptr<const Scene> scene, const Intrinsics& k) {
  return [scene = std::move(scene), k](int timestep, const Pose& pose) { return render(*scene, pose, k, timestep); };
}

EpisodeResult collect_episode(std::shared_ptr<const Scene> scene, PolicyKind policy, const PolicyConfig& config,
                              const EpisodeBudget& budget, std::uint64_t seed, const CollectOptions& options) {
  budget.validate();
  options.intrinsics.validate();
  const Intrinsics& k = options.intrinsics;
  auto pol = make_policy(policy, config, *scene, derive_seed(seed, "policy"));
  Rng sparse_rng(derive_seed(seed, "sparse"));

  EpisodeResult out;
  EpisodeRecord& rec = out.record;
  rec.scene_seed = scene->seed;
  rec.policy = policy;
  rec.seed = seed;
  rec.intrinsics = k;
  rec.grid = {scene->ny, scene->nx, scene->cell_size, scene->floor_z, 0.0, 0.0};
  OccupancyGrid map = rec.grid.empty_grid();
  AgentState state = spawn_state(*scene);
  for (int t = 0; t < budget.max_steps; ++t) {
    const Pose pose = agent_pose(*scene, state);
    const Frame frame = render(*scene, pose, k, t);
    SparseSample sample = sample_sparse_depth(frame, options.sparse_points, sparse_rng);
    map = integrate(std::move(map), pose, frame.depth_gt, k);
    const Decision d = pol->decide(Observation{t, state, frame, sample.z, map});
    if (d.action == Action::Stop && t == 0) fail(ErrorKind::Precondition, "empty episode: policy stopped at t=0");
    if (sample.corner_count >= options.min_sparse_points) {
      rec.frame_timesteps.push_back(t);
      rec.poses.push_back(pose);
      rec.sparse.push_back(std::move(sample.z));
    }
    rec.log.push_back({t, d.action, state.x, state.y, state.heading_index, d.delta, d.target});
    if (d.action == Action::Stop) break;
    state = step(*scene, state, d.action);
  }
  rec.source = scene_source(std::move(scene), k);
  out.final_map = std::move(map);
  return out;
}

std::vector<std::array<std::size_t, 3>> episode_triplets(const EpisodeRecord& record) {
  std::vector<std::array<std::size_t, 3>> out;
  const auto& ts = record.frame_timesteps;
  for (std::size_t i = 2; i < ts.size(); ++i)
    if (ts[i - 1] == ts[i] - 1 && ts[i - 2] == ts[i] - 2) out.push_back({i - 2, i - 1, i});
  return out;
}

TrainingTriplet make_triplet(const EpisodeRecord& record, const std::array<std::size_t, 3>& idx) {
  return {record.frame(idx[2]), record.frame(idx[1]), record.frame(idx[0]), record.sparse[idx[2]]};
}

std::vector<TrainingTriplet> sample_triplets(std::span<const EpisodeRecord> records, int count) {
  std::vector<std::pair<std::size_t, std::array<std::size_t, 3>>> all;
  for (std::size_t e = 0; e < records.size(); ++e)
    for (const auto& t : episode_triplets(records[e])) all.emplace_back(e, t);
  std::vector<TrainingTriplet> out;
  if (all.empty() || count <= 0) return out;
  const std::size_t n = std::min<std::size_t>(all.size(), std::size_t(count));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = static_cast<std::size_t>((double(i) + 0.5) * double(all.size()) / double(n));
    out.push_back(make_triplet(records[all[j].first], all[j].second));
  }
  return out;
}

// ---- serialization ----

namespace {

std::string num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <typename T>
T parse_num(std::string_view s, const std::string& what) {
  T v{};
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) fail(ErrorKind::Format, what + ": bad number '" + std::string(s) + "'");
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Format, "missing file " + path.string());
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) {
    if (!l.empty() && l.back() == '\r') l.pop_back();
    if (!l.empty()) lines.push_back(l);
  }
  return lines;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Format, "missing file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorKind::Io, "write failed: " + path.string());
}

Action action_from_string(const std::string& s) {
  for (Action a : {Action::Forward, Action::TurnLeft, Action::TurnRight, Action::Stop})
    if (s == to_string(a)) return a;
  fail(ErrorKind::Format, "unknown action '" + s + "'");
}

std::string frame_name(const char* stem, int t, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%05d.%s", stem, t, ext);
  return buf;
}

constexpr const char* kLogHeader = "timestep,action,x,y,heading,delta,reward,target_row,target_col";
constexpr const char* kPoseHeader = "timestep,r00,r01,r02,tx,r10,r11,r12,ty,r20,r21,r22,tz";

}  // namespace

void write_ppm(const Image& image, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path);
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  std::vector<unsigned char> bytes(image.values.size());
  for (std::size_t i = 0; i < bytes.size(); ++i)
    bytes[i] = static_cast<unsigned char>(std::lround(std::clamp(image.values[i], 0.0, 1.0) * 255.0));
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) fail(ErrorKind::Io, "write failed: " + path);
}

Image read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Format, "missing file " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (!in || magic != "P6" || w <= 0 || h <= 0 || maxval != 255) fail(ErrorKind::Format, "bad PPM header in " + path);
  in.get();
  std::vector<unsigned char> bytes(std::size_t(w) * h * 3);
  in.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!in) fail(ErrorKind::Format, "truncated PPM " + path);
  Image img(w, h);
  for (std::size_t i = 0; i < bytes.size(); ++i) img.values[i] = bytes[i] / 255.0;
  return img;
}

void write_depth_bin(const DepthMap& depth, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path);
  binio::put_magic(out, "DEUXDPTH");
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(depth.height));
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(depth.width));
  for (double v : depth.values) binio::put<float>(out, static_cast<float>(v));
  if (!out) fail(ErrorKind::Io, "write failed: " + path);
}

DepthMap read_depth_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Format, "missing file " + path);
  binio::expect_magic(in, "DEUXDPTH", path.c_str());
  const auto h = binio::get<std::uint32_t>(in);
  const auto w = binio::get<std::uint32_t>(in);
  if (h == 0 || w == 0 || h > 16384 || w > 16384) fail(ErrorKind::Format, "bad depth dimensions in " + path);
  DepthMap d{int(w), int(h)};
  for (double& v : d.values) v = binio::get<float>(in);
  return d;
}

void write_dataset(std::span<const EpisodeRecord> records, const std::string& dir, const std::string& config_hash) {
  const fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + dir + ": " + ec.message());
  json episodes = json::array();
  for (std::size_t e = 0; e < records.size(); ++e) {
    const EpisodeRecord& rec = records[e];
    const std::string name = "ep_" + std::to_string(e);
    const fs::path ep = root / name;
    fs::create_directories(ep, ec);
    if (ec) fail(ErrorKind::Io, "cannot create " + ep.string());
    write_text(ep / "intrinsics.json", intrinsics_to_json(rec.intrinsics));
    std::string poses = std::string(kPoseHeader) + "\n";
    for (std::size_t i = 0; i < rec.frame_count(); ++i) {
      const int t = rec.frame_timesteps[i];
      const Frame f = rec.frame(i);
      write_ppm(f.rgb, (ep / frame_name("frame", t, "ppm")).string());
      write_depth_bin(f.depth_gt, (ep / frame_name("depth", t, "bin")).string());
      std::string sp = "row,col,depth_m\n";
      for (const auto& p : rec.sparse[i].points)
        sp += std::to_string(p.row) + "," + std::to_string(p.col) + "," + num(p.depth_m) + "\n";
      write_text(ep / frame_name("sparse", t, "csv"), sp);
      poses += pose_to_csv_row(t, rec.poses[i]) + "\n";
    }
    write_text(ep / "poses.csv", poses);
    std::string log = std::string(kLogHeader) + "\n";
    for (const auto& l : rec.log) {
      log += std::to_string(l.timestep) + "," + to_string(l.action) + "," + num(l.x) + "," + num(l.y) + "," +
             std::to_string(l.heading_index * kTurnDegrees) + ",";
      log += (l.delta ? num(*l.delta) : "") + "," + (l.delta ? num(reward(*l.delta)) : "") + ",";
      log += (l.target ? std::to_string(l.target->row) + "," + std::to_string(l.target->col) : ",") + "\n";
    }
    write_text(ep / "log.csv", log);
    episodes.push_back({{"dir", name},
                        {"scene_seed", rec.scene_seed},
                        {"policy", to_string(rec.policy)},
                        {"seed", rec.seed},
                        {"frames", rec.frame_count()},
                        {"steps", rec.log.size()},
                        {"grid",
                         {{"rows", rec.grid.rows},
                          {"cols", rec.grid.cols},
                          {"resolution_m", rec.grid.resolution_m},
                          {"floor_z", rec.grid.floor_z},
                          {"origin_x", rec.grid.origin_x},
                          {"origin_y", rec.grid.origin_y}}}});
  }
  const json manifest{{"format", "deux-dataset"},
                      {"version", kDatasetVersion},
                      {"config_hash", config_hash},
                      {"episodes", episodes}};
  write_text(root / "manifest.json", manifest.dump(2) + "\n");
}

DatasetContents read_dataset(const std::string& dir) {
  const fs::path root(dir);
  DatasetContents out;
  try {
    const json m = json::parse(read_text(root / "manifest.json"));
    if (m.value("format", "") != "deux-dataset") fail(ErrorKind::Format, "not a dataset manifest: " + dir);
    out.version = m.at("version").get<int>();
    if (out.version != kDatasetVersion)
      fail(ErrorKind::Format, "dataset version " + std::to_string(out.version) + " is not supported (expected " +
                                  std::to_string(kDatasetVersion) + ")");
    out.config_hash = m.at("config_hash").get<std::string>();
    for (const auto& e : m.at("episodes")) {
      EpisodeRecord rec;
      const fs::path ep = root / e.at("dir").get<std::string>();
      rec.scene_seed = e.at("scene_seed").get<std::uint64_t>();
      rec.policy = policy_from_string(e.at("policy").get<std::string>());
      rec.seed = e.at("seed").get<std::uint64_t>();
      const json& g = e.at("grid");
      rec.grid = {g.at("rows").get<int>(),         g.at("cols").get<int>(),     g.at("resolution_m").get<double>(),
                  g.at("floor_z").get<double>(),   g.at("origin_x").get<double>(), g.at("origin_y").get<double>()};
      rec.intrinsics = intrinsics_from_json(read_text(ep / "intrinsics.json"));

      const auto pose_lines = read_lines(ep / "poses.csv");
      if (pose_lines.empty() || pose_lines[0] != kPoseHeader) fail(ErrorKind::Format, "bad poses.csv in " + ep.string());
      for (std::size_t i = 1; i < pose_lines.size(); ++i) {
        auto [t, pose] = pose_from_csv_row(pose_lines[i]);
        rec.frame_timesteps.push_back(t);
        rec.poses.push_back(pose);
      }
      if (rec.frame_count() != e.at("frames").get<std::size_t>())
        fail(ErrorKind::Format, "frame count mismatch in " + ep.string());
      for (int t : rec.frame_timesteps) {
        for (const char* f : {"frame", "depth"}) {
          const fs::path p = ep / frame_name(f, t, f[0] == 'f' ? "ppm" : "bin");
          if (!fs::exists(p)) fail(ErrorKind::Format, "missing file " + p.string());
        }
        SparseDepth z{rec.intrinsics.width, rec.intrinsics.height, {}};
        const auto lines = read_lines(ep / frame_name("sparse", t, "csv"));
        for (std::size_t i = 1; i < lines.size(); ++i) {
          const auto f = split_csv(lines[i]);
          if (f.size() != 3) fail(ErrorKind::Format, "bad sparse row in " + ep.string());
          z.points.push_back({parse_num<int>(f[0], "sparse"), parse_num<int>(f[1], "sparse"), parse_num<double>(f[2], "sparse")});
        }
        rec.sparse.push_back(std::move(z));
      }

      const auto log_lines = read_lines(ep / "log.csv");
      if (log_lines.empty() || log_lines[0] != kLogHeader) fail(ErrorKind::Format, "bad log.csv in " + ep.string());
      for (std::size_t i = 1; i < log_lines.size(); ++i) {
        const auto f = split_csv(log_lines[i]);
        if (f.size() != 9) fail(ErrorKind::Format, "bad log row in " + ep.string());
        LogEntry l;
        l.timestep = parse_num<int>(f[0], "log");
        l.action = action_from_string(f[1]);
        l.x = parse_num<double>(f[2], "log");
        l.y = parse_num<double>(f[3], "log");
        l.heading_index = parse_num<int>(f[4], "log") / kTurnDegrees;
        if (!f[5].empty()) l.delta = parse_num<double>(f[5], "log");
        if (!f[7].empty()) l.target = GridCell{parse_num<int>(f[7], "log"), parse_num<int>(f[8], "log")};
        rec.log.push_back(l);
      }
      if (rec.log.size() != e.at("steps").get<std::size_t>()) fail(ErrorKind::Format, "step count mismatch in " + ep.string());

      const Intrinsics k = rec.intrinsics;
      rec.source = [ep, k](int t, const Pose& pose) {
        Frame f;
        f.rgb = read_ppm((ep / frame_name("frame", t, "ppm")).string());
        f.depth_gt = read_depth_bin((ep / frame_name("depth", t, "bin")).string());
        if (f.rgb.width != k.width || f.rgb.height != k.height || f.depth_gt.width != k.width ||
            f.depth_gt.height != k.height)
          fail(ErrorKind::Format, "frame size does not match intrinsics in " + ep.string());
        f.pose = pose;
        f.intrinsics = k;
        f.timestep = t;
        return f;
      };
      out.episodes.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, std::string("manifest: ") + e.what());
  }
  return out;
}

// ---- test set ----

Frame TestSet::frame(int sequence, int index) const {
  const TestSequence& s = sequences.at(std::size_t(sequence));
  return render(*s.scene, s.poses.at(std::size_t(index)), intrinsics, index);
}

std::vector<std::uint64_t> TestSet::scene_seeds() const {
  std::vector<std::uint64_t> out;
  for (const auto& s : sequences) out.push_back(s.scene_seed);
  return out;
}

namespace {

// Forward until the way ahead is blocked, then a quarter turn (left, every third time right).
std::vector<Pose> wall_sweep(const Scene& scene, int steps) {
  std::vector<Pose> poses;
  AgentState s = spawn_state(scene);
  std::vector<Action> queue;
  int blocked = 0;
  poses.push_back(agent_pose(scene, s));
  while (static_cast<int>(poses.size()) < steps) {
    Action a;
    if (queue.empty()) {
      const double h = s.heading();
      const bool clear = position_free(scene, s.x + std::cos(h) * kForwardStep, s.y + std::sin(h) * kForwardStep) &&
                         position_free(scene, s.x + std::cos(h) * 2 * kForwardStep, s.y + std::sin(h) * 2 * kForwardStep);
      if (clear) {
        queue.push_back(Action::Forward);
      } else {
        ++blocked;
        queue.assign(90 / kTurnDegrees, blocked % 3 == 0 ? Action::TurnRight : Action::TurnLeft);
      }
    }
    a = queue.back();
    queue.pop_back();
    s = step(scene, s, a);
    poses.push_back(agent_pose(scene, s));
  }
  return poses;
}

}  // namespace

TestSet build_test_set(const WorldParams& world, int n_scenes, std::uint64_t seed, const Intrinsics& k,
                       int sweep_steps, int stride, int sparse_points) {
  if (n_scenes < 1 || sweep_steps < 3 || stride < 1) fail(ErrorKind::Usage, "test set: bad sizes");
  TestSet out;
  out.intrinsics = k;
  for (int i = 0; i < n_scenes; ++i) {
    TestSequence seq;
    seq.scene_seed = derive_seed(seed, "test-scene", std::uint64_t(i));
    seq.scene = std::make_shared<const Scene>(generate_scene(seq.scene_seed, world));
    seq.poses = wall_sweep(*seq.scene, sweep_steps);
    out.sequences.push_back(std::move(seq));
  }
  for (int i = 0; i < n_scenes; ++i) {
    Rng rng(derive_seed(seed, "test-sparse", std::uint64_t(i)));
    for (int idx = 2; idx < sweep_steps; idx += stride) {
      const Frame f = out.frame(i, idx);
      out.items.push_back({i, idx, sample_sparse_depth(f, sparse_points, rng).z});
    }
  }
  return out;
}

EvalMetrics evaluate_on_test_set(const CompletorParams& params, const TestSet& test, int jobs) {
  if (test.items.empty()) fail(ErrorKind::Usage, "empty test set");
  std::vector<EvalMetrics> per(test.items.size());
  parallel_for(test.items.size(), jobs, [&](std::size_t i) {
    const TestItem& item = test.items[i];
    const Frame f = test.frame(item.sequence, item.index);
    per[i] = evaluate(complete_depth(f.rgb, item.sparse, params), f.depth_gt);
  });
  EvalMetrics m;
  for (const auto& p : per) {
    m.mae_mm += p.mae_mm;
    m.rmse_mm += p.rmse_mm;
    m.imae_per_km += p.imae_per_km;
    m.irmse_per_km += p.irmse_per_km;
  }
  const double n = double(per.size());
  return {m.mae_mm / n, m.rmse_mm / n, m.imae_per_km / n, m.irmse_per_km / n};
}

std::vector<std::uint64_t> training_scene_seeds(std::uint64_t master, int n) {
  std::vector<std::uint64_t> out;
  for (int i = 0; i < n; ++i) out.push_back(derive_seed(master, "train-scene", std::uint64_t(i)));
  return out;
}

// ---- benchmark ----

double coverage_fraction(const Scene& scene, const OccupancyGrid& map) {
  const auto comp = largest_free_component(scene);
  if (comp.empty()) return 0.0;
  std::size_t seen = 0;
  for (int idx : comp)
    if (map.cells[std::size_t(idx)] == Cell::Free) ++seen;
  return double(seen) / double(comp.size());
}

double hard_room_fraction(const Scene& scene, const EpisodeRecord& episode) {
  if (episode.log.empty()) return 0.0;
  std::size_t in_hard = 0;
  for (const auto& l : episode.log) {
    const int room = scene.room_at(l.x, l.y);
    if (room >= 0 && std::size_t(room) < scene.hard_room.size() && scene.hard_room[std::size_t(room)]) ++in_hard;
  }
  return double(in_hard) / double(episode.log.size());
}

BenchmarkReport run_benchmark(const RunConfig& config, const std::optional<CompletorParams>& seed_model,
                              const BenchmarkHooks& hooks) {
  config.validate();
  auto progress = [&](const std::string& msg) {
    spdlog::info("{}", msg);
    if (hooks.progress) hooks.progress(msg);
  };
  const auto has = [&](PolicyKind k) { return std::find(config.policies.begin(), config.policies.end(), k) != config.policies.end(); };
  if (has(PolicyKind::Deux) && !has(PolicyKind::Random) && !seed_model && !config.seed_model_ground_truth)
    fail(ErrorKind::Dependency, "deux needs a seed model: include the random policy or supply a seed model");

  BenchmarkReport report;
  report.config_hash = config_hash(config);
  const Intrinsics k = config.intrinsics();
  const int jobs = config.jobs;
  progress("building test set");
  const TestSet test = build_test_set(config.world, config.test_scenes, config.test_seed, k, config.test_sweep_steps,
                                      config.test_stride, config.sparse_points);
  report.test_frames = static_cast<int>(test.items.size());
  const auto test_seeds = test.scene_seeds();
  const std::set<std::uint64_t> test_seed_set(test_seeds.begin(), test_seeds.end());

  CollectOptions opts{k, config.sparse_points, config.min_sparse_points};
  for (std::uint64_t master : config.seeds) {
    const auto seeds = training_scene_seeds(master, config.train_scenes);
    for (auto s : seeds)
      if (test_seed_set.contains(s)) fail(ErrorKind::Usage, "training scene seed collides with the test set");
    std::vector<std::shared_ptr<const Scene>> scenes(seeds.size());
    parallel_for(seeds.size(), jobs, [&](std::size_t i) {
      scenes[i] = std::make_shared<const Scene>(generate_scene(seeds[i], config.world));
    });

    std::map<PolicyKind, PolicyRow> rows;
    std::optional<CompletorParams> seed_params = seed_model;
    auto run_policy = [&](PolicyKind kind, const PolicyConfig& pc) {
      progress(std::string("seed ") + std::to_string(master) + ": collecting " + to_string(kind));
      std::vector<EpisodeResult> eps(scenes.size());
      parallel_for(scenes.size(), jobs, [&](std::size_t i) {
        eps[i] = collect_episode(scenes[i], kind, pc, config.budget, derive_seed(master, to_string(kind), i), opts);
      });
      PolicyRow row;
      row.policy = kind;
      row.seed = master;
      std::vector<EpisodeRecord> records;
      for (std::size_t i = 0; i < eps.size(); ++i) {
        row.train_frames += static_cast<int>(eps[i].record.frame_count());
        row.coverage += coverage_fraction(*scenes[i], eps[i].final_map) / double(eps.size());
        records.push_back(std::move(eps[i].record));
      }
      progress(std::string("seed ") + std::to_string(master) + ": fitting " + to_string(kind));
      const auto triplets = sample_triplets(records, config.fit_triplets);
      if (triplets.empty()) fail(ErrorKind::Usage, std::string("no consecutive frame triplets for ") + to_string(kind));
      const FitResult fit = fit_completor(triplets, config.init, config.grid, jobs);
      row.params = fit.params;
      row.fit_loss = fit.loss;
      row.fit_triplets = fit.triplets_used;
      row.metrics = evaluate_on_test_set(fit.params, test, jobs);
      rows[kind] = row;
    };

    if (has(PolicyKind::Random)) {
      run_policy(PolicyKind::Random, config.policy_config());
      if (!seed_params) seed_params = rows[PolicyKind::Random].params;
    }
    for (PolicyKind kind : config.policies) {
      if (kind == PolicyKind::Random) continue;
      PolicyConfig pc = config.policy_config();
      if (kind == PolicyKind::Deux) {
        SeedModel sm;
        sm.ground_truth = config.seed_model_ground_truth;
        sm.params = seed_params ? *seed_params : config.init;
        pc.seed_model = sm;
      }
      run_policy(kind, pc);
    }
    for (PolicyKind kind : config.policies) report.rows.push_back(rows.at(kind));
  }

  for (PolicyKind kind : config.policies) {
    EvalMetrics m;
    int n = 0;
    for (const auto& r : report.rows) {
      if (r.policy != kind) continue;
      m.mae_mm += r.metrics.mae_mm;
      m.rmse_mm += r.metrics.rmse_mm;
      m.imae_per_km += r.metrics.imae_per_km;
      m.irmse_per_km += r.metrics.irmse_per_km;
      ++n;
    }
    report.mean[kind] = {m.mae_mm / n, m.rmse_mm / n, m.imae_per_km / n, m.irmse_per_km / n};
  }
  if (has(PolicyKind::Deux)) {
    const double deux = report.mean[PolicyKind::Deux].mae_mm;
    for (PolicyKind kind : config.policies)
      if (kind != PolicyKind::Deux)
        report.mae_improvement_pct[kind] = 100.0 * (report.mean[kind].mae_mm - deux) / report.mean[kind].mae_mm;
  }
  return report;
}

void write_report(const BenchmarkReport& report, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + dir + ": " + ec.message());
  auto f = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return std::string(buf);
  };
  std::string csv =
      "policy,seed,mae_mm,rmse_mm,imae_per_km,irmse_per_km,fit_loss,train_frames,fit_triplets,coverage,"
      "idw_neighbors,idw_power,refine_iters,edge_weight\n";
  json rows = json::array();
  for (const auto& r : report.rows) {
    csv += std::string(to_string(r.policy)) + "," + std::to_string(r.seed) + "," + f(r.metrics.mae_mm) + "," +
           f(r.metrics.rmse_mm) + "," + f(r.metrics.imae_per_km) + "," + f(r.metrics.irmse_per_km) + "," +
           f(r.fit_loss) + "," + std::to_string(r.train_frames) + "," + std::to_string(r.fit_triplets) + "," +
           f(r.coverage) + "," + std::to_string(r.params.idw_neighbors) + "," + f(r.params.idw_power) + "," +
           std::to_string(r.params.refine_iters) + "," + f(r.params.edge_weight) + "\n";
    rows.push_back({{"policy", to_string(r.policy)},
                    {"seed", r.seed},
                    {"mae_mm", r.metrics.mae_mm},
                    {"rmse_mm", r.metrics.rmse_mm},
                    {"imae_per_km", r.metrics.imae_per_km},
                    {"irmse_per_km", r.metrics.irmse_per_km},
                    {"fit_loss", r.fit_loss},
                    {"train_frames", r.train_frames},
                    {"fit_triplets", r.fit_triplets},
                    {"coverage", r.coverage},
                    {"params", json::parse(completor_to_json(r.params))}});
  }
  json mean = json::object();
  for (const auto& [kind, m] : report.mean) {
    csv += std::string(to_string(kind)) + ",mean," + f(m.mae_mm) + "," + f(m.rmse_mm) + "," + f(m.imae_per_km) + "," +
           f(m.irmse_per_km) + ",,,,,,,,\n";
    mean[to_string(kind)] = {{"mae_mm", m.mae_mm},
                             {"rmse_mm", m.rmse_mm},
                             {"imae_per_km", m.imae_per_km},
                             {"irmse_per_km", m.irmse_per_km}};
  }
  json improvement = json::object();
  for (const auto& [kind, pct] : report.mae_improvement_pct) improvement[to_string(kind)] = pct;
  const json j{{"config_hash", report.config_hash},
               {"test_frames", report.test_frames},
               {"rows", rows},
               {"mean", mean},
               {"deux_mae_improvement_pct", improvement}};
  write_text(fs::path(dir) / "report.csv", csv);
  write_text(fs::path(dir) / "report.json", j.dump(2) + "\n");
}

// ---- plots ----

namespace {

std::array<double, 3> hsv(double h, double s, double v) {
  h = std::fmod(h, 360.0);
  const double c = v * s, x = c * (1.0 - std::abs(std::fmod(h / 60.0, 2.0) - 1.0)), m = v - c;
  double r = 0, g = 0, b = 0;
  if (h < 60) r = c, g = x;
  else if (h < 120) r = x, g = c;
  else if (h < 180) g = c, b = x;
  else if (h < 240) g = x, b = c;
  else if (h < 300) r = x, b = c;
  else r = c, b = x;
  return {r + m, g + m, b + m};
}

}  // namespace

Image trajectory_image(const EpisodeRecord& episode, const OccupancyGrid& grid) {
  if (episode.log.empty()) fail(ErrorKind::Usage, "plot: episode has no poses");
  Image img(grid.cols, grid.rows);
  auto put = [&](GridCell c, const std::array<double, 3>& rgb) {
    if (!grid.inside(c)) return;
    for (int ch = 0; ch < 3; ++ch) img.at(grid.rows - 1 - c.row, c.col, ch) = rgb[ch];
  };
  for (int r = 0; r < grid.rows; ++r)
    for (int c = 0; c < grid.cols; ++c) {
      const Cell v = grid.at(r, c);
      if (v == Cell::Free) put({r, c}, {0.0, 0.6, 0.0});
      else if (v == Cell::Occupied) put({r, c}, {1.0, 1.0, 1.0});
    }
  const std::size_t n = episode.log.size();
  GridCell prev = grid.cell_of(episode.log[0].x, episode.log[0].y);
  for (std::size_t i = 0; i < n; ++i) {
    const GridCell cur = grid.cell_of(episode.log[i].x, episode.log[i].y);
    const double frac = n > 1 ? double(i) / double(n - 1) : 0.0;
    const auto color = hsv(240.0 + 120.0 * frac, 1.0, 1.0);
    for (const GridCell c : line_cells(prev, cur)) put(c, color);
    prev = cur;
  }
  return img;
}

void render_trajectory_plot(const EpisodeRecord& episode, const OccupancyGrid& grid, const std::string& path) {
  write_ppm(trajectory_image(episode, grid), path);
}

OccupancyGrid rebuild_map(const EpisodeRecord& episode) {
  OccupancyGrid g = episode.grid.empty_grid();
  for (std::size_t i = 0; i < episode.frame_count(); ++i) {
    const Frame f = episode.frame(i);
    g = integrate(std::move(g), f.pose, f.depth_gt, episode.intrinsics);
  }
  return g;
}

}  // namespace deux
