#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <set>

#include "error.hpp"
#include "pipeline.hpp"

using namespace deux;
namespace fs = std::filesystem;

namespace {

std::shared_ptr<const Scene> scene() {
  static auto s = std::make_shared<const Scene>(generate_scene(55, WorldParams::preset(WorldFamily::Office)));
  return s;
}

CollectOptions small_options() {
  CollectOptions o;
  o.intrinsics = Intrinsics::square(48);
  o.sparse_points = 60;
  o.min_sparse_points = 5;
  return o;
}

fs::path scratch(const char* name) {
  const fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  return p;
}

ErrorKind read_kind(const fs::path& dir) {
  try {
    read_dataset(dir.string());
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("dataset accepted");
  return ErrorKind::Usage;
}

}  // namespace

TEST_CASE("derived seeds") {
  CHECK(derive_seed(1, "policy") == derive_seed(1, "policy"));
  std::set<std::uint64_t> seen;
  for (std::uint64_t m : {0ull, 1ull, 2ull})
    for (const char* s : {"policy", "sparse", "train-scene"})
      for (std::uint64_t i = 0; i < 4; ++i) seen.insert(derive_seed(m, s, i));
  CHECK(seen.size() == 36);
  const auto train = training_scene_seeds(3, 5);
  CHECK(train.size() == 5);
  CHECK(train[2] == derive_seed(3, "train-scene", 2));
}

TEST_CASE("triplets use consecutive verified frames") {
  EpisodeRecord rec;
  rec.frame_timesteps = {0, 1, 2, 4, 5, 6, 7, 9};
  const auto t = episode_triplets(rec);
  REQUIRE(t.size() == 3);
  CHECK(t[0] == std::array<std::size_t, 3>{0, 1, 2});
  CHECK(t[1] == std::array<std::size_t, 3>{3, 4, 5});
  CHECK(t[2] == std::array<std::size_t, 3>{4, 5, 6});
  rec.frame_timesteps = {0, 2, 4};
  CHECK(episode_triplets(rec).empty());
}

TEST_CASE("triplet sampling spreads over episodes") {
  const auto ep = collect_episode(scene(), PolicyKind::Random, PolicyConfig{}, EpisodeBudget{20}, 2, small_options());
  REQUIRE(ep.record.frame_count() >= 10);
  const std::vector<EpisodeRecord> recs{ep.record, ep.record};
  const std::size_t per = episode_triplets(ep.record).size();
  const auto all = sample_triplets(recs, 1000);
  CHECK(all.size() == 2 * per);
  const auto few = sample_triplets(recs, 2);
  REQUIRE(few.size() == 2);
  // j = floor((i + 0.5) * N / n): the middle of each half.
  const auto idx = episode_triplets(ep.record)[per / 2];
  CHECK(few[0].t.timestep == ep.record.frame_timesteps[idx[2]]);
  CHECK(few[0].t1.timestep == few[0].t.timestep - 1);
  CHECK(few[0].t2.timestep == few[0].t.timestep - 2);
  CHECK(few[0].z.points.size() == ep.record.sparse[idx[2]].points.size());
  CHECK(sample_triplets(recs, 0).empty());
}

TEST_CASE("image and depth files round-trip") {
  const auto dir = scratch("deux_test_io");
  fs::create_directories(dir);
  const Frame f = render(*scene(), agent_pose(*scene(), spawn_state(*scene())), Intrinsics::square(40));
  write_ppm(f.rgb, (dir / "a.ppm").string());
  CHECK(read_ppm((dir / "a.ppm").string()).values == f.rgb.values);
  write_depth_bin(f.depth_gt, (dir / "a.bin").string());
  const DepthMap d = read_depth_bin((dir / "a.bin").string());
  REQUIRE(d.values.size() == f.depth_gt.values.size());
  for (std::size_t i = 0; i < d.values.size(); ++i) CHECK(d.values[i] == double(float(f.depth_gt.values[i])));

  std::ofstream(dir / "bad.bin", std::ios::binary) << "NOTDEPTH";
  CHECK_THROWS_AS(read_depth_bin((dir / "bad.bin").string()), Error);
  std::ofstream(dir / "bad.ppm", std::ios::binary) << "P3\n1 1\n255\n0 0 0\n";
  CHECK_THROWS_AS(read_ppm((dir / "bad.ppm").string()), Error);
  fs::remove_all(dir);
}

TEST_CASE("dataset round-trip") {
  PolicyConfig cfg;
  cfg.seed_model = SeedModel{CompletorParams{}, true};
  const auto a = collect_episode(scene(), PolicyKind::Deux, cfg, EpisodeBudget{12}, 9, small_options());
  const auto b = collect_episode(scene(), PolicyKind::Frontier, cfg, EpisodeBudget{8}, 10, small_options());
  const std::vector<EpisodeRecord> recs{a.record, b.record};
  const auto dir = scratch("deux_test_dataset");
  write_dataset(recs, dir.string(), "abc123");
  const auto back = read_dataset(dir.string());
  CHECK(back.version == kDatasetVersion);
  CHECK(back.config_hash == "abc123");
  REQUIRE(back.episodes.size() == 2);
  for (std::size_t e = 0; e < 2; ++e) {
    const auto& x = recs[e];
    const auto& y = back.episodes[e];
    CHECK(y.policy == x.policy);
    CHECK(y.seed == x.seed);
    CHECK(y.scene_seed == x.scene_seed);
    CHECK(y.grid.rows == x.grid.rows);
    CHECK(y.frame_timesteps == x.frame_timesteps);
    REQUIRE(y.log.size() == x.log.size());
    for (std::size_t i = 0; i < x.log.size(); ++i) {
      CHECK(y.log[i].action == x.log[i].action);
      CHECK(y.log[i].x == x.log[i].x);
      CHECK(y.log[i].heading_index == x.log[i].heading_index);
      CHECK(y.log[i].delta == x.log[i].delta);
      CHECK(y.log[i].target == x.log[i].target);
    }
    CHECK(y.episode_return() == x.episode_return());
    for (std::size_t i = 0; i < x.frame_count(); ++i) {
      CHECK(y.poses[i].matrix() == x.poses[i].matrix());
      const auto& zp = x.sparse[i].points;
      const auto& zq = y.sparse[i].points;
      REQUIRE(zp.size() == zq.size());
      for (std::size_t k = 0; k < zp.size(); ++k) {
        CHECK(zq[k].row == zp[k].row);
        CHECK(zq[k].depth_m == zp[k].depth_m);
      }
      const Frame fx = x.frame(i), fy = y.frame(i);
      CHECK(fy.rgb.values == fx.rgb.values);
      CHECK(fy.timestep == fx.timestep);
    }
  }
  CHECK(fs::exists(dir / "ep_0" / "log.csv"));
  std::ifstream log(dir / "ep_0" / "log.csv");
  std::string header;
  std::getline(log, header);
  CHECK(header == "timestep,action,x,y,heading,delta,reward,target_row,target_col");
  fs::remove_all(dir);
}

TEST_CASE("damaged datasets are rejected") {
  const auto ep = collect_episode(scene(), PolicyKind::Random, PolicyConfig{}, EpisodeBudget{4}, 1, small_options());
  const std::vector<EpisodeRecord> recs{ep.record};
  const auto dir = scratch("deux_test_damaged");
  REQUIRE(ep.record.frame_count() >= 1);
  const int t0 = ep.record.frame_timesteps[0];
  char name[32];

  write_dataset(recs, dir.string(), "h");
  auto manifest = nlohmann::json::parse(std::ifstream(dir / "manifest.json"));
  manifest["version"] = kDatasetVersion + 1;
  std::ofstream(dir / "manifest.json") << manifest.dump();
  CHECK(read_kind(dir) == ErrorKind::Format);

  write_dataset(recs, dir.string(), "h");
  std::snprintf(name, sizeof name, "depth_%05d.bin", t0);
  {
    std::fstream f(dir / "ep_0" / name, std::ios::in | std::ios::out | std::ios::binary);
    f.put('Z');
  }
  CHECK_THROWS_AS(read_dataset(dir.string()).episodes.at(0).frame(0), Error);

  write_dataset(recs, dir.string(), "h");
  std::snprintf(name, sizeof name, "frame_%05d.ppm", t0);
  fs::remove(dir / "ep_0" / name);
  CHECK(read_kind(dir) == ErrorKind::Format);

  write_dataset(recs, dir.string(), "h");
  fs::remove(dir / "ep_0" / "poses.csv");
  CHECK(read_kind(dir) == ErrorKind::Format);

  fs::remove_all(dir);
  CHECK(read_kind(dir) == ErrorKind::Format);
}

TEST_CASE("scripted test set") {
  const auto k = Intrinsics::square(32);
  const auto a = build_test_set(WorldParams::preset(WorldFamily::Office), 2, 77, k, 25, 5, 40);
  const auto b = build_test_set(WorldParams::preset(WorldFamily::Office), 2, 77, k, 25, 5, 40);
  CHECK(a.scene_seeds() == b.scene_seeds());
  CHECK(a.scene_seeds()[0] != a.scene_seeds()[1]);
  REQUIRE(a.items.size() == 10);  // indices 2, 7, 12, 17, 22 per scene
  CHECK(a.items[1].index == 7);
  CHECK(a.items[5].sequence == 1);
  for (std::size_t i = 0; i < a.items.size(); ++i) {
    CHECK(a.sequences[a.items[i].sequence].poses.size() == 25);
    CHECK(a.items[i].sparse.points.size() == b.items[i].sparse.points.size());
  }
  for (const auto& s : a.sequences)
    for (const auto& p : s.poses) CHECK(position_free(*s.scene, p.translation.x(), p.translation.y()));
  const auto m = evaluate_on_test_set(CompletorParams{}, a);
  const auto m2 = evaluate_on_test_set(CompletorParams{}, a, 2);
  CHECK(m.mae_mm > 0.0);
  CHECK(m.mae_mm == m2.mae_mm);
  CHECK_THROWS_AS(build_test_set(WorldParams{}, 0, 1, k, 10, 1, 10), Error);
}

TEST_CASE("trajectory plot") {
  const auto ep = collect_episode(scene(), PolicyKind::Random, PolicyConfig{}, EpisodeBudget{30}, 6, small_options());
  const auto img = trajectory_image(ep.record, ep.final_map);
  CHECK(img.width == ep.final_map.cols);
  CHECK(img.height == ep.final_map.rows);
  // Drawing runs in time order, so the final cell carries the end colour: pure red.
  const GridCell last = ep.final_map.cell_of(ep.record.log.back().x, ep.record.log.back().y);
  const int row = img.height - 1 - last.row;
  CHECK(img.at(row, last.col, 0) == doctest::Approx(1.0));
  CHECK(img.at(row, last.col, 1) == doctest::Approx(0.0));
  CHECK(img.at(row, last.col, 2) == doctest::Approx(0.0));
  int unknown = 0;
  for (int r = 0; r < ep.final_map.rows; ++r)
    for (int c = 0; c < ep.final_map.cols; ++c)
      if (ep.final_map.at(r, c) == Cell::Unknown && img.at(img.height - 1 - r, c, 0) == 0.0 &&
          img.at(img.height - 1 - r, c, 1) == 0.0 && img.at(img.height - 1 - r, c, 2) == 0.0)
        ++unknown;
  CHECK(unknown > 0);
  const auto rebuilt = rebuild_map(ep.record);
  CHECK(rebuilt.rows == ep.final_map.rows);
  const double cov = coverage_fraction(*scene(), ep.final_map);
  CHECK(cov > 0.0);
  CHECK(cov <= 1.0);
  const double hard = hard_room_fraction(*scene(), ep.record);
  CHECK(hard >= 0.0);
  CHECK(hard <= 1.0);
}

TEST_CASE("empty dataset") {
  const auto dir = scratch("deux_test_empty");
  write_dataset({}, dir.string(), "none");
  const auto back = read_dataset(dir.string());
  CHECK(back.episodes.empty());
  CHECK(back.config_hash == "none");
  fs::remove_all(dir);
}

TEST_CASE("trajectory pixels") {
  EpisodeRecord one;
  one.grid = {10, 12, 0.25, 0.25, 0.0, 0.0};
  one.log.push_back({0, Action::Stop, 1.1, 0.6, 0, std::nullopt, std::nullopt});
  const auto grid = one.grid.empty_grid();
  const auto img = trajectory_image(one, grid);
  int colored = 0;
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) colored += img.at(r, c, 0) + img.at(r, c, 1) + img.at(r, c, 2) > 0.0;
  CHECK(colored == 1);
  CHECK_THROWS_AS(trajectory_image(EpisodeRecord{}, grid), Error);

  const auto ep = collect_episode(scene(), PolicyKind::Frontier, PolicyConfig{}, EpisodeBudget{60}, 8, small_options());
  const auto& map = ep.final_map;
  const auto traj = trajectory_image(ep.record, OccupancyGrid(map.rows, map.cols, map.resolution_m));
  std::set<GridCell> visited;
  for (const auto& e : ep.record.log) visited.insert(map.cell_of(e.x, e.y));
  int drawn = 0;
  for (double v : traj.values) drawn += v > 0.0;
  CHECK(drawn / 3 >= int(visited.size()) / 3);
}

TEST_CASE("random-only benchmark") {
  RunConfig c = run_config_from_json(R"({
    "seeds": [5], "policies": ["random"], "max_steps": 15, "train_scenes": 1, "image_size": 40,
    "sparse_points": 50, "min_sparse_points": 5, "fit_triplets": 2,
    "grid": {"idw_power": [2], "refine_iters": [0], "edge_weight": [0.5], "idw_neighbors": [4]},
    "test_scenes": 1, "test_sweep_steps": 8, "test_stride": 3})");
  const auto report = run_benchmark(c);
  REQUIRE(report.rows.size() == 1);
  CHECK(report.rows[0].policy == PolicyKind::Random);
  CHECK(report.mae_improvement_pct.empty());
  CHECK(report.test_frames == 2);

  // The reported metrics equal a direct re-evaluation of the fitted model.
  const auto test = build_test_set(c.world, c.test_scenes, c.test_seed, c.intrinsics(), c.test_sweep_steps,
                                   c.test_stride, c.sparse_points);
  const auto m = evaluate_on_test_set(report.rows[0].params, test);
  CHECK(m.mae_mm == report.rows[0].metrics.mae_mm);
  const auto held_out = test.scene_seeds();
  for (auto s : training_scene_seeds(5, 1)) CHECK(std::find(held_out.begin(), held_out.end(), s) == held_out.end());

  const auto dir = scratch("deux_test_report");
  write_report(report, dir.string());
  std::ifstream csv(dir / "report.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header.rfind("policy,seed,mae_mm,rmse_mm", 0) == 0);
  fs::remove_all(dir);
}
