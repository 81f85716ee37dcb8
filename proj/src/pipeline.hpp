#pragma once

#include <cstdint>
#include <array>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "completion.hpp"
#include "config.hpp"
#include "mapping.hpp"
#include "policies.hpp"
#include "world.hpp"

namespace deux {

inline constexpr int kDatasetVersion = 1;

// Independent stream seed from a master seed, a stream name and an index (splitmix64 mixing).
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream, std::uint64_t index = 0);

struct LogEntry {
  int timestep = 0;
  Action action = Action::Stop;
  double x = 0.0;
  double y = 0.0;
  int heading_index = 0;
  std::optional<double> delta;
  std::optional<GridCell> target;

  std::optional<double> reward() const;
};

struct GridSpec {
  int rows = 0;
  int cols = 0;
  double resolution_m = kCellSize;
  double floor_z = kCellSize;
  double origin_x = 0.0;
  double origin_y = 0.0;

  OccupancyGrid empty_grid() const;
};

using FrameSource = std::function<Frame(int timestep, const Pose& pose)>;

struct EpisodeRecord {
  std::uint64_t scene_seed = 0;
  PolicyKind policy = PolicyKind::Random;
  std::uint64_t seed = 0;
  Intrinsics intrinsics;
  GridSpec grid;
  // Frames that passed verification, in time order.
  std::vector<int> frame_timesteps;
  std::vector<Pose> poses;
  std::vector<SparseDepth> sparse;
  // One entry per emitted action.
  std::vector<LogEntry> log;
  FrameSource source;

  std::size_t frame_count() const { return frame_timesteps.size(); }
  Frame frame(std::size_t i) const;
  double episode_return() const;  // sum of logged rewards
};

struct CollectOptions {
  Intrinsics intrinsics = Intrinsics::square(400);
  int sparse_points = kSparseTarget;
  int min_sparse_points = 100;
};

struct EpisodeResult {
  EpisodeRecord record;
  OccupancyGrid final_map;
};

// Runs one policy episode: render, sample sparse depth, integrate the map, decide, log, step.
// Frames with fewer than `min_sparse_points` Harris corners are dropped (verification).
// Throws Precondition when the policy stops at t=0.
EpisodeResult collect_episode(std::shared_ptr<const Scene> scene, PolicyKind policy, const PolicyConfig& config,
                              const EpisodeBudget& budget, std::uint64_t seed, const CollectOptions& options = {});

// Frame source that re-renders from the scene.
FrameSource scene_source(std::shared_ptr<const Scene> scene, const Intrinsics& k);

// Consecutive verified frame triplets (indices into the record's frames, newest last).
std::vector<std::array<std::size_t, 3>> episode_triplets(const EpisodeRecord& record);
TrainingTriplet make_triplet(const EpisodeRecord& record, const std::array<std::size_t, 3>& idx);

// Up to `count` triplets spread evenly over all episodes' consecutive triplets.
std::vector<TrainingTriplet> sample_triplets(std::span<const EpisodeRecord> records, int count);

struct DatasetContents {
  int version = kDatasetVersion;
  std::string config_hash;
  std::vector<EpisodeRecord> episodes;
};

void write_dataset(std::span<const EpisodeRecord> records, const std::string& dir, const std::string& config_hash);
// Throws Format on version mismatch, bad magic or missing files.
DatasetContents read_dataset(const std::string& dir);

void write_ppm(const Image& image, const std::string& path);
Image read_ppm(const std::string& path);
void write_depth_bin(const DepthMap& depth, const std::string& path);
DepthMap read_depth_bin(const std::string& path);

struct TestSequence {
  std::uint64_t scene_seed = 0;
  std::shared_ptr<const Scene> scene;
  std::vector<Pose> poses;  // every sweep step
};

struct TestItem {
  int sequence = 0;
  int index = 0;  // newest frame of a consecutive triplet (index >= 2)
  SparseDepth sparse;
};

struct TestSet {
  Intrinsics intrinsics;
  std::vector<TestSequence> sequences;
  std::vector<TestItem> items;

  Frame frame(int sequence, int index) const;
  std::vector<std::uint64_t> scene_seeds() const;
};

// Scripted wall-following sweeps through held-out scenes.
TestSet build_test_set(const WorldParams& world, int n_scenes, std::uint64_t seed, const Intrinsics& k,
                       int sweep_steps, int stride, int sparse_points);

// Mean of per-frame metrics over the test set.
EvalMetrics evaluate_on_test_set(const CompletorParams& params, const TestSet& test, int jobs = 1);

std::vector<std::uint64_t> training_scene_seeds(std::uint64_t master, int n);

struct PolicyRow {
  PolicyKind policy = PolicyKind::Random;
  std::uint64_t seed = 0;
  EvalMetrics metrics;
  CompletorParams params;
  double fit_loss = 0.0;
  int train_frames = 0;
  int fit_triplets = 0;
  double coverage = 0.0;  // mean fraction of reachable free cells mapped Free
};

struct BenchmarkReport {
  std::string config_hash;
  int test_frames = 0;
  std::vector<PolicyRow> rows;  // policy order per seed
  std::map<PolicyKind, EvalMetrics> mean;
  // Percent reduction of DEUX mean MAE relative to each baseline.
  std::map<PolicyKind, double> mae_improvement_pct;
};

struct BenchmarkHooks {
  std::function<void(const std::string&)> progress;
};

// Per master seed: Random data first (its fit is the DEUX seed model unless one is supplied),
// then the remaining policies; each policy's completor is fitted and scored on the shared test set.
// Throws Dependency when DEUX is requested with neither Random nor a supplied seed model.
BenchmarkReport run_benchmark(const RunConfig& config, const std::optional<CompletorParams>& seed_model = {},
                              const BenchmarkHooks& hooks = {});

void write_report(const BenchmarkReport& report, const std::string& dir);

// Top-down map: black unknown, green free, white occupied; the trajectory goes blue to red over time.
// One pixel per cell, north (max y) up.
Image trajectory_image(const EpisodeRecord& episode, const OccupancyGrid& grid);
void render_trajectory_plot(const EpisodeRecord& episode, const OccupancyGrid& grid, const std::string& path);

// Map rebuilt from the recorded frames.
OccupancyGrid rebuild_map(const EpisodeRecord& episode);

double coverage_fraction(const Scene& scene, const OccupancyGrid& map);
double hard_room_fraction(const Scene& scene, const EpisodeRecord& episode);

}  // namespace deux
