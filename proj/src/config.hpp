#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "completion.hpp"
#include "policies.hpp"
#include "world.hpp"

namespace deux {

struct RunConfig {
  std::vector<std::uint64_t> seeds{1, 2, 3};  // master seeds; bench runs each
  WorldParams world = WorldParams::preset(WorldFamily::Office);  // "world.family" selects the preset
  std::vector<PolicyKind> policies{PolicyKind::Random, PolicyKind::Frontier, PolicyKind::Oracle, PolicyKind::Deux};
  EpisodeBudget budget;
  int train_scenes = 5;
  int image_size = 400;
  int sparse_points = kSparseTarget;
  int min_sparse_points = 100;  // verification filter
  LossWeights weights;
  CompletorParams init;
  CompletorGrid grid;
  int fit_triplets = 8;  // triplets sampled evenly from each policy's data for fitting
  int oracle_targets = 10;
  double top_fraction = kTopFraction;
  bool seed_model_ground_truth = false;
  std::uint64_t test_seed = 9001;
  int test_scenes = 2;
  int test_sweep_steps = 150;
  int test_stride = 10;  // one evaluation frame every `test_stride` sweep steps
  std::string out_dir = "deux_out";
  int jobs = 1;

  void validate() const;
  Intrinsics intrinsics() const { return Intrinsics::square(image_size); }
  PolicyConfig policy_config() const;
};

// Strict parse: unknown keys and wrong types are Usage errors; missing keys keep defaults.
RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& c);

// FNV-1a over the canonical JSON dump, hex encoded. Excludes out_dir and jobs.
std::string config_hash(const RunConfig& c);

// Reads DEUX_LOG (trace, debug, info, warn, error, critical, off) and sets the spdlog level.
void init_logging_from_env();

}  // namespace deux
