#pragma once

#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "completion.hpp"
#include "mapping.hpp"
#include "planning.hpp"
#include "world.hpp"

namespace deux {

enum class PolicyKind { Random, Frontier, Oracle, Deux };

const char* to_string(PolicyKind k);
PolicyKind policy_from_string(const std::string& s);

struct EpisodeBudget {
  int max_steps = 500;
  void validate() const;
};

struct ResidualRecord {
  int timestep = 0;
  Pose pose;
  double delta = 0.0;
};

// Time-ordered (pose, residual) records gathered online by the seed model.
class ResidualRegistry {
 public:
  // Throws Domain if delta is outside [0, 1) or timestep does not increase.
  void add(int timestep, const Pose& pose, double delta);
  const std::vector<ResidualRecord>& records() const { return records_; }
  bool empty() const { return records_.empty(); }
  std::size_t size() const { return records_.size(); }
  // Records whose delta is among the top `fraction` (at least one record).
  std::vector<ResidualRecord> top_fraction(double fraction) const;

 private:
  std::vector<ResidualRecord> records_;
};

double reward(double delta);

inline constexpr int kReachRadius = 2;  // cells, Chebyshev
inline constexpr double kTopFraction = 0.1;

// Depth model the DEUX policy scores uncertainty with.
struct SeedModel {
  CompletorParams params;
  bool ground_truth = false;  // use rendered depth instead of completion
};

struct PolicyConfig {
  int oracle_targets = 10;
  double top_fraction = kTopFraction;
  int reach_radius = kReachRadius;
  std::optional<SeedModel> seed_model;  // required for Deux
};

struct Observation {
  int timestep = 0;
  AgentState state;
  const Frame& frame;
  const SparseDepth& sparse;
  const OccupancyGrid& map;
};

struct Decision {
  Action action = Action::Stop;
  std::optional<GridCell> target;
  std::optional<double> delta;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual Decision decide(const Observation& obs) = 0;
  virtual PolicyKind kind() const = 0;
};

// Throws Dependency when Deux is requested without a seed model.
std::unique_ptr<Policy> make_policy(PolicyKind kind, const PolicyConfig& config, const Scene& scene,
                                    std::uint64_t seed);

// Ground-truth planning view of a scene (used by the oracle).
OccupancyGrid true_planning_map(const Scene& scene);

// Pre-sampled oracle targets: uniform draws over free cells reachable from spawn.
std::vector<GridCell> sample_oracle_targets(const Scene& scene, int count, std::mt19937_64& rng);

// score(f) = max over top-fraction records of delta / (1 + distance_m(f, pose)); argmax frontier,
// ties to the lowest (row, col). Empty registry falls back to the nearest frontier by path cost.
// `dist` is a distance field from the agent; frontiers whose goal is unreachable are skipped.
// Returns nullopt when no frontier is usable.
std::optional<GridCell> deux_sample_target(std::span<const Frontier> frontiers, const ResidualRegistry& registry,
                                           const OccupancyGrid& planning, std::span<const int> dist,
                                           double top_fraction = kTopFraction, int reach_radius = kReachRadius);

double frontier_score(GridCell f, std::span<const ResidualRecord> top, const OccupancyGrid& grid);

}  // namespace deux
