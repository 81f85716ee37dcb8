#include "policies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "error.hpp"

namespace deux {

const char* to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::Random: return "random";
    case PolicyKind::Frontier: return "frontier";
    case PolicyKind::Oracle: return "oracle";
    case PolicyKind::Deux: return "deux";
  }
  return "?";
}

PolicyKind policy_from_string(const std::string& s) {
  if (s == "random") return PolicyKind::Random;
  if (s == "frontier") return PolicyKind::Frontier;
  if (s == "oracle") return PolicyKind::Oracle;
  if (s == "deux") return PolicyKind::Deux;
  fail(ErrorKind::Usage, "unknown policy '" + s + "' (expected random, frontier, oracle or deux)");
}

void EpisodeBudget::validate() const {
  if (max_steps <= 0) fail(ErrorKind::Usage, "episode budget must be positive");
}

void ResidualRegistry::add(int timestep, const Pose& pose, double delta) {
  if (!(delta >= 0.0 && delta < 1.0)) fail(ErrorKind::Domain, "residual must lie in [0, 1)");
  if (!records_.empty() && timestep <= records_.back().timestep)
    fail(ErrorKind::Domain, "residual registry timesteps must increase");
  records_.push_back({timestep, pose, delta});
}

std::vector<ResidualRecord> ResidualRegistry::top_fraction(double fraction) const {
  if (records_.empty()) return {};
  const std::size_t keep =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * double(records_.size()))));
  std::vector<ResidualRecord> sorted = records_;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ResidualRecord& a, const ResidualRecord& b) { return a.delta > b.delta; });
  sorted.resize(std::min(keep, sorted.size()));
  return sorted;
}

double reward(double delta) { return -delta; }

OccupancyGrid true_planning_map(const Scene& scene) {
  OccupancyGrid grid(scene.ny, scene.nx, scene.cell_size, Cell::Free);
  grid.floor_z = scene.floor_z;
  for (int r = 0; r < scene.ny; ++r)
    for (int c = 0; c < scene.nx; ++c)
      if (scene.blocked(c, r)) grid.at(r, c) = Cell::Occupied;
  return process_map(grid);
}

std::vector<GridCell> sample_oracle_targets(const Scene& scene, int count, std::mt19937_64& rng) {
  if (count <= 0) fail(ErrorKind::Usage, "oracle target count must be positive");
  OccupancyGrid planning = true_planning_map(scene);
  const GridCell spawn{scene.spawn_row, scene.spawn_col};
  planning.at(spawn.row, spawn.col) = Cell::Free;
  const std::vector<int> dist = distance_field(planning, spawn);
  std::vector<GridCell> pool;
  for (int r = 0; r < planning.rows; ++r)
    for (int c = 0; c < planning.cols; ++c)
      if (dist[std::size_t(r) * planning.cols + c] >= 0) pool.push_back({r, c});
  std::vector<GridCell> out;
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  for (int i = 0; i < count; ++i) out.push_back(pool[pick(rng)]);
  return out;
}

double frontier_score(GridCell f, std::span<const ResidualRecord> top, const OccupancyGrid& grid) {
  const auto [fx, fy] = grid.center(f);
  double best = 0.0;
  for (const ResidualRecord& rec : top) {
    const double d = std::hypot(fx - rec.pose.translation.x(), fy - rec.pose.translation.y());
    best = std::max(best, rec.delta / (1.0 + d));
  }
  return best;
}

namespace {

int chebyshev(GridCell a, GridCell b) { return std::max(std::abs(a.row - b.row), std::abs(a.col - b.col)); }

// Path cost to the frontier's goal cell, or -1.
int goal_distance(GridCell f, const OccupancyGrid& planning, std::span<const int> dist, int radius) {
  const auto goal = nearest_free_cell(planning, f, radius);
  if (!goal) return -1;
  return dist[std::size_t(goal->row) * planning.cols + goal->col];
}

}  // namespace

std::optional<GridCell> deux_sample_target(std::span<const Frontier> frontiers, const ResidualRegistry& registry,
                                           const OccupancyGrid& planning, std::span<const int> dist,
                                           double top_fraction, int reach_radius) {
  const std::vector<ResidualRecord> top = registry.top_fraction(top_fraction);
  std::optional<GridCell> best;
  double best_score = 0.0;
  int best_dist = 0;
  for (const Frontier& f : frontiers) {
    const int d = goal_distance(f.cell, planning, dist, reach_radius);
    if (d < 0) continue;
    if (top.empty()) {
      if (!best || d < best_dist || (d == best_dist && f.cell < *best)) {
        best = f.cell;
        best_dist = d;
      }
      continue;
    }
    const double s = frontier_score(f.cell, top, planning);
    if (!best || s > best_score || (s == best_score && f.cell < *best)) {
      best = f.cell;
      best_score = s;
    }
  }
  return best;
}

namespace {

// Frontier-driven navigation shared by the frontier and DEUX policies.
class FrontierNavigator : public Policy {
 public:
  FrontierNavigator(const PolicyConfig& config, std::uint64_t seed) : config_(config), rng_(seed) {}

  Decision decide(const Observation& obs) override {
    Decision d;
    before(obs, d);
    const GridCell agent = obs.map.cell_of(obs.state.x, obs.state.y);
    if (obs.state.collided_last) {
      d.action = unstuck_action(rng_);
      d.target = target_;
      return d;
    }
    OccupancyGrid planning = process_map(obs.map);
    planning.at(agent.row, agent.col) = Cell::Free;
    if (target_ && (chebyshev(agent, *target_) <= config_.reach_radius || !is_frontier_cell(obs.map, *target_)))
      target_.reset();
    if (!target_) {
      const std::vector<Frontier> reps = frontier_representatives(extract_frontiers(obs.map));
      const std::vector<int> dist = distance_field(planning, agent);
      target_ = select(reps, planning, dist);
    }
    if (!target_) {
      d.action = unstuck_action(rng_);
      return d;
    }
    d.target = target_;
    const auto goal = nearest_free_cell(planning, *target_, config_.reach_radius);
    const auto plan = goal ? astar(planning, agent, *goal) : std::nullopt;
    if (!plan) {
      target_.reset();
      d.action = unstuck_action(rng_);
      return d;
    }
    if (plan->path.size() == 1) {
      d.action = Action::TurnLeft;  // standing on the goal: look around
      return d;
    }
    const auto [wx, wy] = obs.map.center(next_waypoint(*plan));
    d.action = action_toward(obs.state, wx, wy);
    return d;
  }

 protected:
  virtual void before(const Observation&, Decision&) {}
  virtual std::optional<GridCell> select(const std::vector<Frontier>& reps, const OccupancyGrid& planning,
                                         const std::vector<int>& dist) {
    static const ResidualRegistry kEmpty;
    return deux_sample_target(reps, kEmpty, planning, dist, config_.top_fraction, config_.reach_radius);
  }

  PolicyConfig config_;
  Rng rng_;
  std::optional<GridCell> target_;
};

class FrontierPolicy final : public FrontierNavigator {
 public:
  using FrontierNavigator::FrontierNavigator;
  PolicyKind kind() const override { return PolicyKind::Frontier; }
};

class DeuxPolicy final : public FrontierNavigator {
 public:
  static constexpr int kWarmup = 2;

  DeuxPolicy(const PolicyConfig& config, std::uint64_t seed) : FrontierNavigator(config, seed) {
    if (!config.seed_model) fail(ErrorKind::Dependency, "deux policy needs a seed model");
  }
  PolicyKind kind() const override { return PolicyKind::Deux; }
  const ResidualRegistry& registry() const { return registry_; }

 protected:
  void before(const Observation& obs, Decision& d) override {
    if (history_.size() >= std::size_t(kWarmup)) {
      const SeedModel& model = *config_.seed_model;
      const DepthMap pred =
          model.ground_truth ? obs.frame.depth_gt : complete_depth(obs.frame.rgb, obs.sparse, model.params);
      const ViewRef cur{obs.frame.rgb, obs.frame.pose};
      const ViewRef earlier[2] = {{history_[1].rgb, history_[1].pose}, {history_[0].rgb, history_[0].pose}};
      double delta;
      try {
        delta = uncertainty_residual(cur, earlier, pred, obs.frame.intrinsics);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::UndefinedLoss) throw;
        delta = 1.0 - std::exp(-1.0);  // no overlap at all: maximally uncertain
      }
      registry_.add(obs.timestep, obs.frame.pose, delta);
      d.delta = delta;
    }
    history_.push_back({obs.frame.rgb, obs.frame.pose});
    if (history_.size() > std::size_t(kWarmup)) history_.erase(history_.begin());
  }

  std::optional<GridCell> select(const std::vector<Frontier>& reps, const OccupancyGrid& planning,
                                 const std::vector<int>& dist) override {
    return deux_sample_target(reps, registry_, planning, dist, config_.top_fraction, config_.reach_radius);
  }

 private:
  struct Past {
    Image rgb;
    Pose pose;
  };
  std::vector<Past> history_;  // oldest first
  ResidualRegistry registry_;
};

class RandomPolicy final : public Policy {
 public:
  explicit RandomPolicy(std::uint64_t seed) : rng_(seed) {}
  PolicyKind kind() const override { return PolicyKind::Random; }

  Decision decide(const Observation& obs) override {
    Decision d;
    if (pending_turns_ > 0) {
      --pending_turns_;
      d.action = turn_;
      return d;
    }
    if (obs.state.collided_last) {
      turn_ = std::bernoulli_distribution(0.5)(rng_) ? Action::TurnLeft : Action::TurnRight;
      pending_turns_ = std::uniform_int_distribution<int>(1, 9)(rng_) - 1;
      d.action = turn_;
      return d;
    }
    d.action = unstuck_action(rng_);
    return d;
  }

 private:
  Rng rng_;
  Action turn_ = Action::TurnLeft;
  int pending_turns_ = 0;
};

class OraclePolicy final : public Policy {
 public:
  OraclePolicy(const PolicyConfig& config, const Scene& scene, std::uint64_t seed)
      : config_(config), rng_(seed), planning_(true_planning_map(scene)) {
    targets_ = sample_oracle_targets(scene, config.oracle_targets, rng_);
  }
  PolicyKind kind() const override { return PolicyKind::Oracle; }

  Decision decide(const Observation& obs) override {
    Decision d;
    const GridCell agent = planning_.cell_of(obs.state.x, obs.state.y);
    while (next_ < targets_.size() && chebyshev(agent, targets_[next_]) <= config_.reach_radius) ++next_;
    if (next_ >= targets_.size()) {
      d.action = Action::Stop;
      return d;
    }
    d.target = targets_[next_];
    if (obs.state.collided_last) {
      d.action = unstuck_action(rng_);
      return d;
    }
    OccupancyGrid planning = planning_;
    planning.at(agent.row, agent.col) = Cell::Free;
    const auto plan = astar(planning, agent, targets_[next_]);
    if (!plan) {
      d.action = unstuck_action(rng_);
      return d;
    }
    const auto [wx, wy] = planning.center(next_waypoint(*plan));
    d.action = action_toward(obs.state, wx, wy);
    return d;
  }

  const std::vector<GridCell>& targets() const { return targets_; }

 private:
  PolicyConfig config_;
  Rng rng_;
  OccupancyGrid planning_;
  std::vector<GridCell> targets_;
  std::size_t next_ = 0;
};

}  // namespace

std::unique_ptr<Policy> make_policy(PolicyKind kind, const PolicyConfig& config, const Scene& scene,
                                    std::uint64_t seed) {
  switch (kind) {
    case PolicyKind::Random: return std::make_unique<RandomPolicy>(seed);
    case PolicyKind::Frontier: return std::make_unique<FrontierPolicy>(config, seed);
    case PolicyKind::Oracle: return std::make_unique<OraclePolicy>(config, scene, seed);
    case PolicyKind::Deux: return std::make_unique<DeuxPolicy>(config, seed);
  }
  fail(ErrorKind::Usage, "unknown policy kind");
}

}  // namespace deux
