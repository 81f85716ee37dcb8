#include "config.hpp"

#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "error.hpp"

namespace deux {

using nlohmann::json;

void RunConfig::validate() const {
  if (seeds.empty()) fail(ErrorKind::Usage, "config: seeds must not be empty");
  world.validate();
  if (policies.empty()) fail(ErrorKind::Usage, "config: policies must not be empty");
  std::set<PolicyKind> seen(policies.begin(), policies.end());
  if (seen.size() != policies.size()) fail(ErrorKind::Usage, "config: duplicate policy");
  budget.validate();
  if (train_scenes < 1) fail(ErrorKind::Usage, "config: train_scenes must be >= 1");
  if (image_size < 16) fail(ErrorKind::Usage, "config: image_size must be >= 16");
  if (sparse_points < 1) fail(ErrorKind::Usage, "config: sparse_points must be >= 1");
  if (min_sparse_points < 0) fail(ErrorKind::Usage, "config: min_sparse_points must be >= 0");
  weights.validate();
  init.validate();
  grid.validate();
  if (fit_triplets < 1) fail(ErrorKind::Usage, "config: fit_triplets must be >= 1");
  if (oracle_targets < 1) fail(ErrorKind::Usage, "config: oracle_targets must be >= 1");
  if (!(top_fraction > 0.0 && top_fraction <= 1.0)) fail(ErrorKind::Usage, "config: top_fraction must be in (0, 1]");
  if (test_scenes < 1 || test_sweep_steps < 3 || test_stride < 1)
    fail(ErrorKind::Usage, "config: test set needs test_scenes >= 1, test_sweep_steps >= 3, test_stride >= 1");
  if (jobs < 1) fail(ErrorKind::Usage, "config: jobs must be >= 1");
}

PolicyConfig RunConfig::policy_config() const {
  PolicyConfig pc;
  pc.oracle_targets = oracle_targets;
  pc.top_fraction = top_fraction;
  return pc;
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) fail(ErrorKind::Usage, "config: " + where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* key : keys) ok = ok || k == key;
    if (!ok) fail(ErrorKind::Usage, "config: unknown key '" + where + k + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json world_json(const WorldParams& w) {
  return {{"family", to_string(w.family)},
          {"size_x", w.size_x},
          {"size_y", w.size_y},
          {"levels", w.levels},
          {"rooms_min", w.rooms_min},
          {"rooms_max", w.rooms_max},
          {"min_room_cells", w.min_room_cells},
          {"door_width", w.door_width},
          {"clutter_density", w.clutter_density},
          {"noise_amplitude", w.noise_amplitude},
          {"hard_rooms", w.hard_rooms},
          {"hard_noise_amplitude", w.hard_noise_amplitude}};
}

WorldParams world_from(const json& j) {
  reject_unknown(j,
                 {"family", "size_x", "size_y", "levels", "rooms_min", "rooms_max", "min_room_cells", "door_width",
                  "clutter_density", "noise_amplitude", "hard_rooms", "hard_noise_amplitude"},
                 "world.");
  WorldParams w = WorldParams::preset(WorldFamily::Office);
  if (j.contains("family")) w = WorldParams::preset(world_family_from_string(j.at("family").get<std::string>()));
  read(j, "size_x", w.size_x);
  read(j, "size_y", w.size_y);
  read(j, "levels", w.levels);
  read(j, "rooms_min", w.rooms_min);
  read(j, "rooms_max", w.rooms_max);
  read(j, "min_room_cells", w.min_room_cells);
  read(j, "door_width", w.door_width);
  read(j, "clutter_density", w.clutter_density);
  read(j, "noise_amplitude", w.noise_amplitude);
  read(j, "hard_rooms", w.hard_rooms);
  read(j, "hard_noise_amplitude", w.hard_noise_amplitude);
  return w;
}

json weights_json(const LossWeights& w) {
  return {{"lambda_co", w.lambda_co}, {"lambda_st", w.lambda_st}, {"lambda_sz", w.lambda_sz}, {"lambda_sm", w.lambda_sm}};
}

LossWeights weights_from(const json& j) {
  reject_unknown(j, {"lambda_co", "lambda_st", "lambda_sz", "lambda_sm"}, "weights.");
  LossWeights w;
  read(j, "lambda_co", w.lambda_co);
  read(j, "lambda_st", w.lambda_st);
  read(j, "lambda_sz", w.lambda_sz);
  read(j, "lambda_sm", w.lambda_sm);
  return w;
}

json to_json_value(const RunConfig& c, bool for_hash) {
  json policies = json::array();
  for (PolicyKind k : c.policies) policies.push_back(to_string(k));
  json j{{"seeds", c.seeds},
         {"world", world_json(c.world)},
         {"policies", policies},
         {"max_steps", c.budget.max_steps},
         {"train_scenes", c.train_scenes},
         {"image_size", c.image_size},
         {"sparse_points", c.sparse_points},
         {"min_sparse_points", c.min_sparse_points},
         {"weights", weights_json(c.weights)},
         {"init", {{"idw_neighbors", c.init.idw_neighbors},
                   {"idw_power", c.init.idw_power},
                   {"refine_iters", c.init.refine_iters},
                   {"edge_weight", c.init.edge_weight}}},
         {"grid", {{"idw_power", c.grid.idw_power},
                   {"refine_iters", c.grid.refine_iters},
                   {"edge_weight", c.grid.edge_weight},
                   {"idw_neighbors", c.grid.idw_neighbors}}},
         {"fit_triplets", c.fit_triplets},
         {"oracle_targets", c.oracle_targets},
         {"top_fraction", c.top_fraction},
         {"seed_model_ground_truth", c.seed_model_ground_truth},
         {"test_seed", c.test_seed},
         {"test_scenes", c.test_scenes},
         {"test_sweep_steps", c.test_sweep_steps},
         {"test_stride", c.test_stride}};
  if (!for_hash) {
    j["out_dir"] = c.out_dir;
    j["jobs"] = c.jobs;
  }
  return j;
}

}  // namespace

RunConfig run_config_from_json(const std::string& text) {
  RunConfig c;
  try {
    const json j = json::parse(text);
    reject_unknown(j,
                   {"seeds", "world", "policies", "max_steps", "train_scenes", "image_size", "sparse_points",
                    "min_sparse_points", "weights", "init", "grid", "fit_triplets", "oracle_targets", "top_fraction",
                    "seed_model_ground_truth", "test_seed", "test_scenes", "test_sweep_steps", "test_stride", "out_dir",
                    "jobs"},
                   "");
    read(j, "seeds", c.seeds);
    if (j.contains("world")) c.world = world_from(j.at("world"));
    if (j.contains("policies")) {
      c.policies.clear();
      for (const auto& p : j.at("policies")) c.policies.push_back(policy_from_string(p.get<std::string>()));
    }
    read(j, "max_steps", c.budget.max_steps);
    read(j, "train_scenes", c.train_scenes);
    read(j, "image_size", c.image_size);
    read(j, "sparse_points", c.sparse_points);
    read(j, "min_sparse_points", c.min_sparse_points);
    if (j.contains("weights")) c.weights = weights_from(j.at("weights"));
    if (j.contains("init")) {
      const json& i = j.at("init");
      reject_unknown(i, {"idw_neighbors", "idw_power", "refine_iters", "edge_weight"}, "init.");
      read(i, "idw_neighbors", c.init.idw_neighbors);
      read(i, "idw_power", c.init.idw_power);
      read(i, "refine_iters", c.init.refine_iters);
      read(i, "edge_weight", c.init.edge_weight);
    }
    if (j.contains("grid")) {
      const json& g = j.at("grid");
      reject_unknown(g, {"idw_power", "refine_iters", "edge_weight", "idw_neighbors"}, "grid.");
      read(g, "idw_power", c.grid.idw_power);
      read(g, "refine_iters", c.grid.refine_iters);
      read(g, "edge_weight", c.grid.edge_weight);
      read(g, "idw_neighbors", c.grid.idw_neighbors);
    }
    read(j, "fit_triplets", c.fit_triplets);
    read(j, "oracle_targets", c.oracle_targets);
    read(j, "top_fraction", c.top_fraction);
    read(j, "seed_model_ground_truth", c.seed_model_ground_truth);
    read(j, "test_seed", c.test_seed);
    read(j, "test_scenes", c.test_scenes);
    read(j, "test_sweep_steps", c.test_sweep_steps);
    read(j, "test_stride", c.test_stride);
    read(j, "out_dir", c.out_dir);
    read(j, "jobs", c.jobs);
  } catch (const json::exception& e) {
    fail(ErrorKind::Usage, std::string("config: ") + e.what());
  }
  c.init.weights = c.weights;
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return run_config_from_json(ss.str());
}

std::string run_config_to_json(const RunConfig& c) { return to_json_value(c, false).dump(2); }

std::string config_hash(const RunConfig& c) {
  const std::string text = to_json_value(c, true).dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void init_logging_from_env() {
  const char* env = std::getenv("DEUX_LOG");
  if (!env || !*env) {
    spdlog::set_level(spdlog::level::warn);
    return;
  }
  const auto level = spdlog::level::from_str(env);
  if (level == spdlog::level::off && std::string(env) != "off")
    fail(ErrorKind::Usage, std::string("DEUX_LOG: unknown level '") + env + "'");
  spdlog::set_level(level);
}

}  // namespace deux
