#include "deux/deux.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <new>
#include <sstream>
#include <string>

#include <spdlog/spdlog.h>

#include "config.hpp"
#include "error.hpp"
#include "pipeline.hpp"

struct deux_config {
  deux::RunConfig value;
};
struct deux_scene {
  std::shared_ptr<const deux::Scene> value;
};
struct deux_completor {
  deux::CompletorParams value;
};

namespace {

thread_local std::string g_last_error;

deux_status status_of(deux::ErrorKind k) {
  using deux::ErrorKind;
  switch (k) {
    case ErrorKind::Usage: return DEUX_ERR_USAGE;
    case ErrorKind::Format: return DEUX_ERR_FORMAT;
    case ErrorKind::Domain: return DEUX_ERR_DOMAIN;
    case ErrorKind::Shape: return DEUX_ERR_SHAPE;
    case ErrorKind::UndefinedLoss: return DEUX_ERR_UNDEFINED_LOSS;
    case ErrorKind::Dependency: return DEUX_ERR_DEPENDENCY;
    case ErrorKind::Io: return DEUX_ERR_IO;
    case ErrorKind::Generation: return DEUX_ERR_GENERATION;
    case ErrorKind::Precondition: return DEUX_ERR_PRECONDITION;
  }
  return DEUX_ERR_INTERNAL;
}

template <typename Fn>
deux_status guarded(Fn&& fn) {
  try {
    static std::once_flag logging;
    std::call_once(logging, [] { deux::init_logging_from_env(); });
    fn();
    g_last_error.clear();
    return DEUX_OK;
  } catch (const deux::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return DEUX_ERR_IO;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return DEUX_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DEUX_ERR_INTERNAL;
  }
}

template <typename T>
void need(const T* p, const char* what) {
  if (!p) deux::fail(deux::ErrorKind::Usage, std::string(what) + " must not be null");
}

std::optional<deux::SeedModel> seed_model_for(const deux::RunConfig& c, deux::PolicyKind kind,
                                              const deux_completor* seed_model) {
  if (kind != deux::PolicyKind::Deux) return std::nullopt;
  deux::SeedModel sm;
  sm.ground_truth = c.seed_model_ground_truth;
  if (seed_model) {
    sm.params = seed_model->value;
  } else if (c.seed_model_ground_truth) {
    sm.params = c.init;
  } else {
    deux::fail(deux::ErrorKind::Dependency, "the deux policy needs a seed model (pass --seed-model <path>)");
  }
  return sm;
}

void write_string(const std::string& s, char* buf, std::size_t size) {
  if (!buf || size < s.size() + 1) deux::fail(deux::ErrorKind::Usage, "output buffer too small");
  std::memcpy(buf, s.c_str(), s.size() + 1);
}

}  // namespace

extern "C" {

const char* deux_last_error(void) { return g_last_error.c_str(); }

const char* deux_status_name(deux_status status) {
  switch (status) {
    case DEUX_OK: return "ok";
    case DEUX_ERR_USAGE: return "usage error";
    case DEUX_ERR_FORMAT: return "format error";
    case DEUX_ERR_DOMAIN: return "domain error";
    case DEUX_ERR_SHAPE: return "shape error";
    case DEUX_ERR_UNDEFINED_LOSS: return "undefined loss";
    case DEUX_ERR_DEPENDENCY: return "dependency error";
    case DEUX_ERR_IO: return "i/o error";
    case DEUX_ERR_GENERATION: return "generation error";
    case DEUX_ERR_PRECONDITION: return "precondition error";
    case DEUX_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* deux_version(void) { return "0.1.0"; }

deux_status deux_config_default(deux_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new deux_config{};
  });
}

deux_status deux_config_parse(const char* json, deux_config** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "out");
    *out = new deux_config{deux::run_config_from_json(json)};
  });
}

deux_status deux_config_load(const char* path, deux_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new deux_config{deux::load_run_config(path)};
  });
}

deux_status deux_config_set_seed(deux_config* config, uint64_t seed) {
  return guarded([&] {
    need(config, "config");
    config->value.seeds = {seed};
  });
}

deux_status deux_config_set_steps(deux_config* config, int max_steps) {
  return guarded([&] {
    need(config, "config");
    deux::EpisodeBudget b{max_steps};
    b.validate();
    config->value.budget = b;
  });
}

deux_status deux_config_set_jobs(deux_config* config, int jobs) {
  return guarded([&] {
    need(config, "config");
    if (jobs < 1) deux::fail(deux::ErrorKind::Usage, "jobs must be >= 1");
    config->value.jobs = jobs;
  });
}

deux_status deux_config_set_out_dir(deux_config* config, const char* dir) {
  return guarded([&] {
    need(config, "config");
    need(dir, "dir");
    config->value.out_dir = dir;
  });
}

deux_status deux_config_set_policies(deux_config* config, const char* policies) {
  return guarded([&] {
    need(config, "config");
    need(policies, "policies");
    deux::RunConfig c = config->value;
    c.policies.clear();
    std::stringstream ss(policies);
    for (std::string item; std::getline(ss, item, ',');) c.policies.push_back(deux::policy_from_string(item));
    c.validate();
    config->value = c;
  });
}

deux_status deux_config_hash(const deux_config* config, char* buf, size_t size) {
  return guarded([&] {
    need(config, "config");
    write_string(deux::config_hash(config->value), buf, size);
  });
}

deux_status deux_config_to_json(const deux_config* config, char* buf, size_t size, size_t* needed) {
  return guarded([&] {
    need(config, "config");
    const std::string s = deux::run_config_to_json(config->value);
    if (needed) *needed = s.size() + 1;
    if (buf) write_string(s, buf, size);
  });
}

void deux_config_free(deux_config* config) { delete config; }

deux_status deux_scene_generate(const deux_config* config, uint64_t seed, deux_scene** out) {
  return guarded([&] {
    need(config, "config");
    need(out, "out");
    *out = new deux_scene{std::make_shared<const deux::Scene>(deux::generate_scene(seed, config->value.world))};
  });
}

deux_status deux_scene_load(const char* path, deux_scene** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new deux_scene{std::make_shared<const deux::Scene>(deux::load_scene(path))};
  });
}

deux_status deux_scene_save(const deux_scene* scene, const char* path) {
  return guarded([&] {
    need(scene, "scene");
    need(path, "path");
    deux::save_scene(*scene->value, path);
  });
}

deux_status deux_scene_info(const deux_scene* scene, int* size_x, int* size_y, int* free_cells) {
  return guarded([&] {
    need(scene, "scene");
    if (size_x) *size_x = scene->value->nx;
    if (size_y) *size_y = scene->value->ny;
    if (free_cells) *free_cells = scene->value->free_cell_count();
  });
}

void deux_scene_free(deux_scene* scene) { delete scene; }

deux_status deux_completor_default(const deux_config* config, deux_completor** out) {
  return guarded([&] {
    need(config, "config");
    need(out, "out");
    *out = new deux_completor{config->value.init};
  });
}

deux_status deux_completor_load(const char* path, deux_completor** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    std::ifstream in(path);
    if (!in) deux::fail(deux::ErrorKind::Io, std::string("cannot open completor file ") + path);
    std::stringstream ss;
    ss << in.rdbuf();
    *out = new deux_completor{deux::completor_from_json(ss.str())};
  });
}

deux_status deux_completor_save(const deux_completor* completor, const char* path) {
  return guarded([&] {
    need(completor, "completor");
    need(path, "path");
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path);
    out << deux::completor_to_json(completor->value) << "\n";
    if (!out) deux::fail(deux::ErrorKind::Io, std::string("cannot write ") + path);
  });
}

void deux_completor_free(deux_completor* completor) { delete completor; }

deux_status deux_explore(const deux_config* config, const deux_scene* scene, const char* policy, uint64_t seed,
                         const deux_completor* seed_model, const char* out_dir, deux_episode_summary* summary) {
  return guarded([&] {
    need(config, "config");
    need(scene, "scene");
    need(policy, "policy");
    need(out_dir, "out_dir");
    const auto& c = config->value;
    const auto kind = deux::policy_from_string(policy);
    deux::PolicyConfig pc = c.policy_config();
    pc.seed_model = seed_model_for(c, kind, seed_model);
    const deux::CollectOptions opts{c.intrinsics(), c.sparse_points, c.min_sparse_points};
    auto ep = deux::collect_episode(scene->value, kind, pc, c.budget, seed, opts);
    deux::write_dataset(std::span(&ep.record, 1), out_dir, deux::config_hash(c));
    const std::filesystem::path dir(out_dir);
    deux::render_trajectory_plot(ep.record, ep.final_map, (dir / "plot.ppm").string());
    deux::write_pgm(ep.final_map, (dir / "map.pgm").string());
    if (summary) {
      summary->steps = static_cast<int>(ep.record.log.size());
      summary->frames = static_cast<int>(ep.record.frame_count());
      summary->coverage = deux::coverage_fraction(*scene->value, ep.final_map);
      summary->episode_return = ep.record.episode_return();
      summary->hard_room_fraction = deux::hard_room_fraction(*scene->value, ep.record);
    }
  });
}

deux_status deux_collect(const deux_config* config, const char* policy, uint64_t seed,
                         const deux_completor* seed_model, const char* out_dir, int* episodes) {
  return guarded([&] {
    need(config, "config");
    need(policy, "policy");
    need(out_dir, "out_dir");
    const auto& c = config->value;
    const auto kind = deux::policy_from_string(policy);
    deux::PolicyConfig pc = c.policy_config();
    pc.seed_model = seed_model_for(c, kind, seed_model);
    const deux::CollectOptions opts{c.intrinsics(), c.sparse_points, c.min_sparse_points};
    const auto seeds = deux::training_scene_seeds(seed, c.train_scenes);
    std::vector<deux::EpisodeRecord> records(seeds.size());
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      spdlog::info("collect: episode {}/{}", i + 1, seeds.size());
      auto scene = std::make_shared<const deux::Scene>(deux::generate_scene(seeds[i], c.world));
      records[i] = deux::collect_episode(scene, kind, pc, c.budget, deux::derive_seed(seed, policy, i), opts).record;
    }
    deux::write_dataset(records, out_dir, deux::config_hash(c));
    if (episodes) *episodes = static_cast<int>(records.size());
  });
}

deux_status deux_fit(const deux_config* config, const char* dataset_dir, deux_completor** out, double* loss) {
  return guarded([&] {
    need(config, "config");
    need(dataset_dir, "dataset_dir");
    need(out, "out");
    const auto& c = config->value;
    const auto data = deux::read_dataset(dataset_dir);
    if (data.config_hash != deux::config_hash(c))
      spdlog::warn("dataset {} was written with config {}, fitting with {}", dataset_dir, data.config_hash,
                   deux::config_hash(c));
    const auto triplets = deux::sample_triplets(data.episodes, c.fit_triplets);
    if (triplets.empty()) deux::fail(deux::ErrorKind::Usage, "fit: dataset has no three consecutive frames");
    const auto fit = deux::fit_completor(triplets, c.init, c.grid, c.jobs);
    if (loss) *loss = fit.loss;
    *out = new deux_completor{fit.params};
  });
}

deux_status deux_eval(const deux_config* config, const deux_completor* completor, const char* dataset_dir,
                      deux_metrics* out) {
  return guarded([&] {
    need(config, "config");
    need(completor, "completor");
    need(out, "out");
    const auto& c = config->value;
    if (!dataset_dir) {
      const auto test = deux::build_test_set(c.world, c.test_scenes, c.test_seed, c.intrinsics(), c.test_sweep_steps,
                                             c.test_stride, c.sparse_points);
      const auto m = deux::evaluate_on_test_set(completor->value, test, c.jobs);
      *out = {m.mae_mm, m.rmse_mm, m.imae_per_km, m.irmse_per_km, static_cast<int>(test.items.size())};
      return;
    }
    const auto data = deux::read_dataset(dataset_dir);
    deux::EvalMetrics sum;
    int n = 0;
    for (const auto& ep : data.episodes) {
      for (std::size_t i = 0; i < ep.frame_count(); ++i) {
        const auto f = ep.frame(i);
        const auto m = deux::evaluate(deux::complete_depth(f.rgb, ep.sparse[i], completor->value), f.depth_gt);
        sum.mae_mm += m.mae_mm;
        sum.rmse_mm += m.rmse_mm;
        sum.imae_per_km += m.imae_per_km;
        sum.irmse_per_km += m.irmse_per_km;
        ++n;
      }
    }
    if (n == 0) deux::fail(deux::ErrorKind::Usage, "eval: dataset has no frames");
    *out = {sum.mae_mm / n, sum.rmse_mm / n, sum.imae_per_km / n, sum.irmse_per_km / n, n};
  });
}

deux_status deux_bench(const deux_config* config, const deux_completor* seed_model, const char* out_dir,
                       deux_progress_fn progress, void* user) {
  return guarded([&] {
    need(config, "config");
    const auto& c = config->value;
    std::optional<deux::CompletorParams> sm;
    if (seed_model) sm = seed_model->value;
    deux::BenchmarkHooks hooks;
    if (progress) hooks.progress = [&](const std::string& msg) { progress(msg.c_str(), user); };
    const auto report = deux::run_benchmark(c, sm, hooks);
    deux::write_report(report, out_dir ? out_dir : c.out_dir);
  });
}

deux_status deux_plot(const char* dataset_dir, const char* out_dir, int* written) {
  return guarded([&] {
    need(dataset_dir, "dataset_dir");
    need(out_dir, "out_dir");
    const auto data = deux::read_dataset(dataset_dir);
    std::filesystem::create_directories(out_dir);
    int n = 0;
    for (std::size_t e = 0; e < data.episodes.size(); ++e) {
      const auto& ep = data.episodes[e];
      const auto path = std::filesystem::path(out_dir) / ("ep_" + std::to_string(e) + ".ppm");
      deux::render_trajectory_plot(ep, deux::rebuild_map(ep), path.string());
      ++n;
    }
    if (written) *written = n;
  });
}

}  // extern "C"
