// deux command-line entry point; a thin layer over the C API.

#include <CLI11.hpp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "deux/deux.h"

namespace {

struct Failure {
  deux_status status;
};

void check(deux_status s) {
  if (s != DEUX_OK) throw Failure{s};
}

int exit_code(deux_status s) {
  switch (s) {
    case DEUX_OK: return 0;
    case DEUX_ERR_USAGE:
    case DEUX_ERR_DEPENDENCY: return 1;
    default: return 2;
  }
}

struct ConfigDeleter {
  void operator()(deux_config* c) const { deux_config_free(c); }
};
struct SceneDeleter {
  void operator()(deux_scene* s) const { deux_scene_free(s); }
};
struct CompletorDeleter {
  void operator()(deux_completor* c) const { deux_completor_free(c); }
};
using ConfigPtr = std::unique_ptr<deux_config, ConfigDeleter>;
using ScenePtr = std::unique_ptr<deux_scene, SceneDeleter>;
using CompletorPtr = std::unique_ptr<deux_completor, CompletorDeleter>;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string policy = "random";
  std::optional<int> steps;
  std::string out;
  std::optional<int> jobs;
  std::string seed_model;
  std::string scene;
  std::string data;
  std::string model;
};

// Config file first, then flag overrides.
ConfigPtr make_config(const Options& o) {
  deux_config* raw = nullptr;
  check(o.config.empty() ? deux_config_default(&raw) : deux_config_load(o.config.c_str(), &raw));
  ConfigPtr c(raw);
  if (o.seed) check(deux_config_set_seed(c.get(), *o.seed));
  if (o.steps) check(deux_config_set_steps(c.get(), *o.steps));
  if (o.jobs) check(deux_config_set_jobs(c.get(), *o.jobs));
  return c;
}

CompletorPtr load_model(const std::string& path) {
  if (path.empty()) return nullptr;
  deux_completor* raw = nullptr;
  check(deux_completor_load(path.c_str(), &raw));
  return CompletorPtr(raw);
}

void add_common(CLI::App* app, Options& o) {
  app->add_option("--config", o.config, "Run config JSON (unknown keys are rejected)")->check(CLI::ExistingFile);
  app->add_option("--jobs", o.jobs, "Worker threads; results do not depend on it")->check(CLI::PositiveNumber);
}

void progress(const char* message, void*) { std::fprintf(stderr, "[deux] %s\n", message); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deux: depth-uncertainty guided exploration and depth completion"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(deux_version()));
  Options o;

  auto* world = app.add_subcommand("world", "Scene tools");
  world->require_subcommand(1);
  auto* gen = world->add_subcommand("gen", "Generate a scene and save it");
  add_common(gen, o);
  gen->add_option("--seed", o.seed, "Scene seed")->required();
  gen->add_option("--out", o.out, "Output scene file")->required();

  auto* explore = app.add_subcommand("explore", "Run one policy in one scene; writes logs, dataset and plot");
  add_common(explore, o);
  explore->add_option("--seed", o.seed, "Scene and episode seed")->required();
  explore->add_option("--policy", o.policy, "random|frontier|oracle|deux")
      ->check(CLI::IsMember({"random", "frontier", "oracle", "deux"}));
  explore->add_option("--steps", o.steps, "Episode budget (actions)")->check(CLI::PositiveNumber);
  explore->add_option("--scene", o.scene, "Scene file instead of generating from --seed")->check(CLI::ExistingFile);
  explore->add_option("--seed-model", o.seed_model, "Completor JSON used by the deux policy");
  explore->add_option("--out", o.out, "Output directory")->required();

  auto* collect = app.add_subcommand("collect", "Collect one episode per training scene into a dataset");
  add_common(collect, o);
  collect->add_option("--seed", o.seed, "Master seed")->required();
  collect->add_option("--policy", o.policy, "random|frontier|oracle|deux")
      ->check(CLI::IsMember({"random", "frontier", "oracle", "deux"}));
  collect->add_option("--steps", o.steps, "Episode budget (actions)")->check(CLI::PositiveNumber);
  collect->add_option("--seed-model", o.seed_model, "Completor JSON used by the deux policy");
  collect->add_option("--out", o.out, "Dataset directory")->required();

  auto* fit = app.add_subcommand("fit", "Fit the completor on a dataset with the unsupervised loss");
  add_common(fit, o);
  fit->add_option("--data", o.data, "Dataset directory")->required();
  fit->add_option("--out", o.out, "Output completor JSON")->required();

  auto* eval = app.add_subcommand("eval", "Depth metrics of a completor on a dataset or the scripted test set");
  add_common(eval, o);
  eval->add_option("--model", o.model, "Completor JSON")->required();
  eval->add_option("--data", o.data, "Dataset directory (default: the config's scripted test set)");

  auto* bench = app.add_subcommand("bench", "Four-policy comparison; writes report.csv and report.json");
  add_common(bench, o);
  bench->add_option("--seed", o.seed, "Run a single master seed instead of the config's list");
  bench->add_option("--steps", o.steps, "Episode budget (actions)")->check(CLI::PositiveNumber);
  bench->add_option("--seed-model", o.seed_model, "Completor JSON to use as the deux seed model");
  bench->add_option("--out", o.out, "Report directory (default: config out_dir)");

  auto* plot = app.add_subcommand("plot", "Trajectory plots for every episode of a dataset");
  plot->add_option("--data", o.data, "Dataset directory")->required();
  plot->add_option("--out", o.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (gen->parsed()) {
      auto c = make_config(o);
      deux_scene* raw = nullptr;
      check(deux_scene_generate(c.get(), *o.seed, &raw));
      ScenePtr s(raw);
      check(deux_scene_save(s.get(), o.out.c_str()));
      int nx = 0, ny = 0, free_cells = 0;
      check(deux_scene_info(s.get(), &nx, &ny, &free_cells));
      std::printf("scene %llu: %dx%d cells, %d free -> %s\n", static_cast<unsigned long long>(*o.seed), nx, ny,
                  free_cells, o.out.c_str());
    } else if (explore->parsed()) {
      auto c = make_config(o);
      deux_scene* raw = nullptr;
      check(o.scene.empty() ? deux_scene_generate(c.get(), *o.seed, &raw) : deux_scene_load(o.scene.c_str(), &raw));
      ScenePtr s(raw);
      auto model = load_model(o.seed_model);
      deux_episode_summary sum{};
      check(deux_explore(c.get(), s.get(), o.policy.c_str(), *o.seed, model.get(), o.out.c_str(), &sum));
      std::printf("%s: %d steps, %d frames kept, coverage %.3f, return %.6f -> %s\n", o.policy.c_str(), sum.steps,
                  sum.frames, sum.coverage, sum.episode_return, o.out.c_str());
    } else if (collect->parsed()) {
      auto c = make_config(o);
      auto model = load_model(o.seed_model);
      int episodes = 0;
      check(deux_collect(c.get(), o.policy.c_str(), *o.seed, model.get(), o.out.c_str(), &episodes));
      std::printf("%d episodes -> %s\n", episodes, o.out.c_str());
    } else if (fit->parsed()) {
      auto c = make_config(o);
      deux_completor* raw = nullptr;
      double loss = 0.0;
      check(deux_fit(c.get(), o.data.c_str(), &raw, &loss));
      CompletorPtr m(raw);
      check(deux_completor_save(m.get(), o.out.c_str()));
      std::printf("fitted loss %.10g -> %s\n", loss, o.out.c_str());
    } else if (eval->parsed()) {
      auto c = make_config(o);
      auto model = load_model(o.model);
      deux_metrics m{};
      check(deux_eval(c.get(), model.get(), o.data.empty() ? nullptr : o.data.c_str(), &m));
      std::printf("frames %d\nmae_mm %.6f\nrmse_mm %.6f\nimae_per_km %.6f\nirmse_per_km %.6f\n", m.frames, m.mae_mm,
                  m.rmse_mm, m.imae_per_km, m.irmse_per_km);
    } else if (bench->parsed()) {
      auto c = make_config(o);
      auto model = load_model(o.seed_model);
      check(deux_bench(c.get(), model.get(), o.out.empty() ? nullptr : o.out.c_str(), progress, nullptr));
      std::printf("report written\n");
    } else if (plot->parsed()) {
      int n = 0;
      check(deux_plot(o.data.c_str(), o.out.c_str(), &n));
      std::printf("%d plots -> %s\n", n, o.out.c_str());
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "deux: %s: %s\n", deux_status_name(f.status), deux_last_error());
    return exit_code(f.status);
  }
  return 0;
}
