/* C interface to the deux exploration and depth-completion library. */
#ifndef DEUX_DEUX_H
#define DEUX_DEUX_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(DEUX_BUILDING_LIBRARY)
#define DEUX_API __declspec(dllexport)
#else
#define DEUX_API __declspec(dllimport)
#endif
#else
#define DEUX_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum deux_status {
  DEUX_OK = 0,
  DEUX_ERR_USAGE = 1,
  DEUX_ERR_FORMAT = 2,
  DEUX_ERR_DOMAIN = 3,
  DEUX_ERR_SHAPE = 4,
  DEUX_ERR_UNDEFINED_LOSS = 5,
  DEUX_ERR_DEPENDENCY = 6,
  DEUX_ERR_IO = 7,
  DEUX_ERR_GENERATION = 8,
  DEUX_ERR_PRECONDITION = 9,
  DEUX_ERR_INTERNAL = 10
} deux_status;

/* Message of the last failed call on this thread; empty after a success. */
DEUX_API const char* deux_last_error(void);
DEUX_API const char* deux_status_name(deux_status status);
DEUX_API const char* deux_version(void);

typedef struct deux_config deux_config;
typedef struct deux_scene deux_scene;
typedef struct deux_completor deux_completor;

typedef struct deux_metrics {
  double mae_mm;
  double rmse_mm;
  double imae_per_km;
  double irmse_per_km;
  int frames;
} deux_metrics;

typedef struct deux_episode_summary {
  int steps;
  int frames;
  double coverage;
  double episode_return;
  double hard_room_fraction;
} deux_episode_summary;

typedef void (*deux_progress_fn)(const char* message, void* user);

/* ---- configuration ---- */
DEUX_API deux_status deux_config_default(deux_config** out);
DEUX_API deux_status deux_config_parse(const char* json, deux_config** out);
DEUX_API deux_status deux_config_load(const char* path, deux_config** out);
/* Replaces the master seed list with a single seed. */
DEUX_API deux_status deux_config_set_seed(deux_config* config, uint64_t seed);
DEUX_API deux_status deux_config_set_steps(deux_config* config, int max_steps);
DEUX_API deux_status deux_config_set_jobs(deux_config* config, int jobs);
DEUX_API deux_status deux_config_set_out_dir(deux_config* config, const char* dir);
/* Comma-separated list, e.g. "random,deux". */
DEUX_API deux_status deux_config_set_policies(deux_config* config, const char* policies);
/* Writes a NUL-terminated string; fails with DEUX_ERR_USAGE if `size` is too small. */
DEUX_API deux_status deux_config_hash(const deux_config* config, char* buf, size_t size);
DEUX_API deux_status deux_config_to_json(const deux_config* config, char* buf, size_t size, size_t* needed);
DEUX_API void deux_config_free(deux_config* config);

/* ---- scenes ---- */
DEUX_API deux_status deux_scene_generate(const deux_config* config, uint64_t seed, deux_scene** out);
DEUX_API deux_status deux_scene_load(const char* path, deux_scene** out);
DEUX_API deux_status deux_scene_save(const deux_scene* scene, const char* path);
DEUX_API deux_status deux_scene_info(const deux_scene* scene, int* size_x, int* size_y, int* free_cells);
DEUX_API void deux_scene_free(deux_scene* scene);

/* ---- completor parameters ---- */
DEUX_API deux_status deux_completor_default(const deux_config* config, deux_completor** out);
DEUX_API deux_status deux_completor_load(const char* path, deux_completor** out);
DEUX_API deux_status deux_completor_save(const deux_completor* completor, const char* path);
DEUX_API void deux_completor_free(deux_completor* completor);

/* ---- runs ---- */
/* One episode of `policy` in `scene`; writes a one-episode dataset plus plot.ppm and map.pgm.
   `seed_model` may be NULL except for the deux policy (unless the config uses ground-truth depth). */
DEUX_API deux_status deux_explore(const deux_config* config, const deux_scene* scene, const char* policy,
                                  uint64_t seed, const deux_completor* seed_model, const char* out_dir,
                                  deux_episode_summary* summary);
/* One episode per training scene of the master seed, written as a dataset. */
DEUX_API deux_status deux_collect(const deux_config* config, const char* policy, uint64_t seed,
                                  const deux_completor* seed_model, const char* out_dir, int* episodes);
DEUX_API deux_status deux_fit(const deux_config* config, const char* dataset_dir, deux_completor** out,
                              double* loss);
/* Metrics over every frame of a dataset, or over the config's scripted test set when dataset_dir is NULL. */
DEUX_API deux_status deux_eval(const deux_config* config, const deux_completor* completor, const char* dataset_dir,
                               deux_metrics* out);
/* Writes report.csv and report.json into out_dir (the config's out_dir when NULL). */
DEUX_API deux_status deux_bench(const deux_config* config, const deux_completor* seed_model, const char* out_dir,
                                deux_progress_fn progress, void* user);
/* Trajectory plot per dataset episode: out_dir/ep_<k>.ppm. */
DEUX_API deux_status deux_plot(const char* dataset_dir, const char* out_dir, int* written);

#ifdef __cplusplus
}
#endif

#endif
