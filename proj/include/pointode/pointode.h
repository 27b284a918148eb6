#ifndef POINTODE_H
#define POINTODE_H

/* Point-cloud feature extraction and classification behind a plain C
 * interface. Objects live behind opaque handles created and destroyed by
 * this library; every fallible call returns a pode_status, and the message
 * for the most recent failure on the calling thread is available from
 * pode_last_error().
 */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pode_status {
  PODE_OK = 0,
  PODE_INVALID_ARGUMENT = 1,
  PODE_IO = 2,
  PODE_FORMAT = 3,
  PODE_SHAPE = 4,
  PODE_PROPERTY = 5, /* a self-check property failed */
  PODE_INTERNAL = 6
} pode_status;

typedef enum pode_numeric {
  PODE_NUMERIC_FLOAT = 0,
  PODE_NUMERIC_FIXED = 1 /* bit-faithful Q8.16 path */
} pode_numeric;

typedef enum pode_norm_mode {
  PODE_NORM_POINTWISE = 0,
  PODE_NORM_GEOMETRIC_AFFINE = 1
} pode_norm_mode;

typedef enum pode_block_kind {
  PODE_BLOCK_RESIDUAL = 0,
  PODE_BLOCK_ODE = 1
} pode_block_kind;

/* Architecture description. Fill from a preset, then adjust fields freely;
 * builders validate before use. */
typedef struct pode_config {
  char preset[64];
  uint32_t embed_dim;
  uint32_t stage_dims[4];
  uint32_t bottleneck_ratio;
  uint32_t group_size;       /* neighbors per sampled centroid */
  uint32_t ode_iterations;   /* solver iteration budget per stage */
  double t_end;              /* integration interval end */
  int32_t norm_mode;         /* pode_norm_mode */
  int32_t block_kind;        /* pode_block_kind */
  int32_t reordered;         /* nonzero: blocks run after the pool */
  uint32_t num_classes;
} pode_config;

typedef struct pode_param_counts {
  uint64_t feature_extractor;
  uint64_t head;
  uint64_t total;
} pode_param_counts;

typedef struct pode_pipeline_report {
  uint64_t sequential_cycles;
  uint64_t pipelined_cycles;
  double speedup;
  double occupancy[4]; /* busy fraction per pipeline step */
} pode_pipeline_report;

typedef struct pode_cloud pode_cloud;
typedef struct pode_plan pode_plan;
typedef struct pode_model pode_model;
typedef struct pode_result pode_result;

const char* pode_version(void);

/* Message for the most recent failure on this thread; never NULL. */
const char* pode_last_error(void);

/* ---- configs and censuses ---- */

/* Known presets: "pointmlp-like", "naive", "pointode", "elite". */
pode_status pode_config_preset(const char* name, pode_config* out);

/* Comma-separated list of preset names. */
const char* pode_preset_names(void);

pode_status pode_count_params(const pode_config* config, pode_param_counts* out);

/* Multiply-accumulate-dominated op count for one forward pass over n_points
 * inputs (positive multiple of 16). */
pode_status pode_count_flops(const pode_config* config, uint64_t n_points, uint64_t* out);

/* ---- point clouds ---- */

/* Text files carry one "x y z" line per point; .bin/.raw/.f32 are packed
 * little-endian f32 triples. */
pode_status pode_cloud_load(const char* path, pode_cloud** out);

/* Copies n interleaved xyz triples. */
pode_status pode_cloud_create(const double* xyz, size_t n_points, pode_cloud** out);

size_t pode_cloud_size(const pode_cloud* cloud);

/* Center on the centroid and scale the farthest point onto the unit sphere. */
pode_status pode_cloud_normalize(pode_cloud* cloud);

void pode_cloud_free(pode_cloud* cloud);

/* ---- sampling plans ---- */

/* Farthest-point sampling plus k-nearest-neighbor grouping for all four
 * stages. The cloud size must be a positive multiple of 16. */
pode_status pode_plan_build(const pode_cloud* cloud, uint32_t k, pode_plan** out);

pode_status pode_plan_load(const char* path, pode_plan** out);
pode_status pode_plan_save(const pode_plan* plan, const char* path);
void pode_plan_free(pode_plan* plan);

/* ---- models ---- */

/* Deterministic random weights for the given architecture and seed. */
pode_status pode_model_build(const pode_config* config, uint64_t seed, pode_model** out);

pode_status pode_model_load(const char* path, pode_model** out);
pode_status pode_model_save(const pode_model* model, const char* path);
pode_status pode_model_config(const pode_model* model, pode_config* out);

/* Adjusts the solver schedule of an existing model. Iteration budget and
 * interval length steer the block iterations only; no tensor changes. */
pode_status pode_model_set_solver(pode_model* model, uint32_t ode_iterations, double t_end);

void pode_model_free(pode_model* model);

/* ---- inference ---- */

/* Runs the full network. When plan is NULL a plan is computed internally
 * from the cloud with the model's group size. threads < 1 means 1. */
pode_status pode_infer(const pode_model* model, const pode_cloud* cloud, const pode_plan* plan,
                       pode_numeric numeric, int threads, pode_result** out);

/* Global feature vector (the classifier input). */
size_t pode_result_feature_len(const pode_result* result);
pode_status pode_result_feature(const pode_result* result, double* out);

/* Per-centroid features of one extractor stage (0-based), row-major
 * rows x dim. */
pode_status pode_result_stage_shape(const pode_result* result, size_t stage, size_t* rows,
                                    size_t* dim);
pode_status pode_result_stage_features(const pode_result* result, size_t stage, double* out);

/* Class scores. */
size_t pode_result_logits_len(const pode_result* result);
pode_status pode_result_logits(const pode_result* result, double* out);

/* Wall-clock milliseconds, split into the grouping/normalization/MLP work
 * and the block-iteration work of each stage. */
pode_status pode_result_stage_ms(const pode_result* result, size_t stage, double* prep_ms,
                                 double* ode_ms);
pode_status pode_result_embed_ms(const pode_result* result, double* out);
pode_status pode_result_head_ms(const pode_result* result, double* out);

void pode_result_free(pode_result* result);

/* ---- pipeline model ---- */

/* Cost-model latencies for one extractor stage (0-based); lanes scales the
 * MAC-bound steps. */
pode_status pode_pipeline_default_latencies(const pode_config* config, size_t stage,
                                            uint64_t lanes, uint64_t steps[4]);

pode_status pode_pipeline_simulate(uint64_t n_groups, const uint64_t steps[4],
                                   pode_pipeline_report* out);

/* Name of pipeline step i (0-based), NULL when out of range. */
const char* pode_pipeline_step_name(size_t step);

/* ---- self checks ---- */

size_t pode_verify_count(void);

/* NULL when out of range. */
const char* pode_verify_name(size_t index);
const char* pode_verify_summary(size_t index);

/* PODE_OK when the property held, PODE_PROPERTY when it failed. */
pode_status pode_verify_run(size_t index, uint64_t seed);

#ifdef __cplusplus
}
#endif

#endif /* POINTODE_H */
