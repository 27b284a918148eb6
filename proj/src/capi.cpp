#include "pointode/pointode.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "error.hpp"
#include "geometry.hpp"
#include "model.hpp"
#include "pipeline_sim.hpp"
#include "verify.hpp"

using namespace pointode;

struct pode_cloud {
  geo::PointCloud value;
};
struct pode_plan {
  geo::SamplingPlan value;
};
struct pode_model {
  model::ModelParams value;
};
struct pode_result {
  model::InferenceResult value;
};

namespace {

thread_local std::string tl_last_error;

pode_status set_error(pode_status status, const std::string& message) {
  tl_last_error = message;
  return status;
}

pode_status status_of(const Error& e) {
  switch (e.code()) {
    case errc::invalid_argument:
      return PODE_INVALID_ARGUMENT;
    case errc::io:
      return PODE_IO;
    case errc::format:
      return PODE_FORMAT;
    case errc::shape:
      return PODE_SHAPE;
    case errc::internal:
      return PODE_INTERNAL;
  }
  return PODE_INTERNAL;
}

// Runs the body and funnels every failure into a status + thread-local
// message, keeping exceptions away from the C boundary.
template <typename Fn>
pode_status guarded(Fn&& fn) {
  try {
    fn();
    return PODE_OK;
  } catch (const Error& e) {
    return set_error(status_of(e), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(PODE_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(PODE_INTERNAL, e.what());
  }
}

pode_status require(bool ok, const char* message) {
  return ok ? PODE_OK : set_error(PODE_INVALID_ARGUMENT, message);
}

model::ModelConfig to_internal(const pode_config& c) {
  model::ModelConfig cfg;
  cfg.preset.assign(c.preset, strnlen(c.preset, sizeof c.preset));
  cfg.embed_dim = c.embed_dim;
  for (std::size_t s = 0; s < 4; ++s) cfg.stage_dims[s] = c.stage_dims[s];
  cfg.bottleneck_ratio = c.bottleneck_ratio;
  cfg.group_size = c.group_size;
  cfg.ode_iterations = static_cast<int>(c.ode_iterations);
  cfg.t_end = c.t_end;
  cfg.norm_mode = c.norm_mode == PODE_NORM_GEOMETRIC_AFFINE ? model::NormMode::geometric_affine
                                                            : model::NormMode::pointwise;
  cfg.block_kind =
      c.block_kind == PODE_BLOCK_RESIDUAL ? model::BlockKind::residual : model::BlockKind::ode;
  cfg.reordered = c.reordered != 0;
  cfg.num_classes = c.num_classes;
  return cfg;
}

void to_public(const model::ModelConfig& cfg, pode_config& out) {
  std::memset(&out, 0, sizeof out);
  cfg.preset.copy(out.preset, sizeof out.preset - 1);
  out.embed_dim = static_cast<uint32_t>(cfg.embed_dim);
  for (std::size_t s = 0; s < 4; ++s) out.stage_dims[s] = static_cast<uint32_t>(cfg.stage_dims[s]);
  out.bottleneck_ratio = static_cast<uint32_t>(cfg.bottleneck_ratio);
  out.group_size = static_cast<uint32_t>(cfg.group_size);
  out.ode_iterations = static_cast<uint32_t>(cfg.ode_iterations);
  out.t_end = cfg.t_end;
  out.norm_mode = cfg.norm_mode == model::NormMode::geometric_affine ? PODE_NORM_GEOMETRIC_AFFINE
                                                                     : PODE_NORM_POINTWISE;
  out.block_kind =
      cfg.block_kind == model::BlockKind::residual ? PODE_BLOCK_RESIDUAL : PODE_BLOCK_ODE;
  out.reordered = cfg.reordered ? 1 : 0;
  out.num_classes = static_cast<uint32_t>(cfg.num_classes);
}

}  // namespace

extern "C" {

const char* pode_version(void) { return "1.0.0"; }

const char* pode_last_error(void) { return tl_last_error.c_str(); }

pode_status pode_config_preset(const char* name, pode_config* out) {
  if (pode_status s = require(name && out, "config_preset needs a name and an output"); s != PODE_OK)
    return s;
  return guarded([&] { to_public(model::preset_config(name), *out); });
}

const char* pode_preset_names(void) {
  static const std::string joined = [] {
    std::string s;
    for (const auto& name : model::preset_names()) {
      if (!s.empty()) s += ',';
      s += name;
    }
    return s;
  }();
  return joined.c_str();
}

pode_status pode_count_params(const pode_config* config, pode_param_counts* out) {
  if (pode_status s = require(config && out, "count_params needs a config and an output");
      s != PODE_OK)
    return s;
  return guarded([&] {
    model::ParamCounts counts = model::count_params(to_internal(*config));
    out->feature_extractor = counts.feature_extractor;
    out->head = counts.head;
    out->total = counts.total;
  });
}

pode_status pode_count_flops(const pode_config* config, uint64_t n_points, uint64_t* out) {
  if (pode_status s = require(config && out, "count_flops needs a config and an output");
      s != PODE_OK)
    return s;
  return guarded(
      [&] { *out = model::count_flops(to_internal(*config), static_cast<std::size_t>(n_points)); });
}

pode_status pode_cloud_load(const char* path, pode_cloud** out) {
  if (pode_status s = require(path && out, "cloud_load needs a path and an output"); s != PODE_OK)
    return s;
  return guarded([&] { *out = new pode_cloud{geo::load_cloud(path)}; });
}

pode_status pode_cloud_create(const double* xyz, size_t n_points, pode_cloud** out) {
  if (pode_status s = require(out && (xyz || n_points == 0), "cloud_create needs coordinates");
      s != PODE_OK)
    return s;
  return guarded([&] {
    auto cloud = new pode_cloud;
    cloud->value.xyz.assign(xyz, xyz + 3 * n_points);
    *out = cloud;
  });
}

size_t pode_cloud_size(const pode_cloud* cloud) { return cloud ? cloud->value.size() : 0; }

pode_status pode_cloud_normalize(pode_cloud* cloud) {
  if (pode_status s = require(cloud != nullptr, "cloud_normalize needs a cloud"); s != PODE_OK)
    return s;
  return guarded([&] { geo::normalize_unit_sphere(cloud->value); });
}

void pode_cloud_free(pode_cloud* cloud) { delete cloud; }

pode_status pode_plan_build(const pode_cloud* cloud, uint32_t k, pode_plan** out) {
  if (pode_status s = require(cloud && out, "plan_build needs a cloud and an output");
      s != PODE_OK)
    return s;
  return guarded([&] { *out = new pode_plan{geo::build_sampling_plan(cloud->value, k)}; });
}

pode_status pode_plan_load(const char* path, pode_plan** out) {
  if (pode_status s = require(path && out, "plan_load needs a path and an output"); s != PODE_OK)
    return s;
  return guarded([&] { *out = new pode_plan{geo::load_plan(path)}; });
}

pode_status pode_plan_save(const pode_plan* plan, const char* path) {
  if (pode_status s = require(plan && path, "plan_save needs a plan and a path"); s != PODE_OK)
    return s;
  return guarded([&] { geo::save_plan(plan->value, path); });
}

void pode_plan_free(pode_plan* plan) { delete plan; }

pode_status pode_model_build(const pode_config* config, uint64_t seed, pode_model** out) {
  if (pode_status s = require(config && out, "model_build needs a config and an output");
      s != PODE_OK)
    return s;
  return guarded([&] { *out = new pode_model{model::build(to_internal(*config), seed)}; });
}

pode_status pode_model_load(const char* path, pode_model** out) {
  if (pode_status s = require(path && out, "model_load needs a path and an output"); s != PODE_OK)
    return s;
  return guarded([&] { *out = new pode_model{model::load_weights(path)}; });
}

pode_status pode_model_save(const pode_model* model, const char* path) {
  if (pode_status s = require(model && path, "model_save needs a model and a path"); s != PODE_OK)
    return s;
  return guarded([&] { model::save_weights(model->value, path); });
}

pode_status pode_model_config(const pode_model* model, pode_config* out) {
  if (pode_status s = require(model && out, "model_config needs a model and an output");
      s != PODE_OK)
    return s;
  to_public(model->value.config, *out);
  return PODE_OK;
}

pode_status pode_model_set_solver(pode_model* model, uint32_t ode_iterations, double t_end) {
  if (pode_status s = require(model != nullptr, "model_set_solver needs a model"); s != PODE_OK)
    return s;
  return guarded([&] {
    model::ModelConfig cfg = model->value.config;
    cfg.ode_iterations = static_cast<int>(ode_iterations);
    cfg.t_end = t_end;
    cfg.validate();
    model->value.config = cfg;
  });
}

void pode_model_free(pode_model* model) { delete model; }

pode_status pode_infer(const pode_model* model, const pode_cloud* cloud, const pode_plan* plan,
                       pode_numeric numeric, int threads, pode_result** out) {
  if (pode_status s = require(model && cloud && out, "infer needs a model, a cloud, an output");
      s != PODE_OK)
    return s;
  if (pode_status s = require(numeric == PODE_NUMERIC_FLOAT || numeric == PODE_NUMERIC_FIXED,
                              "numeric must be float or fixed");
      s != PODE_OK)
    return s;
  return guarded([&] {
    model::Numeric mode =
        numeric == PODE_NUMERIC_FIXED ? model::Numeric::fixed : model::Numeric::floating;
    int n_threads = threads < 1 ? 1 : threads;
    if (plan) {
      *out = new pode_result{
          model::infer(cloud->value, plan->value, model->value, mode, n_threads)};
    } else {
      geo::SamplingPlan local =
          geo::build_sampling_plan(cloud->value, model->value.config.group_size);
      *out = new pode_result{model::infer(cloud->value, local, model->value, mode, n_threads)};
    }
  });
}

size_t pode_result_feature_len(const pode_result* result) {
  return result ? result->value.global_feature.size() : 0;
}

pode_status pode_result_feature(const pode_result* result, double* out) {
  if (pode_status s = require(result && out, "result_feature needs a result and an output");
      s != PODE_OK)
    return s;
  std::memcpy(out, result->value.global_feature.data(),
              result->value.global_feature.size() * sizeof(double));
  return PODE_OK;
}

pode_status pode_result_stage_shape(const pode_result* result, size_t stage, size_t* rows,
                                    size_t* dim) {
  if (pode_status s = require(result && rows && dim && stage < 4,
                              "result_stage_shape needs a result, outputs, stage < 4");
      s != PODE_OK)
    return s;
  *rows = result->value.stage_rows[stage];
  *dim = *rows == 0 ? 0 : result->value.stage_features[stage].size() / *rows;
  return PODE_OK;
}

pode_status pode_result_stage_features(const pode_result* result, size_t stage, double* out) {
  if (pode_status s = require(result && out && stage < 4,
                              "result_stage_features needs a result, an output, stage < 4");
      s != PODE_OK)
    return s;
  std::memcpy(out, result->value.stage_features[stage].data(),
              result->value.stage_features[stage].size() * sizeof(double));
  return PODE_OK;
}

size_t pode_result_logits_len(const pode_result* result) {
  return result ? result->value.logits.size() : 0;
}

pode_status pode_result_logits(const pode_result* result, double* out) {
  if (pode_status s = require(result && out, "result_logits needs a result and an output");
      s != PODE_OK)
    return s;
  std::memcpy(out, result->value.logits.data(), result->value.logits.size() * sizeof(double));
  return PODE_OK;
}

pode_status pode_result_stage_ms(const pode_result* result, size_t stage, double* prep_ms,
                                 double* ode_ms) {
  if (pode_status s = require(result && prep_ms && ode_ms && stage < 4,
                              "result_stage_ms needs a result, outputs, stage < 4");
      s != PODE_OK)
    return s;
  *prep_ms = result->value.stage_timings[stage].prep_ms;
  *ode_ms = result->value.stage_timings[stage].ode_ms;
  return PODE_OK;
}

pode_status pode_result_embed_ms(const pode_result* result, double* out) {
  if (pode_status s = require(result && out, "result_embed_ms needs a result and an output");
      s != PODE_OK)
    return s;
  *out = result->value.embed_ms;
  return PODE_OK;
}

pode_status pode_result_head_ms(const pode_result* result, double* out) {
  if (pode_status s = require(result && out, "result_head_ms needs a result and an output");
      s != PODE_OK)
    return s;
  *out = result->value.head_ms;
  return PODE_OK;
}

void pode_result_free(pode_result* result) { delete result; }

pode_status pode_pipeline_default_latencies(const pode_config* config, size_t stage,
                                            uint64_t lanes, uint64_t steps[4]) {
  if (pode_status s =
          require(config && steps, "pipeline_default_latencies needs a config and an output");
      s != PODE_OK)
    return s;
  return guarded([&] {
    pipeline::StageLatency lat = pipeline::default_latencies(to_internal(*config), stage, lanes);
    for (std::size_t i = 0; i < 4; ++i) steps[i] = lat.steps[i];
  });
}

pode_status pode_pipeline_simulate(uint64_t n_groups, const uint64_t steps[4],
                                   pode_pipeline_report* out) {
  if (pode_status s = require(steps && out, "pipeline_simulate needs latencies and an output");
      s != PODE_OK)
    return s;
  return guarded([&] {
    pipeline::StageLatency lat;
    for (std::size_t i = 0; i < 4; ++i) lat.steps[i] = steps[i];
    pipeline::PipelineReport report = pipeline::simulate(n_groups, lat);
    out->sequential_cycles = report.sequential_cycles;
    out->pipelined_cycles = report.pipelined_cycles;
    out->speedup = report.speedup;
    for (std::size_t i = 0; i < 4; ++i) out->occupancy[i] = report.occupancy[i];
  });
}

const char* pode_pipeline_step_name(size_t step) {
  return step < pipeline::kStepNames.size() ? pipeline::kStepNames[step] : nullptr;
}

size_t pode_verify_count(void) { return verify::property_count(); }

const char* pode_verify_name(size_t index) {
  return index < verify::property_count() ? verify::property_name(index).c_str() : nullptr;
}

const char* pode_verify_summary(size_t index) {
  return index < verify::property_count() ? verify::property_summary(index).c_str() : nullptr;
}

pode_status pode_verify_run(size_t index, uint64_t seed) {
  bool passed = false;
  pode_status s = guarded([&] { passed = verify::run_property(index, seed); });
  if (s != PODE_OK) return s;
  if (!passed)
    return set_error(PODE_PROPERTY,
                     "property '" + verify::property_name(index) + "' failed for this seed");
  return PODE_OK;
}

}  // extern "C"
