#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "geometry.hpp"
#include "nn_core.hpp"

namespace pointode::model {

enum class NormMode { pointwise, geometric_affine };
enum class BlockKind { residual, ode };

// Structural description of one network. Stage s consumes features of width
// stage_dims[s-1] (the embedding width for s=0) and produces stage_dims[s]
// over half as many rows.
struct ModelConfig {
  std::string preset = "elite";  // tag used in reports, free-form
  std::size_t embed_dim = 32;
  std::array<std::size_t, 4> stage_dims{64, 128, 256, 256};
  std::size_t bottleneck_ratio = 4;  // block hidden width = F_s / ratio
  std::size_t group_size = 12;       // K neighbors per sampled centroid
  int ode_iterations = 4;            // per-stage Euler budget, split across that stage's blocks
  double t_end = 0.2;
  NormMode norm_mode = NormMode::pointwise;
  BlockKind block_kind = BlockKind::ode;
  // true places every block after pooling; false keeps the classic split of
  // half the blocks per neighbor row before pooling, half after
  bool reordered = true;
  std::size_t num_classes = 40;

  void validate() const;
  std::size_t bottleneck(std::size_t s) const { return stage_dims[s] / bottleneck_ratio; }
  std::size_t pre_blocks_in_stage(std::size_t s) const;
  std::size_t post_blocks_in_stage(std::size_t s) const;
};

// Known presets: "pointmlp-like", "naive", "pointode", "elite".
ModelConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

struct StageParams {
  nn::NormParams norm;
  nn::FcParams mlp_fc;  // 2*F_prev -> F_s, applied to every neighbor row
  nn::BnParams mlp_bn;
  std::vector<nn::MlpBlockParams> pre_blocks;   // per neighbor row, before pooling
  std::vector<nn::MlpBlockParams> post_blocks;  // per centroid, after pooling
};

struct ModelParams {
  ModelConfig config;
  nn::FcParams embed_fc;  // 3 -> F0
  nn::BnParams embed_bn;
  std::array<StageParams, 4> stages;
  nn::FcParams head_fc1;  // F4 -> 512
  nn::BnParams head_bn1;
  nn::FcParams head_fc2;  // 512 -> 256
  nn::BnParams head_bn2;
  nn::FcParams head_fc3;  // 256 -> num_classes
};

// Deterministic synthetic parameters: weights uniform in +-1/sqrt(fan_in)
// drawn from a seeded mt19937_64 and snapped to f32 so file round-trips are
// bit-exact, biases zero, BN folded to identity, norm affine to identity.
ModelParams build(const ModelConfig& config, std::uint64_t seed);

struct ParamCounts {
  std::uint64_t feature_extractor = 0;
  std::uint64_t head = 0;
  std::uint64_t total = 0;
};
ParamCounts count_params(const ModelConfig& config);

// Multiply-accumulates count as two operations; normalization, pooling and
// activation costs are included. n_points must be a positive multiple of 16.
std::uint64_t count_flops(const ModelConfig& config, std::size_t n_points);

enum class Numeric { floating, fixed };

struct StageTiming {
  double prep_ms = 0;  // gather, normalization, per-row MLP, pooling
  double ode_ms = 0;   // residual / ODE block evaluations
};

struct InferenceResult {
  // one N_s x F_s row-major array per stage; fixed-path values are decoded
  // raws and therefore exact doubles
  std::array<std::vector<double>, 4> stage_features;
  std::array<std::size_t, 4> stage_rows{};
  std::vector<double> global_feature;  // F4
  std::vector<double> logits;          // num_classes
  std::array<StageTiming, 4> stage_timings;
  double embed_ms = 0;
  double head_ms = 0;
};

// Per-point FC(3->F0)+BN+ReLU rows, N x F0 row-major. Fixed-path results
// come back as exactly decoded doubles, as everywhere below.
std::vector<double> embed(const geo::PointCloud& cloud, const ModelParams& params,
                          Numeric numeric, int threads = 1);

// One grouping stage: gather each centroid's K neighbor rows, normalize
// them against the centroid feature, append the raw centroid feature, run
// the per-row MLP, apply any pre-pooling blocks, max-pool, apply the
// post-pooling blocks. Returns rows x F_s features for stage index s.
std::vector<double> run_stage(std::size_t s, std::span<const double> features,
                              const geo::GroupIndex& group, const ModelParams& params,
                              Numeric numeric, int threads = 1, StageTiming* timing = nullptr);

// cloud must already be normalized; plan must match the cloud size and the
// config's group size. threads <= 1 runs inline; the partitioning never
// changes results in either numeric path.
InferenceResult infer(const geo::PointCloud& cloud, const geo::SamplingPlan& plan,
                      const ModelParams& params, Numeric numeric, int threads = 1);

// Weight archive: magic "PODE", version, embedded config, then one record
// per tensor (name, dtype, dims, f32 payload) in a fixed order.
void save_weights(const ModelParams& params, const std::string& path);
ModelParams load_weights(const std::string& path);

}  // namespace pointode::model
