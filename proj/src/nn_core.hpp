#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "error.hpp"
#include "fixed_point.hpp"

namespace pointode::nn {

// Fully connected layer, weight is out_dim x in_dim row-major.
struct FcParams {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<double> weight;
  std::vector<double> bias;
};

// Batch norm folded for inference: y = scale * x + offset per channel.
struct BnParams {
  std::vector<double> scale;
  std::vector<double> offset;
};

// Learnable per-channel affine used by the grouping normalizations.
struct NormParams {
  std::vector<double> alpha;
  std::vector<double> beta;
  double epsilon = 1e-5;  // added to the deviation, not to the variance
};

// Explicit Euler schedule: `iterations` steps of size (t_end-t_start)/iterations,
// with the dynamics evaluated at the left endpoint of each step.
struct OdeConfig {
  int iterations = 4;
  double t_start = 0.0;
  double t_end = 0.2;

  double step() const { return (t_end - t_start) / iterations; }
};

// The shared two-layer residual branch: FC -> BN -> ReLU -> FC -> BN.
// Residual blocks feed the feature vector straight in; the ODE variant
// appends the scalar time to both FC inputs, so its fc1.in_dim / fc2.in_dim
// carry one extra column.
struct MlpBlockParams {
  FcParams fc1;
  BnParams bn1;
  FcParams fc2;
  BnParams bn2;
};

void fc(std::span<const double> x, const FcParams& p, std::span<double> y);
void bn(std::span<const double> x, const BnParams& p, bool relu, std::span<double> y);

// Returns [x..., t]: the time channel always rides last.
std::vector<double> concat_t(std::span<const double> x, double t);

// Per-row normalization of one group (k rows of f features) against its
// centroid feature.  Each row is handled independently: deviation from the
// centroid, scalar mean/std over the row's own elements, then
// alpha * dev / (std + eps) + beta.
void pointwise_norm(std::span<const double> group, std::size_t k, std::size_t f,
                    std::span<const double> centroid, const NormParams& p, std::span<double> out);

// Baseline normalization coupling all groups of a stage: a global mean
// vector over every deviation and one scalar std across the whole tensor.
// groups is rows*k*f row-major, centroids is rows*f.
void geometric_affine(std::span<const double> groups, std::size_t rows, std::size_t k, std::size_t f,
                      std::span<const double> centroids, const NormParams& p, std::span<double> out);

// Column-wise max over the k rows of a group.
void max_pool(std::span<const double> group, std::size_t k, std::size_t f, std::span<double> out);

// out = x + BN2(FC2(ReLU(BN1(FC1(x)))))
void res_p_block(std::span<const double> x, const MlpBlockParams& p, std::span<double> out);

// Euler-integrated variant: repeats x += h * branch(x, t) with the time
// channel appended ahead of both FCs.  Parameters are shared across steps.
void ode_p_block(std::span<const double> x, const MlpBlockParams& p, const OdeConfig& cfg,
                 std::span<double> out);

// ---------------------------------------------------------------------------
// Quantized path.  Everything below operates on raw Q8.16 words (stored in
// int64), mirroring the float ops exactly: products are kept at full width
// and every dot product rounds once, nearest-even, before saturating back
// to 24 bits.

namespace fixed {

using Raw = std::int64_t;

struct QFc {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<Raw> weight;
  std::vector<Raw> bias;
};

struct QBn {
  std::vector<Raw> scale;
  std::vector<Raw> offset;
};

struct QNorm {
  std::vector<Raw> alpha;
  std::vector<Raw> beta;
  Raw epsilon = 0;
};

struct QBlock {
  QFc fc1;
  QBn bn1;
  QFc fc2;
  QBn bn2;
};

std::vector<Raw> quantize_vec(std::span<const double> x);
std::vector<double> dequantize_vec(std::span<const Raw> x);
QFc quantize(const FcParams& p);
QBn quantize(const BnParams& p);
QNorm quantize(const NormParams& p);
QBlock quantize(const MlpBlockParams& p);

void fc(std::span<const Raw> x, const QFc& p, std::span<Raw> y);
void bn(std::span<const Raw> x, const QBn& p, bool relu, std::span<Raw> y);
std::vector<Raw> concat_t(std::span<const Raw> x, Raw t);
void pointwise_norm(std::span<const Raw> group, std::size_t k, std::size_t f,
                    std::span<const Raw> centroid, const QNorm& p, std::span<Raw> out);
void geometric_affine(std::span<const Raw> groups, std::size_t rows, std::size_t k, std::size_t f,
                      std::span<const Raw> centroids, const QNorm& p, std::span<Raw> out);
void max_pool(std::span<const Raw> group, std::size_t k, std::size_t f, std::span<Raw> out);
void res_p_block(std::span<const Raw> x, const QBlock& p, std::span<Raw> out);
void ode_p_block(std::span<const Raw> x, const QBlock& p, const OdeConfig& cfg, std::span<Raw> out);

}  // namespace fixed

}  // namespace pointode::nn
