#include "verify.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "error.hpp"
#include "fixed_point.hpp"
#include "geometry.hpp"
#include "model.hpp"
#include "nn_core.hpp"
#include "pipeline_sim.hpp"

namespace pointode::verify {

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

nn::FcParams random_fc(std::mt19937_64& rng, std::size_t in, std::size_t out, double scale) {
  nn::FcParams p;
  p.in_dim = in;
  p.out_dim = out;
  p.weight = random_vec(rng, in * out, -scale, scale);
  p.bias = random_vec(rng, out, -scale, scale);
  return p;
}

nn::BnParams random_bn(std::mt19937_64& rng, std::size_t f, double scale) {
  return nn::BnParams{random_vec(rng, f, -scale, scale), random_vec(rng, f, -scale, scale)};
}

geo::PointCloud random_cloud(std::mt19937_64& rng, std::size_t n) {
  geo::PointCloud c;
  c.xyz = random_vec(rng, 3 * n, -1.0, 1.0);
  return c;
}

model::ModelConfig small_config() {
  model::ModelConfig cfg;
  cfg.preset = "self-check";
  cfg.embed_dim = 4;
  cfg.stage_dims = {8, 16, 32, 32};
  cfg.bottleneck_ratio = 4;
  cfg.group_size = 4;
  cfg.num_classes = 5;
  return cfg;
}

// Global features must not care about input row order. Reordering the cloud
// while rewriting the first-stage gather indices to match feeds the network
// the same groups, so float output must agree to 1e-6 and the fixed path
// must agree bit for bit.
bool check_permutation_invariance(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  model::ModelConfig cfg = small_config();
  model::ModelParams params = model::build(cfg, seed ^ 0x9e3779b97f4a7c15ull);
  const std::size_t n = 64;

  geo::PointCloud cloud = random_cloud(rng, n);
  geo::SamplingPlan plan = geo::build_sampling_plan(cloud, cfg.group_size);
  model::InferenceResult base_f = model::infer(cloud, plan, params, model::Numeric::floating);
  model::InferenceResult base_q = model::infer(cloud, plan, params, model::Numeric::fixed);

  for (int round = 0; round < 5; ++round) {
    std::vector<std::uint32_t> perm(n);
    for (std::uint32_t i = 0; i < n; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::uint32_t> inv(n);
    for (std::uint32_t i = 0; i < n; ++i) inv[perm[i]] = i;

    geo::PointCloud shuffled;
    shuffled.xyz.resize(cloud.xyz.size());
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(cloud.point(perm[i]), 3, shuffled.xyz.begin() + 3 * i);
    geo::SamplingPlan remapped = plan;
    for (auto& idx : remapped.stages[0].centroids) idx = inv[idx];
    for (auto& idx : remapped.stages[0].neighbors) idx = inv[idx];

    model::InferenceResult f = model::infer(shuffled, remapped, params, model::Numeric::floating);
    for (std::size_t i = 0; i < f.global_feature.size(); ++i)
      if (std::abs(f.global_feature[i] - base_f.global_feature[i]) > 1e-6) return false;

    model::InferenceResult q = model::infer(shuffled, remapped, params, model::Numeric::fixed);
    if (q.global_feature != base_q.global_feature) return false;
    if (q.logits != base_q.logits) return false;
  }
  return true;
}

// Forward Euler is a first-order method: halving the step should roughly
// halve the error. The check averages consecutive-refinement error ratios
// over several random smooth systems and expects the mean near 2.
bool check_euler_convergence(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t f = 3, fq = 3;
  double ratio_sum = 0.0;
  int measured = 0;
  for (int trial = 0; trial < 40; ++trial) {
    nn::MlpBlockParams p;
    p.fc1 = random_fc(rng, f + 1, fq, 0.3);
    p.bn1 = random_bn(rng, fq, 0.3);
    p.bn1.offset.assign(fq, 2.0);  // keeps ReLU inputs positive, dynamics smooth
    p.fc2 = random_fc(rng, fq + 1, f, 0.3);
    p.bn2 = random_bn(rng, f, 0.3);
    std::vector<double> x = random_vec(rng, f, -0.5, 0.5);

    auto solve = [&](int c) {
      std::vector<double> out(f);
      nn::ode_p_block(x, p, nn::OdeConfig{c, 0.0, 1.0}, out);
      return out;
    };
    auto dist = [](const std::vector<double>& a, const std::vector<double>& b) {
      double s = 0;
      for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
      return std::sqrt(s);
    };
    std::vector<double> s8 = solve(8), s16 = solve(16), s32 = solve(32);
    double coarse = dist(s8, s16), fine = dist(s16, s32);
    if (fine < 1e-13) continue;  // too flat to resolve
    ratio_sum += coarse / fine;
    ++measured;
  }
  if (measured < 10) return false;
  double mean = ratio_sum / measured;
  return mean > 1.7 && mean < 2.3;
}

// With unit step and the time inputs wired to zero weight, C solver
// iterations reduce algebraically to C chained residual blocks sharing one
// parameter set.
bool check_ode_resnet_fusion(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t f = 2 + rng() % 6;
    const std::size_t fq = 1 + rng() % f;
    nn::MlpBlockParams ode;
    ode.fc1 = random_fc(rng, f + 1, fq, 0.8);
    ode.bn1 = random_bn(rng, fq, 0.8);
    ode.fc2 = random_fc(rng, fq + 1, f, 0.8);
    ode.bn2 = random_bn(rng, f, 0.8);
    for (std::size_t o = 0; o < fq; ++o) ode.fc1.weight[o * (f + 1) + f] = 0.0;
    for (std::size_t o = 0; o < f; ++o) ode.fc2.weight[o * (fq + 1) + fq] = 0.0;

    nn::MlpBlockParams res;
    res.fc1.in_dim = f;
    res.fc1.out_dim = fq;
    res.fc1.bias = ode.fc1.bias;
    res.fc1.weight.resize(f * fq);
    for (std::size_t o = 0; o < fq; ++o)
      std::copy_n(ode.fc1.weight.begin() + static_cast<std::ptrdiff_t>(o * (f + 1)), f,
                  res.fc1.weight.begin() + static_cast<std::ptrdiff_t>(o * f));
    res.bn1 = ode.bn1;
    res.fc2.in_dim = fq;
    res.fc2.out_dim = f;
    res.fc2.bias = ode.fc2.bias;
    res.fc2.weight.resize(fq * f);
    for (std::size_t o = 0; o < f; ++o)
      std::copy_n(ode.fc2.weight.begin() + static_cast<std::ptrdiff_t>(o * (fq + 1)), fq,
                  res.fc2.weight.begin() + static_cast<std::ptrdiff_t>(o * fq));
    res.bn2 = ode.bn2;

    for (int n : {1, 2, 4}) {
      std::vector<double> x = random_vec(rng, f, -1.0, 1.0);
      std::vector<double> fused(f);
      nn::ode_p_block(x, ode, nn::OdeConfig{n, 0.0, static_cast<double>(n)}, fused);
      std::vector<double> chained = x, tmp(f);
      for (int i = 0; i < n; ++i) {
        nn::res_p_block(chained, res, tmp);
        chained.swap(tmp);
      }
      for (std::size_t i = 0; i < f; ++i)
        if (std::abs(fused[i] - chained[i]) > 1e-6) return false;
    }
  }
  return true;
}

// Representation error of the Q8.16 codec plus single-layer drift of the
// quantized fc/bn kernels against their float counterparts.
bool check_fixed_point_bounds(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double ulp17 = std::ldexp(1.0, -17);

  std::uniform_real_distribution<double> wide(-100.0, 100.0);
  for (int t = 0; t < 2000; ++t) {
    double v = wide(rng);
    if (std::abs(fp::decode(fp::encode(v, fp::kQ8_16)) - v) > ulp17) return false;
  }

  for (int t = 0; t < 200; ++t) {
    const std::size_t in = 32, out = 16;
    nn::FcParams p = random_fc(rng, in, out, 0.25);
    std::vector<double> x = random_vec(rng, in, -2.0, 2.0);
    std::vector<double> yf(out);
    nn::fc(x, p, yf);
    nn::fixed::QFc q = nn::fixed::quantize(p);
    std::vector<nn::fixed::Raw> xq = nn::fixed::quantize_vec(x);
    std::vector<nn::fixed::Raw> yq(out);
    nn::fixed::fc(xq, q, yq);
    for (std::size_t o = 0; o < out; ++o)
      if (std::abs(fp::decode(fp::Fixed{yq[o]}) - yf[o]) > 1e-3) return false;
  }

  for (int t = 0; t < 200; ++t) {
    const std::size_t f = 24;
    nn::BnParams p = random_bn(rng, f, 1.0);
    std::vector<double> x = random_vec(rng, f, -4.0, 4.0);
    std::vector<double> yf(f);
    nn::bn(x, p, true, yf);
    nn::fixed::QBn q = nn::fixed::quantize(p);
    std::vector<nn::fixed::Raw> xq = nn::fixed::quantize_vec(x);
    std::vector<nn::fixed::Raw> yq(f);
    nn::fixed::bn(xq, q, true, yq);
    for (std::size_t i = 0; i < f; ++i)
      if (std::abs(fp::decode(fp::Fixed{yq[i]}) - yf[i]) > 1e-3) return false;
  }
  return true;
}

// The closed-form makespan must equal a literal event-driven walk of the
// four-step pipe, and the built-in cost model must land the compressed
// preset's stages in the expected speedup band.
bool check_pipeline_oracle(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint64_t> pick_n(1, 200);
  std::uniform_int_distribution<std::uint64_t> pick_l(1, 500);
  for (int trial = 0; trial < 1000; ++trial) {
    pipeline::StageLatency lat;
    for (auto& l : lat.steps) l = pick_l(rng);
    std::uint64_t n = pick_n(rng);

    std::array<std::uint64_t, 4> finish{};
    for (std::uint64_t g = 0; g < n; ++g) {
      std::uint64_t ready = 0;
      for (std::size_t i = 0; i < 4; ++i) {
        ready = std::max(ready, finish[i]) + lat.steps[i];
        finish[i] = ready;
      }
    }
    if (pipeline::simulate(n, lat).pipelined_cycles != finish[3]) return false;
  }

  model::ModelConfig cfg = model::preset_config("elite");
  const std::array<std::uint64_t, 4> groups = {512, 256, 128, 64};
  for (std::size_t s = 0; s < 4; ++s) {
    double sp = pipeline::simulate(groups[s], pipeline::default_latencies(cfg, s)).speedup;
    if (sp < 2.5 || sp > 3.5) return false;
  }
  return true;
}

// Published parameter budgets: the compressed preset's size and the two
// architecture-to-architecture reduction ratios.
bool check_parameter_census(std::uint64_t) {
  model::ParamCounts elite = model::count_params(model::preset_config("elite"));
  if (std::abs(static_cast<double>(elite.feature_extractor) - 0.30e6) > 0.05 * 0.30e6)
    return false;
  if (std::abs(static_cast<double>(elite.total) - 0.58e6) > 0.10 * 0.58e6) return false;

  double base = static_cast<double>(model::count_params(model::preset_config("pointmlp-like")).total);
  double timed = static_cast<double>(model::count_params(model::preset_config("naive")).total);
  double merged = static_cast<double>(model::count_params(model::preset_config("pointode")).total);
  if (std::abs(base / timed - 1.73) > 0.05 * 1.73) return false;
  if (std::abs(timed / merged - 1.56) > 0.05 * 1.56) return false;
  return true;
}

// Published compute budget of the compressed preset at the standard
// operating point.
bool check_flop_census(std::uint64_t) {
  double flops = static_cast<double>(model::count_flops(model::preset_config("elite"), 1024));
  return std::abs(flops - 0.64e9) <= 0.20 * 0.64e9;
}

struct Property {
  std::string name;
  std::string summary;
  bool (*run)(std::uint64_t seed);
};

const std::vector<Property>& registry() {
  static const std::vector<Property> props = {
      {"permutation-invariance",
       "input row order never changes global features (float 1e-6, fixed bit-exact)",
       check_permutation_invariance},
      {"euler-convergence", "halving the solver step about halves the integration error",
       check_euler_convergence},
      {"ode-resnet-fusion",
       "unit-step solver with zeroed time inputs equals chained residual blocks",
       check_ode_resnet_fusion},
      {"fixed-point-bounds",
       "codec error stays under 2^-17 and single quantized layers stay under 1e-3",
       check_fixed_point_bounds},
      {"pipeline-oracle",
       "closed-form makespan equals event-driven simulation; stage speedups in [2.5, 3.5]",
       check_pipeline_oracle},
      {"parameter-census", "preset parameter totals and reduction ratios match their pinned budgets",
       check_parameter_census},
      {"flop-census", "compressed preset compute at N=1024 matches its pinned budget",
       check_flop_census},
  };
  return props;
}

}  // namespace

std::size_t property_count() { return registry().size(); }

const std::string& property_name(std::size_t index) {
  if (index >= registry().size()) fail(errc::invalid_argument, "property index out of range");
  return registry()[index].name;
}

const std::string& property_summary(std::size_t index) {
  if (index >= registry().size()) fail(errc::invalid_argument, "property index out of range");
  return registry()[index].summary;
}

bool run_property(std::size_t index, std::uint64_t seed) {
  if (index >= registry().size()) fail(errc::invalid_argument, "property index out of range");
  return registry()[index].run(seed);
}

}  // namespace pointode::verify
