#include "model.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <exception>
#include <functional>
#include <mutex>
#include <random>
#include <span>
#include <thread>
#include <type_traits>

#include "model_internal.hpp"

namespace pointode::model {

namespace {

constexpr std::size_t kHeadHidden1 = 512;
constexpr std::size_t kHeadHidden2 = 256;

std::uint64_t fc_params(std::uint64_t in, std::uint64_t out) { return in * out + out; }
std::uint64_t bn_params(std::uint64_t f) { return 2 * f; }
std::uint64_t fc_flops(std::uint64_t in, std::uint64_t out) { return 2 * in * out + out; }

void chunked(std::size_t n, int threads, const std::function<void(std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  std::size_t workers = threads < 2 ? 1 : std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  if (workers <= 1) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  std::mutex mu;
  std::exception_ptr first;
  const std::size_t per = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    std::size_t lo = w * per, hi = std::min(n, lo + per);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi] {
      try {
        fn(lo, hi);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first) first = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

struct Ticker {
  std::chrono::steady_clock::time_point last = std::chrono::steady_clock::now();
  double take_ms() {
    auto now = std::chrono::steady_clock::now();
    double ms = std::chrono::duration<double, std::milli>(now - last).count();
    last = now;
    return ms;
  }
};

// Both numeric paths run through the same templated passes. The unqualified
// layer calls below resolve to the float or quantized overloads by operand
// type, which keeps the two paths structurally identical by construction.
using nn::bn;
using nn::fc;
using nn::geometric_affine;
using nn::max_pool;
using nn::ode_p_block;
using nn::pointwise_norm;
using nn::res_p_block;
using nn::fixed::bn;
using nn::fixed::fc;
using nn::fixed::geometric_affine;
using nn::fixed::max_pool;
using nn::fixed::ode_p_block;
using nn::fixed::pointwise_norm;
using nn::fixed::res_p_block;

struct QStageParams {
  nn::fixed::QNorm norm;
  nn::fixed::QFc mlp_fc;
  nn::fixed::QBn mlp_bn;
  std::vector<nn::fixed::QBlock> pre_blocks;
  std::vector<nn::fixed::QBlock> post_blocks;
};

struct QModelParams {
  nn::fixed::QFc embed_fc;
  nn::fixed::QBn embed_bn;
  std::array<QStageParams, 4> stages;
  nn::fixed::QFc head_fc1;
  nn::fixed::QBn head_bn1;
  nn::fixed::QFc head_fc2;
  nn::fixed::QBn head_bn2;
  nn::fixed::QFc head_fc3;
};

QStageParams quantize_stage(const StageParams& s) {
  QStageParams q{nn::fixed::quantize(s.norm), nn::fixed::quantize(s.mlp_fc),
                 nn::fixed::quantize(s.mlp_bn), {}, {}};
  q.pre_blocks.reserve(s.pre_blocks.size());
  for (const auto& b : s.pre_blocks) q.pre_blocks.push_back(nn::fixed::quantize(b));
  q.post_blocks.reserve(s.post_blocks.size());
  for (const auto& b : s.post_blocks) q.post_blocks.push_back(nn::fixed::quantize(b));
  return q;
}

QModelParams quantize_model(const ModelParams& p) {
  QModelParams q;
  q.embed_fc = nn::fixed::quantize(p.embed_fc);
  q.embed_bn = nn::fixed::quantize(p.embed_bn);
  for (std::size_t s = 0; s < 4; ++s) q.stages[s] = quantize_stage(p.stages[s]);
  q.head_fc1 = nn::fixed::quantize(p.head_fc1);
  q.head_bn1 = nn::fixed::quantize(p.head_bn1);
  q.head_fc2 = nn::fixed::quantize(p.head_fc2);
  q.head_bn2 = nn::fixed::quantize(p.head_bn2);
  q.head_fc3 = nn::fixed::quantize(p.head_fc3);
  return q;
}

template <class T>
std::vector<T> from_doubles(std::span<const double> x) {
  if constexpr (std::is_same_v<T, double>)
    return std::vector<double>(x.begin(), x.end());
  else
    return nn::fixed::quantize_vec(x);
}

template <class T>
std::vector<double> to_doubles(const std::vector<T>& x) {
  if constexpr (std::is_same_v<T, double>)
    return x;
  else
    return nn::fixed::dequantize_vec(x);
}

template <class Block, class T>
void run_block_chain(const std::vector<Block>& blocks, const ModelConfig& cfg,
                     std::span<const int> shares, std::size_t first, std::vector<T>& row,
                     std::vector<T>& tmp) {
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (cfg.block_kind == BlockKind::residual) {
      res_p_block(row, blocks[b], tmp);
      row.swap(tmp);
    } else if (shares[first + b] > 0) {
      ode_p_block(row, blocks[b], nn::OdeConfig{shares[first + b], 0.0, cfg.t_end}, tmp);
      row.swap(tmp);
    }
  }
}

template <class T, class FcT, class BnT>
std::vector<T> embed_pass(const std::vector<T>& xyz, std::size_t n, const FcT& pfc,
                          const BnT& pbn, int threads) {
  const std::size_t f0 = pfc.out_dim;
  std::vector<T> out(n * f0);
  chunked(n, threads, [&](std::size_t lo, std::size_t hi) {
    std::vector<T> y(f0);
    for (std::size_t i = lo; i < hi; ++i) {
      fc(std::span<const T>(xyz.data() + 3 * i, 3), pfc, y);
      bn(std::span<const T>(y), pbn, true, std::span<T>(out.data() + i * f0, f0));
    }
  });
  return out;
}

template <class T, class Stage>
std::vector<T> stage_pass(const ModelConfig& cfg, std::size_t s, std::span<const T> feats,
                          const geo::GroupIndex& g, const Stage& sp, int threads,
                          StageTiming* timing) {
  const std::size_t f_prev = s == 0 ? cfg.embed_dim : cfg.stage_dims[s - 1];
  const std::size_t f = cfg.stage_dims[s];
  const std::size_t rows = g.rows, k = g.k;

  if (k != cfg.group_size) fail(errc::shape, "plan group size differs from the model's");
  if (rows == 0) fail(errc::shape, "empty grouping stage");
  const std::size_t n_prev = 2 * rows;
  if (feats.size() != n_prev * f_prev)
    fail(errc::shape, "stage input must hold twice as many rows as the plan samples");
  if (g.centroids.size() != rows || g.neighbors.size() != rows * k)
    fail(errc::shape, "grouping index sizes disagree with its header");
  for (std::uint32_t idx : g.centroids)
    if (idx >= n_prev) fail(errc::shape, "centroid index outside the parent level");
  for (std::uint32_t idx : g.neighbors)
    if (idx >= n_prev) fail(errc::shape, "neighbor index outside the parent level");

  Ticker tick;

  // gather neighbor rows and centroid features
  std::vector<T> gathered(rows * k * f_prev), cents(rows * f_prev);
  chunked(rows, threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t j = lo; j < hi; ++j) {
      std::copy_n(feats.data() + g.centroids[j] * f_prev, f_prev, cents.data() + j * f_prev);
      for (std::size_t q = 0; q < k; ++q)
        std::copy_n(feats.data() + g.neighbors[j * k + q] * f_prev, f_prev,
                    gathered.data() + (j * k + q) * f_prev);
    }
  });

  // normalize against the centroid; the global mode couples all groups and
  // runs in one pass, the per-point mode is independent per centroid
  std::vector<T> nrm(rows * k * f_prev);
  if (cfg.norm_mode == NormMode::pointwise) {
    chunked(rows, threads, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t j = lo; j < hi; ++j)
        pointwise_norm(std::span<const T>(gathered.data() + j * k * f_prev, k * f_prev), k, f_prev,
                       std::span<const T>(cents.data() + j * f_prev, f_prev), sp.norm,
                       std::span<T>(nrm.data() + j * k * f_prev, k * f_prev));
    });
  } else {
    geometric_affine(std::span<const T>(gathered), rows, k, f_prev, std::span<const T>(cents),
                     sp.norm, std::span<T>(nrm));
  }

  // per-row MLP on [normalized | centroid]
  std::vector<T> local(rows * k * f);
  chunked(rows, threads, [&](std::size_t lo, std::size_t hi) {
    std::vector<T> in(2 * f_prev), h(f);
    for (std::size_t j = lo; j < hi; ++j)
      for (std::size_t q = 0; q < k; ++q) {
        std::copy_n(nrm.data() + (j * k + q) * f_prev, f_prev, in.begin());
        std::copy_n(cents.data() + j * f_prev, f_prev, in.begin() + f_prev);
        fc(std::span<const T>(in), sp.mlp_fc, h);
        bn(std::span<const T>(h), sp.mlp_bn, true, std::span<T>(local.data() + (j * k + q) * f, f));
      }
  });
  if (timing) timing->prep_ms += tick.take_ms();

  const std::vector<int> shares =
      detail::iteration_shares(cfg.ode_iterations, sp.pre_blocks.size() + sp.post_blocks.size());

  if (!sp.pre_blocks.empty()) {
    chunked(rows, threads, [&](std::size_t lo, std::size_t hi) {
      std::vector<T> row(f), tmp(f);
      for (std::size_t j = lo; j < hi; ++j)
        for (std::size_t q = 0; q < k; ++q) {
          row.assign(local.data() + (j * k + q) * f, local.data() + (j * k + q + 1) * f);
          run_block_chain(sp.pre_blocks, cfg, shares, 0, row, tmp);
          std::copy(row.begin(), row.end(), local.data() + (j * k + q) * f);
        }
    });
  }
  if (timing) timing->ode_ms += tick.take_ms();

  std::vector<T> pooled(rows * f);
  chunked(rows, threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t j = lo; j < hi; ++j)
      max_pool(std::span<const T>(local.data() + j * k * f, k * f), k, f,
               std::span<T>(pooled.data() + j * f, f));
  });
  if (timing) timing->prep_ms += tick.take_ms();

  if (!sp.post_blocks.empty()) {
    chunked(rows, threads, [&](std::size_t lo, std::size_t hi) {
      std::vector<T> row(f), tmp(f);
      for (std::size_t j = lo; j < hi; ++j) {
        row.assign(pooled.data() + j * f, pooled.data() + (j + 1) * f);
        run_block_chain(sp.post_blocks, cfg, shares, sp.pre_blocks.size(), row, tmp);
        std::copy(row.begin(), row.end(), pooled.data() + j * f);
      }
    });
  }
  if (timing) timing->ode_ms += tick.take_ms();

  return pooled;
}

template <class T, class M>
std::vector<T> head_pass(const std::vector<T>& global, const M& m) {
  std::vector<T> h1(m.head_fc1.out_dim), h1a(m.head_fc1.out_dim);
  fc(std::span<const T>(global), m.head_fc1, h1);
  bn(std::span<const T>(h1), m.head_bn1, true, std::span<T>(h1a));
  std::vector<T> h2(m.head_fc2.out_dim), h2a(m.head_fc2.out_dim);
  fc(std::span<const T>(h1a), m.head_fc2, h2);
  bn(std::span<const T>(h2), m.head_bn2, true, std::span<T>(h2a));
  std::vector<T> logits(m.head_fc3.out_dim);
  fc(std::span<const T>(h2a), m.head_fc3, logits);
  return logits;
}

void check_plan(const ModelConfig& cfg, const geo::SamplingPlan& plan, std::size_t n_points) {
  if (plan.stages.size() != 4) fail(errc::shape, "sampling plan must carry four stages");
  std::size_t expect = n_points;
  for (const auto& g : plan.stages) {
    if (expect % 2 != 0 || g.rows * 2 != expect)
      fail(errc::shape, "sampling plan rows do not halve from the cloud size");
    if (g.k != cfg.group_size) fail(errc::shape, "plan group size differs from the model's");
    expect = g.rows;
  }
}

template <class T, class M>
InferenceResult infer_impl(const ModelConfig& cfg, const geo::PointCloud& cloud,
                           const geo::SamplingPlan& plan, const M& m, int threads) {
  InferenceResult r;
  Ticker tick;

  std::vector<T> coords = from_doubles<T>(cloud.xyz);
  std::vector<T> feats = embed_pass<T>(coords, cloud.size(), m.embed_fc, m.embed_bn, threads);
  r.embed_ms = tick.take_ms();

  for (std::size_t s = 0; s < 4; ++s) {
    feats = stage_pass<T>(cfg, s, std::span<const T>(feats), plan.stages[s], m.stages[s], threads,
                          &r.stage_timings[s]);
    r.stage_features[s] = to_doubles(feats);
    r.stage_rows[s] = plan.stages[s].rows;
  }

  tick.take_ms();
  const std::size_t n4 = plan.stages[3].rows, f4 = cfg.stage_dims[3];
  std::vector<T> global(f4);
  max_pool(std::span<const T>(feats), n4, f4, std::span<T>(global));
  std::vector<T> logits = head_pass<T>(global, m);
  r.global_feature = to_doubles(global);
  r.logits = to_doubles(logits);
  r.head_ms = tick.take_ms();
  return r;
}

}  // namespace

void ModelConfig::validate() const {
  if (embed_dim == 0) fail(errc::invalid_argument, "embedding width must be positive");
  for (std::size_t d : stage_dims)
    if (d == 0) fail(errc::invalid_argument, "stage widths must be positive");
  if (bottleneck_ratio == 0) fail(errc::invalid_argument, "bottleneck ratio must be positive");
  for (std::size_t d : stage_dims)
    if (d % bottleneck_ratio != 0)
      fail(errc::invalid_argument, "bottleneck ratio must divide every stage width");
  if (group_size == 0) fail(errc::invalid_argument, "group size must be positive");
  if (ode_iterations < 1) fail(errc::invalid_argument, "iteration budget must be positive");
  if (!(t_end >= 0.0) || !std::isfinite(t_end))
    fail(errc::invalid_argument, "integration interval must be finite and non-negative");
  if (num_classes == 0) fail(errc::invalid_argument, "class count must be positive");
}

std::size_t ModelConfig::pre_blocks_in_stage(std::size_t) const {
  if (reordered) return 0;
  return block_kind == BlockKind::residual ? 2 : 1;
}

std::size_t ModelConfig::post_blocks_in_stage(std::size_t s) const {
  if (!reordered) return block_kind == BlockKind::residual ? 2 : 1;
  if (block_kind == BlockKind::residual) return 4;
  return s == 0 ? 2 : 1;
}

ModelConfig preset_config(const std::string& name) {
  ModelConfig c;
  c.preset = name;
  if (name == "elite") return c;  // the defaults
  if (name == "pointode") {
    c.embed_dim = 64;
    c.stage_dims = {128, 256, 512, 1024};
    c.bottleneck_ratio = 1;
    c.group_size = 24;
    return c;
  }
  if (name == "naive") {
    c = preset_config("pointode");
    c.preset = name;
    c.norm_mode = NormMode::geometric_affine;
    c.reordered = false;
    return c;
  }
  if (name == "pointmlp-like") {
    c = preset_config("naive");
    c.preset = name;
    c.block_kind = BlockKind::residual;
    return c;
  }
  fail(errc::invalid_argument, "unknown preset: " + name);
}

std::vector<std::string> preset_names() { return {"pointmlp-like", "naive", "pointode", "elite"}; }

namespace detail {

std::vector<int> iteration_shares(int total, std::size_t blocks) {
  if (blocks == 0) return {};
  std::vector<int> s(blocks, total / static_cast<int>(blocks));
  s[0] = total - s[0] * (static_cast<int>(blocks) - 1);
  return s;
}

ModelParams allocate_params(const ModelConfig& config) {
  config.validate();
  ModelParams p;
  p.config = config;

  auto make_fc = [](std::size_t in, std::size_t out) {
    return nn::FcParams{in, out, std::vector<double>(in * out, 0.0),
                        std::vector<double>(out, 0.0)};
  };
  auto make_bn = [](std::size_t f) {
    return nn::BnParams{std::vector<double>(f, 1.0), std::vector<double>(f, 0.0)};
  };
  auto make_block = [&](std::size_t f, std::size_t fq, bool timed) {
    std::size_t extra = timed ? 1 : 0;
    return nn::MlpBlockParams{make_fc(f + extra, fq), make_bn(fq), make_fc(fq + extra, f),
                              make_bn(f)};
  };

  p.embed_fc = make_fc(3, config.embed_dim);
  p.embed_bn = make_bn(config.embed_dim);

  std::size_t f_prev = config.embed_dim;
  for (std::size_t s = 0; s < 4; ++s) {
    const std::size_t f = config.stage_dims[s];
    const std::size_t fq = config.bottleneck(s);
    StageParams& st = p.stages[s];
    st.norm.alpha.assign(f_prev, 1.0);
    st.norm.beta.assign(f_prev, 0.0);
    st.mlp_fc = make_fc(2 * f_prev, f);
    st.mlp_bn = make_bn(f);
    const bool timed = config.block_kind == BlockKind::ode;
    for (std::size_t b = 0; b < config.pre_blocks_in_stage(s); ++b)
      st.pre_blocks.push_back(make_block(f, fq, timed));
    for (std::size_t b = 0; b < config.post_blocks_in_stage(s); ++b)
      st.post_blocks.push_back(make_block(f, fq, timed));
    f_prev = f;
  }

  p.head_fc1 = make_fc(config.stage_dims[3], kHeadHidden1);
  p.head_bn1 = make_bn(kHeadHidden1);
  p.head_fc2 = make_fc(kHeadHidden1, kHeadHidden2);
  p.head_bn2 = make_bn(kHeadHidden2);
  p.head_fc3 = make_fc(kHeadHidden2, config.num_classes);
  return p;
}

std::vector<TensorRef> tensor_table(ModelParams& p) {
  std::vector<TensorRef> t;
  auto u32 = [](std::size_t v) { return static_cast<std::uint32_t>(v); };
  auto add_fc = [&](const std::string& base, nn::FcParams& f) {
    t.push_back({base + ".weight", {u32(f.out_dim), u32(f.in_dim)}, &f.weight});
    t.push_back({base + ".bias", {u32(f.out_dim)}, &f.bias});
  };
  auto add_bn = [&](const std::string& base, nn::BnParams& b, std::size_t f) {
    t.push_back({base + ".scale", {u32(f)}, &b.scale});
    t.push_back({base + ".offset", {u32(f)}, &b.offset});
  };

  const ModelConfig& cfg = p.config;
  add_fc("embed.fc", p.embed_fc);
  add_bn("embed.bn", p.embed_bn, cfg.embed_dim);

  std::size_t f_prev = cfg.embed_dim;
  for (std::size_t s = 0; s < 4; ++s) {
    const std::string stage = "stage" + std::to_string(s + 1);
    StageParams& st = p.stages[s];
    t.push_back({stage + ".norm.alpha", {u32(f_prev)}, &st.norm.alpha});
    t.push_back({stage + ".norm.beta", {u32(f_prev)}, &st.norm.beta});
    add_fc(stage + ".mlp", st.mlp_fc);
    add_bn(stage + ".mlp.bn", st.mlp_bn, cfg.stage_dims[s]);
    for (std::size_t b = 0; b < st.pre_blocks.size(); ++b) {
      const std::string base = stage + ".pre" + std::to_string(b + 1);
      add_fc(base + ".fc1", st.pre_blocks[b].fc1);
      add_bn(base + ".bn1", st.pre_blocks[b].bn1, st.pre_blocks[b].fc1.out_dim);
      add_fc(base + ".fc2", st.pre_blocks[b].fc2);
      add_bn(base + ".bn2", st.pre_blocks[b].bn2, st.pre_blocks[b].fc2.out_dim);
    }
    for (std::size_t b = 0; b < st.post_blocks.size(); ++b) {
      const std::string base = stage + ".post" + std::to_string(b + 1);
      add_fc(base + ".fc1", st.post_blocks[b].fc1);
      add_bn(base + ".bn1", st.post_blocks[b].bn1, st.post_blocks[b].fc1.out_dim);
      add_fc(base + ".fc2", st.post_blocks[b].fc2);
      add_bn(base + ".bn2", st.post_blocks[b].bn2, st.post_blocks[b].fc2.out_dim);
    }
    f_prev = cfg.stage_dims[s];
  }

  add_fc("head.fc1", p.head_fc1);
  add_bn("head.bn1", p.head_bn1, kHeadHidden1);
  add_fc("head.fc2", p.head_fc2);
  add_bn("head.bn2", p.head_bn2, kHeadHidden2);
  add_fc("head.fc3", p.head_fc3);
  return t;
}

}  // namespace detail

ModelParams build(const ModelConfig& config, std::uint64_t seed) {
  ModelParams p = detail::allocate_params(config);
  std::mt19937_64 rng(seed);

  // Weights are drawn uniformly from +-1/sqrt(fan_in) and snapped to f32 so
  // that the on-disk representation reproduces them exactly. Draw order:
  // embedding, stages 1-4 (MLP, then pre blocks, then post blocks, fc1
  // before fc2), head. Biases, BN and the norm affine stay at identity and
  // consume no randomness.
  auto draw = [&rng](nn::FcParams& f) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(f.in_dim));
    for (double& w : f.weight) {
      const double u = static_cast<double>(rng() >> 11) * 0x1p-53;
      w = static_cast<double>(static_cast<float>((2.0 * u - 1.0) * bound));
    }
  };

  draw(p.embed_fc);
  for (auto& st : p.stages) {
    draw(st.mlp_fc);
    for (auto& b : st.pre_blocks) {
      draw(b.fc1);
      draw(b.fc2);
    }
    for (auto& b : st.post_blocks) {
      draw(b.fc1);
      draw(b.fc2);
    }
  }
  draw(p.head_fc1);
  draw(p.head_fc2);
  draw(p.head_fc3);
  return p;
}

ParamCounts count_params(const ModelConfig& config) {
  config.validate();
  ParamCounts c;
  c.feature_extractor = fc_params(3, config.embed_dim) + bn_params(config.embed_dim);

  std::size_t f_prev = config.embed_dim;
  for (std::size_t s = 0; s < 4; ++s) {
    const std::uint64_t f = config.stage_dims[s];
    const std::uint64_t fq = config.bottleneck(s);
    c.feature_extractor += 2 * f_prev;  // norm affine
    c.feature_extractor += fc_params(2 * f_prev, f) + bn_params(f);
    const std::uint64_t blocks = config.pre_blocks_in_stage(s) + config.post_blocks_in_stage(s);
    const std::uint64_t extra = config.block_kind == BlockKind::ode ? 1 : 0;
    c.feature_extractor +=
        blocks * (fc_params(f + extra, fq) + bn_params(fq) + fc_params(fq + extra, f) + bn_params(f));
    f_prev = f;
  }

  c.head = fc_params(config.stage_dims[3], kHeadHidden1) + bn_params(kHeadHidden1) +
           fc_params(kHeadHidden1, kHeadHidden2) + bn_params(kHeadHidden2) +
           fc_params(kHeadHidden2, config.num_classes);
  c.total = c.feature_extractor + c.head;
  return c;
}

std::uint64_t count_flops(const ModelConfig& config, std::size_t n_points) {
  config.validate();
  if (n_points == 0 || n_points % 16 != 0)
    fail(errc::invalid_argument, "point count must be a positive multiple of 16");

  const std::uint64_t k = config.group_size;
  std::uint64_t total = n_points * (fc_flops(3, config.embed_dim) + 3 * config.embed_dim);

  std::uint64_t f_prev = config.embed_dim;
  std::uint64_t rows = n_points;
  for (std::size_t s = 0; s < 4; ++s) {
    rows /= 2;
    const std::uint64_t f = config.stage_dims[s];
    const std::uint64_t fq = config.bottleneck(s);

    total += rows * k * (8 * f_prev + 3);                    // normalization
    total += rows * k * (fc_flops(2 * f_prev, f) + 3 * f);   // per-row MLP
    total += rows * (k - 1) * f;                             // max pool

    // one Euler step: branch MLP with the time channel, BN without ReLU on
    // the way out, then the scaled residual update
    const std::uint64_t ode_step =
        fc_flops(f + 1, fq) + 3 * fq + fc_flops(fq + 1, f) + 2 * f + 2 * f;
    const std::uint64_t res_row = fc_flops(f, fq) + 3 * fq + fc_flops(fq, f) + 2 * f + f;

    const std::size_t pre = config.pre_blocks_in_stage(s);
    const std::size_t post = config.post_blocks_in_stage(s);
    if (config.block_kind == BlockKind::residual) {
      total += rows * k * pre * res_row + rows * post * res_row;
    } else {
      const std::vector<int> shares = detail::iteration_shares(config.ode_iterations, pre + post);
      std::uint64_t pre_iters = 0, post_iters = 0;
      for (std::size_t b = 0; b < pre; ++b) pre_iters += static_cast<std::uint64_t>(shares[b]);
      for (std::size_t b = pre; b < pre + post; ++b)
        post_iters += static_cast<std::uint64_t>(shares[b]);
      total += rows * k * pre_iters * ode_step + rows * post_iters * ode_step;
    }
    f_prev = f;
  }

  total += (rows - 1) * config.stage_dims[3];  // global pool
  total += fc_flops(config.stage_dims[3], kHeadHidden1) + 3 * kHeadHidden1 +
           fc_flops(kHeadHidden1, kHeadHidden2) + 3 * kHeadHidden2 +
           fc_flops(kHeadHidden2, config.num_classes);
  return total;
}

std::vector<double> embed(const geo::PointCloud& cloud, const ModelParams& params,
                          Numeric numeric, int threads) {
  params.config.validate();
  if (numeric == Numeric::floating)
    return embed_pass<double>(cloud.xyz, cloud.size(), params.embed_fc, params.embed_bn, threads);
  std::vector<nn::fixed::Raw> coords = nn::fixed::quantize_vec(cloud.xyz);
  return nn::fixed::dequantize_vec(embed_pass<nn::fixed::Raw>(
      coords, cloud.size(), nn::fixed::quantize(params.embed_fc),
      nn::fixed::quantize(params.embed_bn), threads));
}

std::vector<double> run_stage(std::size_t s, std::span<const double> features,
                              const geo::GroupIndex& group, const ModelParams& params,
                              Numeric numeric, int threads, StageTiming* timing) {
  params.config.validate();
  if (s >= 4) fail(errc::invalid_argument, "stage index out of range");
  if (numeric == Numeric::floating)
    return stage_pass<double>(params.config, s, features, group, params.stages[s], threads, timing);
  std::vector<nn::fixed::Raw> in = nn::fixed::quantize_vec(features);
  QStageParams q = quantize_stage(params.stages[s]);
  return nn::fixed::dequantize_vec(stage_pass<nn::fixed::Raw>(
      params.config, s, std::span<const nn::fixed::Raw>(in), group, q, threads, timing));
}

InferenceResult infer(const geo::PointCloud& cloud, const geo::SamplingPlan& plan,
                      const ModelParams& params, Numeric numeric, int threads) {
  params.config.validate();
  check_plan(params.config, plan, cloud.size());
  if (numeric == Numeric::floating)
    return infer_impl<double>(params.config, cloud, plan, params, threads);
  QModelParams q = quantize_model(params);
  return infer_impl<nn::fixed::Raw>(params.config, cloud, plan, q, threads);
}

}  // namespace pointode::model
