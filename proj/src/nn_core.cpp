#include "nn_core.hpp"

#include <algorithm>
#include <cmath>

namespace pointode::nn {

namespace {

void check_fc_shapes(std::size_t x, const FcParams& p, std::size_t y) {
  if (p.weight.size() != p.in_dim * p.out_dim || p.bias.size() != p.out_dim)
    fail(errc::shape, "fc parameter sizes disagree with declared dims");
  if (x != p.in_dim) fail(errc::shape, "fc input length mismatch");
  if (y != p.out_dim) fail(errc::shape, "fc output length mismatch");
}

void check_block_shapes(std::size_t f, const MlpBlockParams& p, std::size_t out,
                        std::size_t time_cols) {
  if (p.fc1.in_dim != f + time_cols || p.fc2.in_dim != p.fc1.out_dim + time_cols ||
      p.fc2.out_dim != f)
    fail(errc::shape, "block dims do not close over the feature width");
  if (out != f) fail(errc::shape, "block output length mismatch");
}

void check_norm_shapes(std::size_t group, std::size_t k, std::size_t f, std::size_t centroid,
                       std::size_t alpha, std::size_t beta, std::size_t out) {
  if (k == 0 || f == 0) fail(errc::invalid_argument, "empty group in normalization");
  if (group != k * f || centroid != f || out != k * f)
    fail(errc::shape, "normalization buffer sizes disagree");
  if (alpha != f || beta != f) fail(errc::shape, "normalization affine sizes disagree");
}

}  // namespace

void fc(std::span<const double> x, const FcParams& p, std::span<double> y) {
  check_fc_shapes(x.size(), p, y.size());
  for (std::size_t o = 0; o < p.out_dim; ++o) {
    double acc = p.bias[o];
    const double* w = p.weight.data() + o * p.in_dim;
    for (std::size_t i = 0; i < p.in_dim; ++i) acc += w[i] * x[i];
    y[o] = acc;
  }
}

void bn(std::span<const double> x, const BnParams& p, bool relu, std::span<double> y) {
  if (p.scale.size() != x.size() || p.offset.size() != x.size() || y.size() != x.size())
    fail(errc::shape, "bn channel count mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) {
    double v = p.scale[i] * x[i] + p.offset[i];
    y[i] = relu && v < 0.0 ? 0.0 : v;
  }
}

std::vector<double> concat_t(std::span<const double> x, double t) {
  std::vector<double> v(x.begin(), x.end());
  v.push_back(t);
  return v;
}

void pointwise_norm(std::span<const double> group, std::size_t k, std::size_t f,
                    std::span<const double> centroid, const NormParams& p, std::span<double> out) {
  check_norm_shapes(group.size(), k, f, centroid.size(), p.alpha.size(), p.beta.size(), out.size());
  std::vector<double> dev(f);
  for (std::size_t r = 0; r < k; ++r) {
    const double* row = group.data() + r * f;
    double mu = 0.0;
    for (std::size_t c = 0; c < f; ++c) {
      dev[c] = row[c] - centroid[c];
      mu += dev[c];
    }
    mu /= static_cast<double>(f);
    double var = 0.0;
    for (std::size_t c = 0; c < f; ++c) {
      double d = dev[c] - mu;
      var += d * d;
    }
    double denom = std::sqrt(var / static_cast<double>(f)) + p.epsilon;
    for (std::size_t c = 0; c < f; ++c) out[r * f + c] = p.alpha[c] * dev[c] / denom + p.beta[c];
  }
}

void geometric_affine(std::span<const double> groups, std::size_t rows, std::size_t k,
                      std::size_t f, std::span<const double> centroids, const NormParams& p,
                      std::span<double> out) {
  if (rows == 0 || k == 0 || f == 0)
    fail(errc::invalid_argument, "geometric affine needs a nonempty tensor");
  if (groups.size() != rows * k * f || centroids.size() != rows * f || out.size() != rows * k * f)
    fail(errc::shape, "geometric affine buffer sizes disagree");
  if (p.alpha.size() != f || p.beta.size() != f)
    fail(errc::shape, "geometric affine channel params disagree");

  const std::size_t n = rows * k;
  std::vector<double> dev(n * f);
  std::vector<double> mu(f, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t c = 0; c < f; ++c) {
        double d = groups[(r * k + j) * f + c] - centroids[r * f + c];
        dev[(r * k + j) * f + c] = d;
        mu[c] += d;
      }
  for (std::size_t c = 0; c < f; ++c) mu[c] /= static_cast<double>(n);

  double acc = 0.0;
  for (std::size_t rj = 0; rj < n; ++rj)
    for (std::size_t c = 0; c < f; ++c) {
      double d = dev[rj * f + c] - mu[c];
      acc += d * d;
    }
  double denom = std::sqrt(acc / static_cast<double>(n)) + p.epsilon;
  for (std::size_t rj = 0; rj < n; ++rj)
    for (std::size_t c = 0; c < f; ++c)
      out[rj * f + c] = p.alpha[c] * dev[rj * f + c] / denom + p.beta[c];
}

void max_pool(std::span<const double> group, std::size_t k, std::size_t f, std::span<double> out) {
  if (k == 0 || group.size() != k * f || out.size() != f)
    fail(errc::shape, "max pool buffer sizes disagree");
  std::copy_n(group.begin(), f, out.begin());
  for (std::size_t r = 1; r < k; ++r)
    for (std::size_t c = 0; c < f; ++c) out[c] = std::max(out[c], group[r * f + c]);
}

void res_p_block(std::span<const double> x, const MlpBlockParams& p, std::span<double> out) {
  check_block_shapes(x.size(), p, out.size(), 0);
  std::vector<double> h(p.fc1.out_dim), ha(p.fc1.out_dim), y(x.size()), branch(x.size());
  fc(x, p.fc1, h);
  bn(h, p.bn1, true, ha);
  fc(ha, p.fc2, y);
  bn(y, p.bn2, false, branch);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + branch[i];
}

void ode_p_block(std::span<const double> x, const MlpBlockParams& p, const OdeConfig& cfg,
                 std::span<double> out) {
  check_block_shapes(x.size(), p, out.size(), 1);
  if (cfg.iterations < 1) fail(errc::invalid_argument, "ode block needs at least one step");
  const double h = cfg.step();
  std::vector<double> state(x.begin(), x.end());
  std::vector<double> h1(p.fc1.out_dim), h1a(p.fc1.out_dim), y(x.size()), branch(x.size());
  for (int j = 0; j < cfg.iterations; ++j) {
    double t = cfg.t_start + j * h;
    fc(concat_t(state, t), p.fc1, h1);
    bn(h1, p.bn1, true, h1a);
    fc(concat_t(h1a, t), p.fc2, y);
    bn(y, p.bn2, false, branch);
    for (std::size_t i = 0; i < state.size(); ++i) state[i] += h * branch[i];
  }
  std::copy(state.begin(), state.end(), out.begin());
}

// ---------------------------------------------------------------------------

namespace fixed {

namespace fp = pointode::fp;

namespace {

// Nearest-even integer division by a positive denominator, exact in int64.
std::int64_t div_rne(std::int64_t num, std::int64_t den) {
  bool neg = num < 0;
  unsigned long long a = neg ? 0ULL - static_cast<unsigned long long>(num)
                             : static_cast<unsigned long long>(num);
  unsigned long long d = static_cast<unsigned long long>(den);
  unsigned long long q = a / d, r = a % d;
  if (2 * r > d || (2 * r == d && (q & 1ULL))) ++q;
  return neg ? -static_cast<std::int64_t>(q) : static_cast<std::int64_t>(q);
}

// Same, for the wide squared-deviation accumulators.
std::int64_t div_rne_wide(__int128 num, __int128 den) {
  bool neg = num < 0;
  unsigned __int128 a = neg ? static_cast<unsigned __int128>(-num)
                            : static_cast<unsigned __int128>(num);
  unsigned __int128 d = static_cast<unsigned __int128>(den);
  unsigned __int128 q = a / d, r = a % d;
  if (2 * r > d || (2 * r == d && (q & 1))) ++q;
  __int128 signedq = neg ? -static_cast<__int128>(q) : static_cast<__int128>(q);
  return fp::saturate(signedq, fp::kQ8_16);
}

Raw relu_raw(Raw v) { return v < 0 ? 0 : v; }

// One product plus a shifted addend, rounded once: the scalar case of the
// fc accumulation below. Used for bn and the alpha*x+beta affines.
Raw fma_round(Raw a, Raw b, Raw addend) {
  __int128 acc = static_cast<__int128>(a) * b + (static_cast<__int128>(addend) << 16);
  return fp::saturate(fp::round_shift_rne_wide(acc, 16), fp::kQ8_16);
}

void check_qfc_shapes(std::size_t x, const QFc& p, std::size_t y) {
  if (p.weight.size() != p.in_dim * p.out_dim || p.bias.size() != p.out_dim)
    fail(errc::shape, "fc parameter sizes disagree with declared dims");
  if (x != p.in_dim) fail(errc::shape, "fc input length mismatch");
  if (y != p.out_dim) fail(errc::shape, "fc output length mismatch");
}

void check_qblock_shapes(std::size_t f, const QBlock& p, std::size_t out, std::size_t time_cols) {
  if (p.fc1.in_dim != f + time_cols || p.fc2.in_dim != p.fc1.out_dim + time_cols ||
      p.fc2.out_dim != f)
    fail(errc::shape, "block dims do not close over the feature width");
  if (out != f) fail(errc::shape, "block output length mismatch");
}

}  // namespace

std::vector<Raw> quantize_vec(std::span<const double> x) {
  std::vector<Raw> q(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) q[i] = fp::encode(x[i]).raw;
  return q;
}

std::vector<double> dequantize_vec(std::span<const Raw> x) {
  std::vector<double> v(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) v[i] = fp::decode(fp::Fixed{x[i]});
  return v;
}

QFc quantize(const FcParams& p) {
  return QFc{p.in_dim, p.out_dim, quantize_vec(p.weight), quantize_vec(p.bias)};
}

QBn quantize(const BnParams& p) { return QBn{quantize_vec(p.scale), quantize_vec(p.offset)}; }

QNorm quantize(const NormParams& p) {
  return QNorm{quantize_vec(p.alpha), quantize_vec(p.beta), fp::encode(p.epsilon).raw};
}

QBlock quantize(const MlpBlockParams& p) {
  return QBlock{quantize(p.fc1), quantize(p.bn1), quantize(p.fc2), quantize(p.bn2)};
}

void fc(std::span<const Raw> x, const QFc& p, std::span<Raw> y) {
  check_qfc_shapes(x.size(), p, y.size());
  for (std::size_t o = 0; o < p.out_dim; ++o) {
    // products carry 32 fractional bits; int64 holds thousands of them
    std::int64_t acc = p.bias[o] << 16;
    const Raw* w = p.weight.data() + o * p.in_dim;
    for (std::size_t i = 0; i < p.in_dim; ++i) acc += w[i] * x[i];
    y[o] = fp::saturate(fp::round_shift_rne(acc, 16), fp::kQ8_16);
  }
}

void bn(std::span<const Raw> x, const QBn& p, bool relu, std::span<Raw> y) {
  if (p.scale.size() != x.size() || p.offset.size() != x.size() || y.size() != x.size())
    fail(errc::shape, "bn channel count mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) {
    Raw v = fma_round(p.scale[i], x[i], p.offset[i]);
    y[i] = relu ? relu_raw(v) : v;
  }
}

std::vector<Raw> concat_t(std::span<const Raw> x, Raw t) {
  std::vector<Raw> v(x.begin(), x.end());
  v.push_back(t);
  return v;
}

void pointwise_norm(std::span<const Raw> group, std::size_t k, std::size_t f,
                    std::span<const Raw> centroid, const QNorm& p, std::span<Raw> out) {
  check_norm_shapes(group.size(), k, f, centroid.size(), p.alpha.size(), p.beta.size(), out.size());
  std::vector<Raw> dev(f);
  for (std::size_t r = 0; r < k; ++r) {
    const Raw* row = group.data() + r * f;
    std::int64_t sum = 0;
    for (std::size_t c = 0; c < f; ++c) {
      dev[c] = fp::sub(fp::Fixed{row[c]}, fp::Fixed{centroid[c]}).raw;
      sum += dev[c];
    }
    Raw mu = div_rne(sum, static_cast<std::int64_t>(f));
    __int128 sq = 0;
    for (std::size_t c = 0; c < f; ++c) {
      Raw d = fp::sub(fp::Fixed{dev[c]}, fp::Fixed{mu}).raw;
      sq += static_cast<__int128>(d) * d;
    }
    // squared deviations sit at 32 fractional bits: fold /f and the shift
    // back to 16 bits into one rounded division
    Raw var = div_rne_wide(sq, static_cast<__int128>(f) << 16);
    Raw denom = fp::add(fp::sqrt(fp::Fixed{var}), fp::Fixed{p.epsilon}).raw;
    for (std::size_t c = 0; c < f; ++c) {
      Raw q = fp::div(fp::Fixed{dev[c]}, fp::Fixed{denom}).raw;
      out[r * f + c] = fma_round(p.alpha[c], q, p.beta[c]);
    }
  }
}

void geometric_affine(std::span<const Raw> groups, std::size_t rows, std::size_t k, std::size_t f,
                      std::span<const Raw> centroids, const QNorm& p, std::span<Raw> out) {
  if (rows == 0 || k == 0 || f == 0)
    fail(errc::invalid_argument, "geometric affine needs a nonempty tensor");
  if (groups.size() != rows * k * f || centroids.size() != rows * f || out.size() != rows * k * f)
    fail(errc::shape, "geometric affine buffer sizes disagree");
  if (p.alpha.size() != f || p.beta.size() != f)
    fail(errc::shape, "geometric affine channel params disagree");

  const std::size_t n = rows * k;
  std::vector<Raw> dev(n * f);
  std::vector<std::int64_t> sums(f, 0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t c = 0; c < f; ++c) {
        Raw d = fp::sub(fp::Fixed{groups[(r * k + j) * f + c]}, fp::Fixed{centroids[r * f + c]}).raw;
        dev[(r * k + j) * f + c] = d;
        sums[c] += d;
      }
  std::vector<Raw> mu(f);
  for (std::size_t c = 0; c < f; ++c) mu[c] = div_rne(sums[c], static_cast<std::int64_t>(n));

  __int128 sq = 0;
  for (std::size_t rj = 0; rj < n; ++rj)
    for (std::size_t c = 0; c < f; ++c) {
      Raw d = fp::sub(fp::Fixed{dev[rj * f + c]}, fp::Fixed{mu[c]}).raw;
      sq += static_cast<__int128>(d) * d;
    }
  Raw var = div_rne_wide(sq, static_cast<__int128>(n) << 16);
  Raw denom = fp::add(fp::sqrt(fp::Fixed{var}), fp::Fixed{p.epsilon}).raw;
  for (std::size_t rj = 0; rj < n; ++rj)
    for (std::size_t c = 0; c < f; ++c) {
      Raw q = fp::div(fp::Fixed{dev[rj * f + c]}, fp::Fixed{denom}).raw;
      out[rj * f + c] = fma_round(p.alpha[c], q, p.beta[c]);
    }
}

void max_pool(std::span<const Raw> group, std::size_t k, std::size_t f, std::span<Raw> out) {
  if (k == 0 || group.size() != k * f || out.size() != f)
    fail(errc::shape, "max pool buffer sizes disagree");
  std::copy_n(group.begin(), f, out.begin());
  for (std::size_t r = 1; r < k; ++r)
    for (std::size_t c = 0; c < f; ++c) out[c] = std::max(out[c], group[r * f + c]);
}

void res_p_block(std::span<const Raw> x, const QBlock& p, std::span<Raw> out) {
  check_qblock_shapes(x.size(), p, out.size(), 0);
  std::vector<Raw> h(p.fc1.out_dim), ha(p.fc1.out_dim), y(x.size()), branch(x.size());
  fc(x, p.fc1, h);
  bn(h, p.bn1, true, ha);
  fc(ha, p.fc2, y);
  bn(y, p.bn2, false, branch);
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = fp::add(fp::Fixed{x[i]}, fp::Fixed{branch[i]}).raw;
}

void ode_p_block(std::span<const Raw> x, const QBlock& p, const OdeConfig& cfg,
                 std::span<Raw> out) {
  check_qblock_shapes(x.size(), p, out.size(), 1);
  if (cfg.iterations < 1) fail(errc::invalid_argument, "ode block needs at least one step");
  const double h = cfg.step();
  const Raw hq = fp::encode(h).raw;
  std::vector<Raw> state(x.begin(), x.end());
  std::vector<Raw> h1(p.fc1.out_dim), h1a(p.fc1.out_dim), y(x.size()), branch(x.size());
  for (int j = 0; j < cfg.iterations; ++j) {
    Raw tq = fp::encode(cfg.t_start + j * h).raw;
    fc(concat_t(state, tq), p.fc1, h1);
    bn(h1, p.bn1, true, h1a);
    fc(concat_t(h1a, tq), p.fc2, y);
    bn(y, p.bn2, false, branch);
    for (std::size_t i = 0; i < state.size(); ++i)
      state[i] = fma_round(hq, branch[i], state[i]);
  }
  std::copy(state.begin(), state.end(), out.begin());
}

}  // namespace fixed

}  // namespace pointode::nn
