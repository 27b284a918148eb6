#include "pipeline_sim.hpp"

#include <algorithm>

#include "error.hpp"
#include "model_internal.hpp"

namespace pointode::pipeline {

namespace {

std::uint64_t ceil_div(std::uint64_t num, std::uint64_t den) { return (num + den - 1) / den; }

}  // namespace

PipelineReport simulate(std::uint64_t n_groups, const StageLatency& lat) {
  if (n_groups == 0) fail(errc::invalid_argument, "pipeline needs at least one group");
  std::uint64_t total = 0;
  std::uint64_t worst = 0;
  for (std::uint64_t l : lat.steps) {
    if (l == 0) fail(errc::invalid_argument, "each pipeline step needs at least one cycle");
    total += l;
    worst = std::max(worst, l);
  }

  // With identical per-group latencies the bottleneck step governs: after the
  // first group fills the pipe, one group retires every max(l) cycles. This
  // equals the event-driven makespan for any FIFO depth >= 1.
  PipelineReport report;
  report.sequential_cycles = n_groups * total;
  report.pipelined_cycles = total + (n_groups - 1) * worst;
  report.speedup =
      static_cast<double>(report.sequential_cycles) / static_cast<double>(report.pipelined_cycles);
  for (std::size_t i = 0; i < 4; ++i)
    report.occupancy[i] = static_cast<double>(n_groups * lat.steps[i]) /
                          static_cast<double>(report.pipelined_cycles);
  return report;
}

StageLatency default_latencies(const model::ModelConfig& config, std::size_t stage,
                               std::uint64_t lanes) {
  config.validate();
  if (stage >= 4) fail(errc::invalid_argument, "stage index out of range");
  if (lanes == 0) fail(errc::invalid_argument, "lanes must be positive");

  const std::uint64_t k = config.group_size;
  const std::uint64_t f_prev = stage == 0 ? config.embed_dim : config.stage_dims[stage - 1];
  const std::uint64_t f = config.stage_dims[stage];
  const std::uint64_t fq = config.bottleneck(stage);

  // Step 4 runs every block pass of the stage on one engine. Passes applied
  // per neighbor row (ahead of the pool) count once per row, hence the k
  // factor; the time input adds one MAC column per layer when present.
  const std::size_t pre = config.pre_blocks_in_stage(stage);
  const std::size_t post = config.post_blocks_in_stage(stage);
  std::uint64_t passes = 0;
  std::uint64_t macs_per_pass = 0;
  if (config.block_kind == model::BlockKind::ode) {
    std::vector<int> shares = model::detail::iteration_shares(config.ode_iterations, pre + post);
    for (std::size_t b = 0; b < shares.size(); ++b)
      passes += static_cast<std::uint64_t>(shares[b]) * (b < pre ? k : 1);
    macs_per_pass = (f + 1) * fq + (fq + 1) * f;
  } else {
    passes = pre * k + post;
    macs_per_pass = 2 * f * fq;
  }

  StageLatency lat;
  lat.steps[0] = std::max<std::uint64_t>(1, ceil_div(3 * k * f_prev, 2));
  lat.steps[1] = lat.steps[0];
  lat.steps[2] = std::max<std::uint64_t>(1, ceil_div(k * 2 * f_prev, lanes));
  lat.steps[3] = std::max<std::uint64_t>(1, ceil_div(passes * macs_per_pass, fq * lanes));
  return lat;
}

}  // namespace pointode::pipeline
