#pragma once

#include <array>
#include <cstdint>

#include "model.hpp"

// Analytical model of the four-step stage pipeline: groups stream through
// gather/normalize/mlp-pool/ode hardware units with a one-group handoff
// between steps, so at steady state four groups are in flight at once.
//
// Cycle counts are a documented cost model, not a measurement. Each step is
// assigned its dominant op count and a fixed per-cycle throughput:
//
//   step 1  gather + mean/std      3*K*F_prev elementwise ops, 2 per cycle
//   step 2  normalization apply    3*K*F_prev elementwise ops, 2 per cycle
//   step 3  row MLP + max pool     K*2*F_prev*F MACs on an F-wide array
//   step 4  block iterations       pass_count * MACs_per_pass on an
//                                  F_bottleneck-wide array
//
// `lanes` replicates the two MAC arrays (steps 3 and 4); the elementwise
// steps are treated as stream-bound and do not scale with it. Every latency
// is clamped to at least one cycle.

namespace pointode::pipeline {

inline constexpr std::array<const char*, 4> kStepNames = {"gather", "normalize", "mlp-pool",
                                                          "ode"};

struct StageLatency {
  std::array<std::uint64_t, 4> steps{1, 1, 1, 1};
};

struct PipelineReport {
  std::uint64_t sequential_cycles = 0;
  std::uint64_t pipelined_cycles = 0;
  double speedup = 1.0;
  // fraction of the pipelined makespan each step spends busy
  std::array<double, 4> occupancy{};
};

// Synchronous handoff pipeline over identical groups. Closed form:
// pipelined = sum(l) + (n-1)*max(l), sequential = n*sum(l).
PipelineReport simulate(std::uint64_t n_groups, const StageLatency& lat);

// Latencies for one extractor stage (0-based) under the cost model above.
StageLatency default_latencies(const model::ModelConfig& config, std::size_t stage,
                               std::uint64_t lanes = 1);

}  // namespace pointode::pipeline
