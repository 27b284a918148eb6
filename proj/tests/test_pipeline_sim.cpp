#include <algorithm>
#include <random>

#include "doctest.h"
#include "error.hpp"
#include "pipeline_sim.hpp"

using namespace pointode;

namespace {

// Brute-force discrete-event oracle: finish[g][i] is when group g leaves
// step i. A group enters a step once it has finished the previous step and
// the step has released the group ahead of it.
std::uint64_t event_driven_makespan(std::uint64_t n_groups, const pipeline::StageLatency& lat) {
  std::vector<std::uint64_t> prev_finish(4, 0);  // finish times of the group ahead
  for (std::uint64_t g = 0; g < n_groups; ++g) {
    std::uint64_t ready = 0;
    for (std::size_t i = 0; i < 4; ++i) {
      std::uint64_t start = std::max(ready, prev_finish[i]);
      ready = start + lat.steps[i];
      prev_finish[i] = ready;
    }
  }
  return prev_finish[3];
}

}  // namespace

TEST_SUITE("pipeline_sim") {

TEST_CASE("closed form equals the event-driven oracle on random cases") {
  std::mt19937_64 rng(4242);
  std::uniform_int_distribution<std::uint64_t> pick_n(1, 300);
  std::uniform_int_distribution<std::uint64_t> pick_l(1, 1000);
  for (int trial = 0; trial < 10000; ++trial) {
    pipeline::StageLatency lat;
    for (auto& l : lat.steps) l = pick_l(rng);
    std::uint64_t n = pick_n(rng);
    pipeline::PipelineReport r = pipeline::simulate(n, lat);
    std::uint64_t sum = lat.steps[0] + lat.steps[1] + lat.steps[2] + lat.steps[3];
    REQUIRE(r.pipelined_cycles == event_driven_makespan(n, lat));
    REQUIRE(r.sequential_cycles == n * sum);
  }
}

TEST_CASE("worked example: l=(2,1,3,6), 64 groups") {
  pipeline::StageLatency lat;
  lat.steps = {2, 1, 3, 6};
  pipeline::PipelineReport r = pipeline::simulate(64, lat);
  CHECK(r.pipelined_cycles == 12 + 63 * 6);
  CHECK(r.pipelined_cycles == event_driven_makespan(64, lat));
  CHECK(r.sequential_cycles == 64 * 12);
}

TEST_CASE("one group gains nothing from pipelining") {
  pipeline::StageLatency lat;
  lat.steps = {5, 9, 2, 7};
  pipeline::PipelineReport r = pipeline::simulate(1, lat);
  CHECK(r.sequential_cycles == r.pipelined_cycles);
  CHECK(r.speedup == 1.0);
}

TEST_CASE("balanced steps approach fourfold speedup") {
  pipeline::StageLatency lat;  // defaults to all ones
  CHECK(pipeline::simulate(1u << 20, lat).speedup == doctest::Approx(4.0).epsilon(1e-5));
  CHECK(pipeline::simulate(4, lat).speedup == doctest::Approx(16.0 / 7.0));
}

TEST_CASE("makespan is monotone in each step latency") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::uint64_t> pick_n(1, 64);
  std::uniform_int_distribution<std::uint64_t> pick_l(1, 200);
  std::uniform_int_distribution<std::size_t> pick_step(0, 3);
  for (int trial = 0; trial < 2000; ++trial) {
    pipeline::StageLatency lat;
    for (auto& l : lat.steps) l = pick_l(rng);
    std::uint64_t n = pick_n(rng);
    std::uint64_t base = pipeline::simulate(n, lat).pipelined_cycles;
    lat.steps[pick_step(rng)] += pick_l(rng);
    CHECK(pipeline::simulate(n, lat).pipelined_cycles >= base);
  }
}

TEST_CASE("speedup bounds hold for all inputs") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::uint64_t> pick_n(4, 500);
  std::uniform_int_distribution<std::uint64_t> pick_l(1, 1000);
  for (int trial = 0; trial < 2000; ++trial) {
    pipeline::StageLatency lat;
    for (auto& l : lat.steps) l = pick_l(rng);
    std::uint64_t n = pick_n(rng);
    pipeline::PipelineReport r = pipeline::simulate(n, lat);
    std::uint64_t sum = lat.steps[0] + lat.steps[1] + lat.steps[2] + lat.steps[3];
    std::uint64_t worst = *std::max_element(lat.steps.begin(), lat.steps.end());
    double cap = std::min(4.0, static_cast<double>(sum) / static_cast<double>(worst));
    CHECK(r.speedup > 1.0);  // n >= 4 always overlaps something
    CHECK(r.speedup <= cap + 1e-12);
  }
}

TEST_CASE("occupancy is a busy fraction and peaks at the bottleneck") {
  pipeline::StageLatency lat;
  lat.steps = {576, 576, 768, 532};
  pipeline::PipelineReport r = pipeline::simulate(512, lat);
  double best = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(r.occupancy[i] > 0.0);
    CHECK(r.occupancy[i] <= 1.0);
    CHECK(r.occupancy[i] == static_cast<double>(512 * lat.steps[i]) /
                                static_cast<double>(r.pipelined_cycles));
    best = std::max(best, r.occupancy[i]);
  }
  CHECK(best == r.occupancy[2]);  // step 3 is the longest here
}

TEST_CASE("invalid inputs are rejected") {
  pipeline::StageLatency lat;
  CHECK_THROWS_AS(pipeline::simulate(0, lat), Error);
  lat.steps[2] = 0;
  CHECK_THROWS_AS(pipeline::simulate(8, lat), Error);
}

TEST_CASE("compressed preset latencies and speedups sit where expected") {
  model::ModelConfig cfg = model::preset_config("elite");

  // hand-evaluated from the documented cost model, lanes = 1
  const std::array<std::array<std::uint64_t, 4>, 4> want = {{
      {576, 576, 768, 532},
      {1152, 1152, 1536, 1044},
      {2304, 2304, 3072, 2068},
      {4608, 4608, 6144, 2068},
  }};
  const std::array<std::uint64_t, 4> groups = {512, 256, 128, 64};
  const std::array<double, 4> speedups = {3.179, 3.153, 3.120, 2.757};

  for (std::size_t s = 0; s < 4; ++s) {
    pipeline::StageLatency lat = pipeline::default_latencies(cfg, s);
    CHECK(lat.steps == want[s]);
    double sp = pipeline::simulate(groups[s], lat).speedup;
    CHECK(sp == doctest::Approx(speedups[s]).epsilon(1e-3));
    CHECK(sp >= 2.5);
    CHECK(sp <= 3.5);
  }
}

TEST_CASE("iteration budget scales the block step linearly") {
  model::ModelConfig cfg = model::preset_config("elite");
  for (std::size_t s = 0; s < 4; ++s) {
    std::uint64_t base = pipeline::default_latencies(cfg, s).steps[3];
    model::ModelConfig doubled = cfg;
    doubled.ode_iterations = 2 * cfg.ode_iterations;
    pipeline::StageLatency lat = pipeline::default_latencies(doubled, s);
    CHECK(lat.steps[3] == 2 * base);
    for (std::size_t i = 0; i < 3; ++i)
      CHECK(lat.steps[i] == pipeline::default_latencies(cfg, s).steps[i]);
  }
}

TEST_CASE("lanes shrink only the MAC-bound steps") {
  model::ModelConfig cfg = model::preset_config("elite");
  pipeline::StageLatency one = pipeline::default_latencies(cfg, 1, 1);
  pipeline::StageLatency wide = pipeline::default_latencies(cfg, 1, 1u << 30);
  CHECK(wide.steps[0] == one.steps[0]);
  CHECK(wide.steps[1] == one.steps[1]);
  CHECK(wide.steps[2] == 1);
  CHECK(wide.steps[3] == 1);

  pipeline::StageLatency four = pipeline::default_latencies(cfg, 1, 4);
  CHECK(four.steps[2] == (one.steps[2] + 3) / 4);
  CHECK(four.steps[3] == (one.steps[3] + 3) / 4);
}

TEST_CASE("block step costs follow the block layout") {
  // residual baseline, stage 1: 2 per-row passes times K=24 rows plus 2
  // per-centroid passes, each 2*F*Fq MACs on an Fq-wide engine
  model::ModelConfig residual = model::preset_config("pointmlp-like");
  pipeline::StageLatency lat = pipeline::default_latencies(residual, 0);
  CHECK(lat.steps[0] == 2304);  // ceil(3*24*64/2)
  CHECK(lat.steps[1] == 2304);
  CHECK(lat.steps[2] == 3072);  // 24*2*64
  CHECK(lat.steps[3] == 12800);  // (2*24+2)*2*128*128/128

  // timed blocks, one per-row and one per-centroid, budget split 2+2
  model::ModelConfig timed = model::preset_config("naive");
  lat = pipeline::default_latencies(timed, 0);
  CHECK(lat.steps[3] == 12900);  // (2*24+2)*((128+1)*128+(128+1)*128)/128
}

TEST_CASE("bad stage or lane arguments are rejected") {
  model::ModelConfig cfg = model::preset_config("elite");
  CHECK_THROWS_AS(pipeline::default_latencies(cfg, 4), Error);
  CHECK_THROWS_AS(pipeline::default_latencies(cfg, 0, 0), Error);
}

}  // TEST_SUITE
