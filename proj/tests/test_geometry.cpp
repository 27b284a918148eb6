#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "error.hpp"
#include "geometry.hpp"

using pointode::Error;
using namespace pointode::geo;

namespace {

double d2(const PointCloud& pc, std::size_t a, std::size_t b) {
  const double* pa = pc.point(a);
  const double* pb = pc.point(b);
  double dx = pa[0] - pb[0], dy = pa[1] - pb[1], dz = pa[2] - pb[2];
  return dx * dx + dy * dy + dz * dz;
}

// Reference sampler, no incremental distance cache: every step recomputes
// each candidate's distance to the whole chosen set with nested loops.
std::vector<std::uint32_t> brute_fps(const PointCloud& pc, std::size_t m) {
  std::vector<std::uint32_t> sel{0};
  std::vector<bool> taken(pc.size(), false);
  taken[0] = true;
  while (sel.size() < m) {
    double best = -1.0;
    std::uint32_t arg = 0;
    for (std::uint32_t i = 0; i < pc.size(); ++i) {
      if (taken[i]) continue;
      double nearest = std::numeric_limits<double>::infinity();
      for (std::uint32_t s : sel) nearest = std::min(nearest, d2(pc, i, s));
      if (nearest > best) {
        best = nearest;
        arg = i;
      }
    }
    sel.push_back(arg);
    taken[arg] = true;
  }
  return sel;
}

// Reference neighbor lists via a full stable sort per query.
std::vector<std::uint32_t> brute_knn(const PointCloud& pc, const std::vector<std::uint32_t>& queries,
                                     std::size_t k) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t q : queries) {
    std::vector<std::pair<double, std::uint32_t>> all;
    for (std::uint32_t i = 0; i < pc.size(); ++i) all.emplace_back(d2(pc, q, i), i);
    std::sort(all.begin(), all.end());
    for (std::size_t j = 0; j < k; ++j) out.push_back(all[j].second);
  }
  return out;
}

PointCloud random_cloud(std::mt19937_64& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  PointCloud pc;
  pc.xyz.resize(3 * n);
  for (double& v : pc.xyz) v = u(rng);
  return pc;
}

double min_pairwise_d2(const PointCloud& pc, const std::vector<std::uint32_t>& ids) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < ids.size(); ++a)
    for (std::size_t b = a + 1; b < ids.size(); ++b) best = std::min(best, d2(pc, ids[a], ids[b]));
  return best;
}

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("text cloud loading") {
  auto path = temp_file("pode_cloud.xyz");
  {
    std::ofstream f(path);
    f << "1.0 2.0 3.0\n";
    f << "  -4.5\t0 \t 2.25  \n";
    f << "\n";
    f << "0 0 1e-3\n";
  }
  PointCloud pc = load_cloud(path.string());
  REQUIRE(pc.size() == 3);
  CHECK(pc.point(1)[0] == -4.5);
  CHECK(pc.point(2)[2] == 1e-3);

  {
    std::ofstream f(path);
    f << "1.0 2.0\n";  // short row
  }
  CHECK_THROWS_AS(load_cloud(path.string()), Error);
  {
    std::ofstream f(path);
    f << "1 2 bananas\n";
  }
  CHECK_THROWS_AS(load_cloud(path.string()), Error);

  CHECK_THROWS_AS(load_cloud("/nonexistent/cloud.xyz"), Error);
  std::filesystem::remove(path);
}

TEST_CASE("binary cloud loading") {
  auto path = temp_file("pode_cloud.bin");
  {
    std::ofstream f(path, std::ios::binary);
    float vals[6] = {1.0f, 2.0f, 3.0f, -0.5f, 0.25f, 8.0f};
    f.write(reinterpret_cast<const char*>(vals), sizeof(vals));
  }
  PointCloud pc = load_cloud(path.string());
  REQUIRE(pc.size() == 2);
  CHECK(pc.point(0)[1] == 2.0);
  CHECK(pc.point(1)[0] == -0.5);

  {
    std::ofstream f(path, std::ios::binary);
    char junk[7] = {0};
    f.write(junk, sizeof(junk));  // not a multiple of 12
  }
  CHECK_THROWS_AS(load_cloud(path.string()), Error);
  std::filesystem::remove(path);
}

TEST_CASE("unit sphere normalization") {
  PointCloud pc;
  pc.xyz = {1, 0, 0, 3, 0, 0};
  normalize_unit_sphere(pc);
  CHECK(pc.point(0)[0] == doctest::Approx(-1.0));
  CHECK(pc.point(1)[0] == doctest::Approx(1.0));

  std::mt19937_64 rng(41);
  for (int t = 0; t < 50; ++t) {
    PointCloud c = random_cloud(rng, 64, -50.0, 50.0);
    normalize_unit_sphere(c);
    double cx = 0, cy = 0, cz = 0, maxn = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      const double* p = c.point(i);
      cx += p[0];
      cy += p[1];
      cz += p[2];
      maxn = std::max(maxn, std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]));
    }
    CHECK(std::abs(cx / c.size()) < 1e-9);
    CHECK(std::abs(cy / c.size()) < 1e-9);
    CHECK(std::abs(cz / c.size()) < 1e-9);
    CHECK(maxn == doctest::Approx(1.0).epsilon(1e-12));
  }

  PointCloud flat;
  flat.xyz = {2, 2, 2, 2, 2, 2, 2, 2, 2};
  normalize_unit_sphere(flat);
  for (double v : flat.xyz) CHECK(v == 0.0);

  PointCloud single;
  single.xyz = {5, -1, 7};
  normalize_unit_sphere(single);
  for (double v : single.xyz) CHECK(v == 0.0);
}

TEST_CASE("farthest point sampling on a line") {
  PointCloud pc;
  pc.xyz = {0, 0, 0, 1, 0, 0, 2, 0, 0, 3, 0, 0};
  CHECK(farthest_point_sample(pc, 1) == std::vector<std::uint32_t>{0});
  CHECK(farthest_point_sample(pc, 2) == std::vector<std::uint32_t>{0, 3});
  // both remaining points sit at min-distance 1; the tie goes to index 1
  CHECK(farthest_point_sample(pc, 3) == std::vector<std::uint32_t>{0, 3, 1});
  CHECK_THROWS_AS(farthest_point_sample(pc, 0), Error);
  CHECK_THROWS_AS(farthest_point_sample(pc, 5), Error);
}

TEST_CASE("fps with m equal to n is a permutation starting at 0") {
  std::mt19937_64 rng(43);
  PointCloud pc = random_cloud(rng, 33);
  auto sel = farthest_point_sample(pc, 33);
  CHECK(sel[0] == 0);
  auto sorted = sel;
  std::sort(sorted.begin(), sorted.end());
  for (std::uint32_t i = 0; i < 33; ++i) CHECK(sorted[i] == i);
}

TEST_CASE("fps matches the brute-force sampler") {
  std::mt19937_64 rng(47);
  for (int t = 0; t < 200; ++t) {
    std::size_t n = 4 + rng() % 125;
    PointCloud pc = random_cloud(rng, n);
    std::size_t m = 1 + rng() % n;
    CHECK(farthest_point_sample(pc, m) == brute_fps(pc, m));
  }
  // clouds with duplicated points must still yield a permutation
  for (int t = 0; t < 20; ++t) {
    PointCloud pc = random_cloud(rng, 10);
    for (int d = 0; d < 12; ++d) {
      std::size_t src = rng() % 10;
      pc.xyz.insert(pc.xyz.end(), {pc.point(src)[0], pc.point(src)[1], pc.point(src)[2]});
    }
    CHECK(farthest_point_sample(pc, pc.size()) == brute_fps(pc, pc.size()));
  }
}

TEST_CASE("fps is deterministic") {
  std::mt19937_64 rng(53);
  PointCloud pc = random_cloud(rng, 100);
  CHECK(farthest_point_sample(pc, 40) == farthest_point_sample(pc, 40));
}

TEST_CASE("fps spreads better than random sampling") {
  std::mt19937_64 rng(59);
  int wins = 0;
  const int trials = 300;
  for (int t = 0; t < trials; ++t) {
    PointCloud pc = random_cloud(rng, 64);
    auto fps_ids = farthest_point_sample(pc, 8);
    std::vector<std::uint32_t> all(64);
    for (std::uint32_t i = 0; i < 64; ++i) all[i] = i;
    std::shuffle(all.begin(), all.end(), rng);
    std::vector<std::uint32_t> rand_ids(all.begin(), all.begin() + 8);
    if (min_pairwise_d2(pc, fps_ids) >= min_pairwise_d2(pc, rand_ids)) ++wins;
  }
  CHECK(wins >= trials * 95 / 100);
}

TEST_CASE("knn on a line") {
  PointCloud pc;
  pc.xyz = {0, 0, 0, 1, 0, 0, 2, 0, 0, 3, 0, 0};
  // from index 1: itself first, then the distance-1 tie resolved to index 0
  CHECK(knn(pc, {1}, 3) == std::vector<std::uint32_t>{1, 0, 2});
  CHECK(knn(pc, {1}, 1) == std::vector<std::uint32_t>{1});
  CHECK(knn(pc, {0}, 4) == std::vector<std::uint32_t>{0, 1, 2, 3});
  CHECK_THROWS_AS(knn(pc, {0}, 5), Error);
  CHECK_THROWS_AS(knn(pc, {0}, 0), Error);
  CHECK_THROWS_AS(knn(pc, {9}, 2), Error);
}

TEST_CASE("knn index tie-break on duplicate points") {
  PointCloud pc;
  pc.xyz = {0, 0, 0, 0, 0, 0, 1, 1, 1};
  // the duplicate at index 0 precedes the query itself
  CHECK(knn(pc, {1}, 2) == std::vector<std::uint32_t>{0, 1});
}

TEST_CASE("knn matches the brute-force sort") {
  std::mt19937_64 rng(61);
  for (int t = 0; t < 200; ++t) {
    std::size_t n = 4 + rng() % 125;
    PointCloud pc = random_cloud(rng, n);
    std::size_t k = 1 + rng() % n;
    std::vector<std::uint32_t> queries;
    for (int q = 0; q < 5; ++q) queries.push_back(static_cast<std::uint32_t>(rng() % n));
    CHECK(knn(pc, queries, k) == brute_knn(pc, queries, k));
  }
}

TEST_CASE("sampling plan shapes") {
  std::mt19937_64 rng(67);
  PointCloud pc = random_cloud(rng, 1024);
  SamplingPlan plan = build_sampling_plan(pc, 12);
  REQUIRE(plan.stages.size() == 4);
  std::uint32_t expect_rows[4] = {512, 256, 128, 64};
  for (int s = 0; s < 4; ++s) {
    CHECK(plan.stages[s].rows == expect_rows[s]);
    CHECK(plan.stages[s].k == 12);
    CHECK(plan.stages[s].centroids.size() == expect_rows[s]);
    CHECK(plan.stages[s].neighbors.size() == expect_rows[s] * 12u);
    std::uint32_t parent = (s == 0) ? 1024 : plan.stages[s - 1].rows;
    for (std::uint32_t id : plan.stages[s].centroids) CHECK(id < parent);
    for (std::uint32_t id : plan.stages[s].neighbors) CHECK(id < parent);
  }

  PointCloud tiny = random_cloud(rng, 16);
  SamplingPlan tp = build_sampling_plan(tiny, 2);
  std::uint32_t tiny_rows[4] = {8, 4, 2, 1};
  for (int s = 0; s < 4; ++s) CHECK(tp.stages[s].rows == tiny_rows[s]);

  PointCloud odd = random_cloud(rng, 100);
  CHECK_THROWS_AS(build_sampling_plan(odd, 4), Error);
  // k = 3 cannot be served by the stage-4 parent of two points
  CHECK_THROWS_AS(build_sampling_plan(tiny, 3), Error);
}

TEST_CASE("plan file round-trip and corruption") {
  std::mt19937_64 rng(71);
  PointCloud pc = random_cloud(rng, 64);
  SamplingPlan plan = build_sampling_plan(pc, 4);
  auto path = temp_file("pode_plan.pidx");
  save_plan(plan, path.string());
  SamplingPlan back = load_plan(path.string());
  CHECK(back == plan);

  // flip the magic
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("JUNK", 4);
  }
  CHECK_THROWS_AS(load_plan(path.string()), Error);

  save_plan(plan, path.string());
  auto full = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, full - 5);
  CHECK_THROWS_AS(load_plan(path.string()), Error);

  save_plan(plan, path.string());
  {
    std::ofstream f(path, std::ios::binary | std::ios::app);
    f.write("xx", 2);
  }
  CHECK_THROWS_AS(load_plan(path.string()), Error);

  CHECK_THROWS_AS(load_plan("/nonexistent/plan.pidx"), Error);
  std::filesystem::remove(path);
}

TEST_CASE("permuted cloud with remapped stage-1 indices gives identical groups") {
  std::mt19937_64 rng(73);
  PointCloud pc = random_cloud(rng, 64);
  SamplingPlan plan = build_sampling_plan(pc, 4);

  std::vector<std::uint32_t> perm(64);
  for (std::uint32_t i = 0; i < 64; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  // permuted[i] = original[perm[i]]; an original index t lives at inv[t]
  std::vector<std::uint32_t> inv(64);
  for (std::uint32_t i = 0; i < 64; ++i) inv[perm[i]] = i;

  PointCloud shuffled;
  shuffled.xyz.resize(pc.xyz.size());
  for (std::uint32_t i = 0; i < 64; ++i)
    std::copy_n(pc.point(perm[i]), 3, shuffled.point(i));

  SamplingPlan remapped = plan;
  for (std::uint32_t& id : remapped.stages[0].centroids) id = inv[id];
  for (std::uint32_t& id : remapped.stages[0].neighbors) id = inv[id];

  // stage-1 gathered coordinates must agree exactly, in identical order
  const GroupIndex& a = plan.stages[0];
  const GroupIndex& b = remapped.stages[0];
  for (std::size_t j = 0; j < a.centroids.size(); ++j) {
    for (int c = 0; c < 3; ++c)
      CHECK(pc.point(a.centroids[j])[c] == shuffled.point(b.centroids[j])[c]);
  }
  for (std::size_t j = 0; j < a.neighbors.size(); ++j) {
    for (int c = 0; c < 3; ++c)
      CHECK(pc.point(a.neighbors[j])[c] == shuffled.point(b.neighbors[j])[c]);
  }
}

}  // TEST_SUITE
