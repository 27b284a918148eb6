#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "error.hpp"

namespace pointode::geo {

// Interleaved xyz coordinates, row-major (point index is the row).
struct PointCloud {
  std::vector<double> xyz;

  std::size_t size() const { return xyz.size() / 3; }
  const double* point(std::size_t i) const { return xyz.data() + 3 * i; }
  double* point(std::size_t i) { return xyz.data() + 3 * i; }
};

// Text clouds carry one whitespace-separated "x y z" triple per line.
// Binary clouds are packed little-endian f32 triples, 12 bytes per point;
// the count comes from the file size.  load_cloud picks the parser from
// the extension: .bin/.raw/.f32 is binary, everything else is text.
PointCloud load_cloud(const std::string& path);
PointCloud load_cloud_text(const std::string& path);
PointCloud load_cloud_binary(const std::string& path);

// Center on the centroid and scale so the farthest point lands on the unit
// sphere.  A degenerate cloud (all points identical) collapses to zeros.
void normalize_unit_sphere(PointCloud& cloud);

// Greedy farthest-point sampling: start at index 0, repeatedly take the
// point maximizing the squared distance to the chosen set, ties to the
// lower index.  Requires 1 <= m <= size.
std::vector<std::uint32_t> farthest_point_sample(const PointCloud& cloud, std::size_t m);

// For every query index, the k nearest cloud points (the query itself shows
// up at distance zero), each row sorted by (squared distance, index).
// Returns queries.size() rows of k indices, row-major.
std::vector<std::uint32_t> knn(const PointCloud& cloud, const std::vector<std::uint32_t>& queries,
                               std::size_t k);

// One grouping level: rows centroids sampled from the parent level, each
// with k neighbor indices.  All indices refer to the parent level.
struct GroupIndex {
  std::uint32_t rows = 0;
  std::uint32_t k = 0;
  std::vector<std::uint32_t> centroids;  // rows entries
  std::vector<std::uint32_t> neighbors;  // rows*k entries, row-major

  bool operator==(const GroupIndex&) const = default;
};

// Four successive halvings (N/2, N/4, N/8, N/16).  Stage s indices refer to
// the centroid list of stage s-1 (stage 1 refers to the input cloud).
struct SamplingPlan {
  std::vector<GroupIndex> stages;

  bool operator==(const SamplingPlan&) const = default;
};

// Requires the point count to be a positive multiple of 16 and k to fit the
// smallest parent level (N/8).
SamplingPlan build_sampling_plan(const PointCloud& cloud, std::size_t k);

// Little-endian container: "PIDX" magic, u32 stage count, then per stage
// u32 rows, u32 k, u32 centroids[rows], u32 neighbors[rows*k].
void save_plan(const SamplingPlan& plan, const std::string& path);
SamplingPlan load_plan(const std::string& path);

}  // namespace pointode::geo
