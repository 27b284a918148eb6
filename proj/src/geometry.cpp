#include "geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace pointode::geo {

namespace {

double dist2(const double* a, const double* b) {
  double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

bool binary_extension(const std::string& path) {
  auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return false;
  std::string ext = path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == "bin" || ext == "raw" || ext == "f32";
}

std::uint32_t read_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) fail(errc::format, std::string("plan: truncated reading ") + what);
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

PointCloud load_cloud_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::io, "cloud: cannot open " + path);
  PointCloud pc;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    double x, y, z;
    if (!(ls >> x >> y >> z)) {
      fail(errc::format, "cloud: " + path + ":" + std::to_string(lineno) + ": expected three coordinates");
    }
    std::string rest;
    if (ls >> rest) {
      fail(errc::format, "cloud: " + path + ":" + std::to_string(lineno) + ": trailing junk '" + rest + "'");
    }
    pc.xyz.insert(pc.xyz.end(), {x, y, z});
  }
  if (pc.xyz.empty()) fail(errc::format, "cloud: " + path + " holds no points");
  return pc;
}

PointCloud load_cloud_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::io, "cloud: cannot open " + path);
  in.seekg(0, std::ios::end);
  auto bytes = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  if (bytes == 0 || bytes % 12 != 0) {
    fail(errc::format, "cloud: " + path + " is not a sequence of f32 xyz triples (size " +
                           std::to_string(bytes) + ")");
  }
  std::size_t n = bytes / 12;
  std::vector<unsigned char> buf(bytes);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes))) {
    fail(errc::io, "cloud: short read on " + path);
  }
  PointCloud pc;
  pc.xyz.resize(3 * n);
  for (std::size_t i = 0; i < 3 * n; ++i) {
    std::uint32_t u = std::uint32_t(buf[4 * i]) | std::uint32_t(buf[4 * i + 1]) << 8 |
                      std::uint32_t(buf[4 * i + 2]) << 16 | std::uint32_t(buf[4 * i + 3]) << 24;
    float f;
    std::memcpy(&f, &u, 4);
    pc.xyz[i] = f;
  }
  return pc;
}

PointCloud load_cloud(const std::string& path) {
  return binary_extension(path) ? load_cloud_binary(path) : load_cloud_text(path);
}

void normalize_unit_sphere(PointCloud& cloud) {
  std::size_t n = cloud.size();
  if (n == 0) fail(errc::invalid_argument, "normalize: empty cloud");
  double c[3] = {0, 0, 0};
  for (std::size_t i = 0; i < n; ++i)
    for (int a = 0; a < 3; ++a) c[a] += cloud.point(i)[a];
  for (int a = 0; a < 3; ++a) c[a] /= static_cast<double>(n);

  double max2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double* p = cloud.point(i);
    for (int a = 0; a < 3; ++a) p[a] -= c[a];
    max2 = std::max(max2, p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
  }
  if (max2 == 0.0) return;  // every point was the centroid; leave the zeros
  double inv = 1.0 / std::sqrt(max2);
  for (double& v : cloud.xyz) v *= inv;
}

std::vector<std::uint32_t> farthest_point_sample(const PointCloud& cloud, std::size_t m) {
  std::size_t n = cloud.size();
  if (m < 1 || m > n) {
    fail(errc::invalid_argument,
         "fps: sample count " + std::to_string(m) + " outside [1, " + std::to_string(n) + "]");
  }
  std::vector<std::uint32_t> sel;
  sel.reserve(m);
  sel.push_back(0);
  std::vector<char> taken(n, 0);
  taken[0] = 1;
  std::vector<double> nearest(n);
  for (std::size_t i = 0; i < n; ++i) nearest[i] = dist2(cloud.point(i), cloud.point(0));

  while (sel.size() < m) {
    double best = -1.0;
    std::uint32_t arg = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
      if (!taken[i] && nearest[i] > best) {  // strict: ties keep the lower index
        best = nearest[i];
        arg = i;
      }
    }
    sel.push_back(arg);
    taken[arg] = 1;
    const double* p = cloud.point(arg);
    for (std::size_t i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], dist2(cloud.point(i), p));
  }
  return sel;
}

std::vector<std::uint32_t> knn(const PointCloud& cloud, const std::vector<std::uint32_t>& queries,
                               std::size_t k) {
  std::size_t n = cloud.size();
  if (k < 1 || k > n) {
    fail(errc::invalid_argument, "knn: k " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
  std::vector<std::uint32_t> out;
  out.reserve(queries.size() * k);
  std::vector<std::pair<double, std::uint32_t>> dist(n);
  for (std::uint32_t q : queries) {
    if (q >= n) fail(errc::invalid_argument, "knn: query index " + std::to_string(q) + " out of range");
    const double* pq = cloud.point(q);
    for (std::uint32_t i = 0; i < n; ++i) dist[i] = {dist2(pq, cloud.point(i)), i};
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    for (std::size_t j = 0; j < k; ++j) out.push_back(dist[j].second);
  }
  return out;
}

SamplingPlan build_sampling_plan(const PointCloud& cloud, std::size_t k) {
  std::size_t n = cloud.size();
  if (n == 0 || n % 16 != 0) {
    fail(errc::invalid_argument,
         "plan: point count must be a positive multiple of 16, got " + std::to_string(n));
  }
  if (k < 1) fail(errc::invalid_argument, "plan: k must be at least 1");

  SamplingPlan plan;
  PointCloud level = cloud;
  for (int s = 0; s < 4; ++s) {
    if (k > level.size()) {
      fail(errc::invalid_argument, "plan: k " + std::to_string(k) + " exceeds the stage " +
                                       std::to_string(s + 1) + " parent of " +
                                       std::to_string(level.size()) + " points");
    }
    std::size_t m = level.size() / 2;
    GroupIndex g;
    g.rows = static_cast<std::uint32_t>(m);
    g.k = static_cast<std::uint32_t>(k);
    g.centroids = farthest_point_sample(level, m);
    g.neighbors = knn(level, g.centroids, k);

    PointCloud next;
    next.xyz.reserve(3 * m);
    for (std::uint32_t id : g.centroids)
      next.xyz.insert(next.xyz.end(), level.point(id), level.point(id) + 3);
    plan.stages.push_back(std::move(g));
    level = std::move(next);
  }
  return plan;
}

void save_plan(const SamplingPlan& plan, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(errc::io, "plan: cannot write " + path);
  out.write("PIDX", 4);
  write_u32(out, static_cast<std::uint32_t>(plan.stages.size()));
  for (const GroupIndex& g : plan.stages) {
    write_u32(out, g.rows);
    write_u32(out, g.k);
    for (std::uint32_t id : g.centroids) write_u32(out, id);
    for (std::uint32_t id : g.neighbors) write_u32(out, id);
  }
  if (!out) fail(errc::io, "plan: write failure on " + path);
}

SamplingPlan load_plan(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::io, "plan: cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4)) fail(errc::format, "plan: " + path + " shorter than its header");
  if (std::memcmp(magic, "PIDX", 4) != 0) fail(errc::format, "plan: " + path + " has no PIDX magic");
  std::uint32_t stages = read_u32(in, "stage count");
  if (stages == 0 || stages > 16) {
    fail(errc::format, "plan: implausible stage count " + std::to_string(stages));
  }
  SamplingPlan plan;
  std::uint32_t parent = 0;
  for (std::uint32_t s = 0; s < stages; ++s) {
    GroupIndex g;
    g.rows = read_u32(in, "stage rows");
    g.k = read_u32(in, "stage k");
    if (g.rows == 0 || g.k == 0) fail(errc::format, "plan: empty stage " + std::to_string(s + 1));
    if (s == 0) {
      parent = 2 * g.rows;  // the halving law fixes the input size
    } else if (g.rows * 2 != parent) {
      fail(errc::format, "plan: stage " + std::to_string(s + 1) + " breaks the halving chain");
    }
    g.centroids.resize(g.rows);
    for (std::uint32_t& id : g.centroids) {
      id = read_u32(in, "centroid index");
      if (id >= parent) fail(errc::format, "plan: centroid index out of range in stage " + std::to_string(s + 1));
    }
    g.neighbors.resize(static_cast<std::size_t>(g.rows) * g.k);
    for (std::uint32_t& id : g.neighbors) {
      id = read_u32(in, "neighbor index");
      if (id >= parent) fail(errc::format, "plan: neighbor index out of range in stage " + std::to_string(s + 1));
    }
    parent = g.rows;
    plan.stages.push_back(std::move(g));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    fail(errc::format, "plan: " + path + " has trailing bytes past the last stage");
  }
  return plan;
}

}  // namespace pointode::geo
