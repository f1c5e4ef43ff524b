#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>

#include "spl/pointlabel.hpp"

namespace spl::pointlabel {

namespace {

constexpr std::int64_t kBias = 1 << 20;

std::int64_t cell_of(double v, double cell) { return static_cast<std::int64_t>(std::floor(v / cell)); }

}  // namespace

SpatialIndex::SpatialIndex(std::span<const geom::Vec3> points, double cell) : points_(points), cell_(cell) {
  if (!(cell > 0.0)) throw Error(ErrorCode::InvalidArgument, "spatial index cell must be positive");
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    cells_[key(cell_of(p.x, cell_), cell_of(p.y, cell_), cell_of(p.z, cell_))].push_back(i);
  }
}

std::int64_t SpatialIndex::key(std::int64_t ix, std::int64_t iy, std::int64_t iz) const {
  return ((ix + kBias) << 42) | ((iy + kBias) << 21) | (iz + kBias);
}

void SpatialIndex::radius_search(const geom::Vec3& q, double radius, std::vector<std::size_t>& out) const {
  out.clear();
  const double r2 = radius * radius;
  const std::int64_t x0 = cell_of(q.x - radius, cell_), x1 = cell_of(q.x + radius, cell_);
  const std::int64_t y0 = cell_of(q.y - radius, cell_), y1 = cell_of(q.y + radius, cell_);
  const std::int64_t z0 = cell_of(q.z - radius, cell_), z1 = cell_of(q.z + radius, cell_);
  for (std::int64_t ix = x0; ix <= x1; ++ix) {
    for (std::int64_t iy = y0; iy <= y1; ++iy) {
      for (std::int64_t iz = z0; iz <= z1; ++iz) {
        auto it = cells_.find(key(ix, iy, iz));
        if (it == cells_.end()) continue;
        for (std::size_t j : it->second) {
          if (geom::squared_distance(points_[j], q) <= r2) out.push_back(j);
        }
      }
    }
  }
  std::sort(out.begin(), out.end());
}

std::vector<int> dbscan(std::span<const geom::Vec3> points, double eps, int min_samples) {
  if (!(eps > 0.0) || min_samples < 1) throw Error(ErrorCode::InvalidArgument, "dbscan needs eps > 0 and min_samples >= 1");
  const std::size_t n = points.size();
  std::vector<int> labels(n, kNoise);
  if (n == 0) return labels;

  const SpatialIndex index(points, eps);
  std::vector<std::vector<std::size_t>> neighbors(n);
  std::vector<char> core(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    index.radius_search(points[i], eps, neighbors[i]);
    core[i] = neighbors[i].size() >= static_cast<std::size_t>(min_samples);
  }

  int next = 0;
  std::deque<std::size_t> queue;
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i] || labels[i] != kNoise) continue;
    const int id = next++;
    labels[i] = id;
    queue.assign(1, i);
    while (!queue.empty()) {
      const std::size_t p = queue.front();
      queue.pop_front();
      for (std::size_t q : neighbors[p]) {
        if (labels[q] != kNoise) continue;
        labels[q] = id;
        if (core[q]) queue.push_back(q);
      }
    }
  }
  return labels;
}

}  // namespace spl::pointlabel
