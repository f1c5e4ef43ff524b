#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "spl/boxlabel.hpp"

namespace spl::boxlabel {

namespace {

constexpr double kMinExtent = 0.01;

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

double median(std::vector<double>& v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
}

// Each point belongs to its nearest rectangle edge. Per axis, the edge holding
// more points is an observed side; its position becomes the median of its
// points. The opposite edge keeps the extreme.
geom::Box3D median_edge_rect(std::span<const geom::Vec3> points, double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  double lo[2] = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  double hi[2] = {-lo[0], -lo[0]};
  std::vector<std::array<double, 2>> uv(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    uv[i] = {points[i].x * c + points[i].y * s, -points[i].x * s + points[i].y * c};
    for (int a = 0; a < 2; ++a) {
      lo[a] = std::min(lo[a], uv[i][static_cast<std::size_t>(a)]);
      hi[a] = std::max(hi[a], uv[i][static_cast<std::size_t>(a)]);
    }
  }
  std::vector<double> edge[2][2];  // [axis][0 = lo, 1 = hi]
  for (const auto& q : uv) {
    int axis = 0, side = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 2; ++a) {
      const double v = q[static_cast<std::size_t>(a)];
      if (v - lo[a] < best) best = v - lo[a], axis = a, side = 0;
      if (hi[a] - v < best) best = hi[a] - v, axis = a, side = 1;
    }
    edge[axis][side].push_back(q[static_cast<std::size_t>(axis)]);
  }
  for (int a = 0; a < 2; ++a) {
    const int side = edge[a][1].size() > edge[a][0].size() ? 1 : 0;
    auto& pts = edge[a][side];
    if (pts.size() < 3) continue;
    (side == 0 ? lo[a] : hi[a]) = median(pts);
  }
  const double m1 = 0.5 * (lo[0] + hi[0]), m2 = 0.5 * (lo[1] + hi[1]);
  geom::Box3D box;
  box.cx = m1 * c - m2 * s;
  box.cy = m1 * s + m2 * c;
  box.l = std::max(hi[0] - lo[0], kMinExtent);
  box.w = std::max(hi[1] - lo[1], kMinExtent);
  box.yaw = geom::normalize_angle(yaw);
  return box;
}

}  // namespace

double lshape_closeness(std::span<const geom::Vec3> points, double theta, double min_edge_dist) {
  const double c = std::cos(theta), s = std::sin(theta);
  double lo1 = std::numeric_limits<double>::infinity(), hi1 = -lo1, lo2 = lo1, hi2 = -lo1;
  for (const auto& p : points) {
    const double a = p.x * c + p.y * s;
    const double b = -p.x * s + p.y * c;
    lo1 = std::min(lo1, a);
    hi1 = std::max(hi1, a);
    lo2 = std::min(lo2, b);
    hi2 = std::max(hi2, b);
  }
  double score = 0.0;
  for (const auto& p : points) {
    const double a = p.x * c + p.y * s;
    const double b = -p.x * s + p.y * c;
    const double d1 = std::min(hi1 - a, a - lo1);
    const double d2 = std::min(hi2 - b, b - lo2);
    score += 1.0 / std::max(std::min(d1, d2), min_edge_dist);
  }
  return score;
}

geom::Box3D min_rect_at_yaw(std::span<const geom::Vec3> points, double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  double lo1 = std::numeric_limits<double>::infinity(), hi1 = -lo1, lo2 = lo1, hi2 = -lo1, zlo = lo1, zhi = -lo1;
  for (const auto& p : points) {
    const double a = p.x * c + p.y * s;
    const double b = -p.x * s + p.y * c;
    lo1 = std::min(lo1, a);
    hi1 = std::max(hi1, a);
    lo2 = std::min(lo2, b);
    hi2 = std::max(hi2, b);
    zlo = std::min(zlo, p.z);
    zhi = std::max(zhi, p.z);
  }
  const double m1 = 0.5 * (lo1 + hi1), m2 = 0.5 * (lo2 + hi2);
  geom::Box3D box;
  box.cx = m1 * c - m2 * s;
  box.cy = m1 * s + m2 * c;
  box.cz = 0.5 * (zlo + zhi);
  box.l = std::max(hi1 - lo1, kMinExtent);
  box.w = std::max(hi2 - lo2, kMinExtent);
  box.h = std::max(zhi - zlo, kMinExtent);
  box.yaw = geom::normalize_angle(yaw);
  return box;
}

geom::Box3D fit_lshape(std::span<const geom::Vec3> points, int min_points, const LShapeParams& params) {
  if (points.size() < 3 || points.size() < static_cast<std::size_t>(std::max(min_points, 0))) {
    throw Error(ErrorCode::TooFewPoints, "L-shape fit needs at least " + std::to_string(std::max(min_points, 3)) +
                                             " points, got " + std::to_string(points.size()));
  }
  // Centering keeps the projections well conditioned far from the sensor.
  geom::Vec3 mean;
  for (const auto& p : points) mean += p;
  mean *= 1.0 / static_cast<double>(points.size());
  std::vector<geom::Vec3> local(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) local[i] = {points[i].x - mean.x, points[i].y - mean.y, 0.0};

  double step = deg2rad(params.step_deg);
  double best = 0.0, best_score = -1.0;
  const int n = static_cast<int>(std::lround(90.0 / params.step_deg));
  for (int i = 0; i < n; ++i) {
    const double th = i * step;
    const double sc = lshape_closeness(local, th, params.min_edge_dist);
    if (sc > best_score) {
      best_score = sc;
      best = th;
    }
  }
  for (int level = 0; level < params.refine_levels; ++level) {
    const double center = best;
    const double fine = step / 10.0;
    for (int i = -10; i <= 10; ++i) {
      if (i == 0) continue;
      const double th = center + i * fine;
      const double sc = lshape_closeness(local, th, params.min_edge_dist);
      if (sc > best_score) {
        best_score = sc;
        best = th;
      }
    }
    step = fine;
  }
  const double quarter = std::numbers::pi / 2.0;
  best = std::fmod(best, quarter);
  if (best < 0.0) best += quarter;

  geom::Box3D box = params.median_edges ? median_edge_rect(local, best) : min_rect_at_yaw(local, best);
  box.cx += mean.x;
  box.cy += mean.y;
  double zlo = std::numeric_limits<double>::infinity(), zhi = -zlo;
  for (const auto& p : points) {
    zlo = std::min(zlo, p.z);
    zhi = std::max(zhi, p.z);
  }
  box.cz = 0.5 * (zlo + zhi);
  box.h = std::max(zhi - zlo, kMinExtent);
  box = canonical_lw(box);
  if (box.yaw < 0.0) box.yaw += std::numbers::pi;
  if (box.yaw >= std::numbers::pi) box.yaw -= std::numbers::pi;
  return box;
}

geom::Box3D canonical_lw(const geom::Box3D& box) {
  if (box.w <= box.l) return box;
  geom::Box3D out = box;
  std::swap(out.l, out.w);
  out.yaw = geom::normalize_angle(box.yaw + std::numbers::pi / 2.0);
  return out;
}

}  // namespace spl::boxlabel
