// Independent oracles shared by the unit tests and the acceptance runner.
// Nothing here calls the code it checks.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <vector>

#include "spl/common.hpp"
#include "spl/geom.hpp"

namespace spl::testing {

inline double deg(double d) { return d * std::numbers::pi / 180.0; }

// Central differences of f at x, one coordinate at a time.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double eps = 1e-4) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + eps;
    const double up = f(x);
    x[i] = keep - eps;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * eps);
  }
  return g;
}

// Largest componentwise |a - n| / max(|a| + |n|, floor). The floor only keeps
// exact zeros on both sides from dividing by zero.
inline double max_rel_error(const std::vector<double>& analytic, const std::vector<double>& numeric,
                            double floor = 1e-8) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double den = std::max(std::abs(analytic[i]) + std::abs(numeric[i]), floor);
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / den);
  }
  return worst;
}

inline std::vector<double> random_unit(int d, Rng& rng) {
  std::vector<double> v(static_cast<std::size_t>(d));
  double n = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    n += x * x;
  }
  n = std::sqrt(n);
  for (auto& x : v) x /= n;
  return v;
}

// Point-in-oriented-box written from the definition.
inline bool inside(const geom::Box3D& b, double x, double y, double z) {
  const double dx = x - b.cx, dy = y - b.cy;
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const double u = c * dx + s * dy, v = -s * dx + c * dy;
  return std::abs(u) <= 0.5 * b.l && std::abs(v) <= 0.5 * b.w && std::abs(z - b.cz) <= 0.5 * b.h;
}

inline double bev_radius(const geom::Box3D& b) { return 0.5 * std::hypot(b.l, b.w); }

// Monte-Carlo 3D IoU from uniform samples over the union's bounding volume.
inline double monte_carlo_iou3d(const geom::Box3D& a, const geom::Box3D& b, int samples, Rng& rng) {
  const double x0 = std::min(a.cx - bev_radius(a), b.cx - bev_radius(b));
  const double x1 = std::max(a.cx + bev_radius(a), b.cx + bev_radius(b));
  const double y0 = std::min(a.cy - bev_radius(a), b.cy - bev_radius(b));
  const double y1 = std::max(a.cy + bev_radius(a), b.cy + bev_radius(b));
  const double z0 = std::min(a.z_min(), b.z_min()), z1 = std::max(a.z_max(), b.z_max());
  long in_a = 0, in_b = 0, both = 0;
  for (int i = 0; i < samples; ++i) {
    const double x = rng.uniform(x0, x1), y = rng.uniform(y0, y1), z = rng.uniform(z0, z1);
    const bool pa = inside(a, x, y, z), pb = inside(b, x, y, z);
    in_a += pa;
    in_b += pb;
    both += pa && pb;
  }
  const long uni = in_a + in_b - both;
  return uni > 0 ? static_cast<double>(both) / static_cast<double>(uni) : 0.0;
}

// Brute-force DBSCAN: all-pairs neighborhoods, union-find over core points,
// border points join the lowest-numbered cluster among their core neighbors.
inline std::vector<int> reference_dbscan(const std::vector<geom::Vec3>& pts, double eps, int min_samples) {
  const std::size_t n = pts.size();
  std::vector<std::vector<std::size_t>> nb(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (geom::distance(pts[i], pts[j]) <= eps) nb[i].push_back(j);
    }
  }
  std::vector<bool> core(n);
  for (std::size_t i = 0; i < n; ++i) core[i] = static_cast<int>(nb[i].size()) >= min_samples;
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t i) {
    return parent[i] == i ? i : parent[i] = find(parent[i]);
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i]) continue;
    for (std::size_t j : nb[i]) {
      if (core[j]) parent[find(i)] = find(j);
    }
  }
  std::map<std::size_t, int> id;  // root -> cluster number by lowest core index
  std::vector<int> label(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i]) continue;
    auto [it, fresh] = id.try_emplace(find(i), static_cast<int>(id.size()));
    label[i] = it->second;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    int best = -1;
    for (std::size_t j : nb[i]) {
      if (core[j] && (best < 0 || label[j] < best)) best = label[j];
    }
    label[i] = best;
  }
  return label;
}

// Same partition up to a bijective relabeling, with noise fixed at -1.
inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  std::map<int, int> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] < 0) != (b[i] < 0)) return false;
    if (a[i] < 0) continue;
    auto [i1, f1] = ab.try_emplace(a[i], b[i]);
    auto [i2, f2] = ba.try_emplace(b[i], a[i]);
    if (i1->second != b[i] || i2->second != a[i]) return false;
  }
  return true;
}

struct RectPose {
  double cx, cy, l, w, yaw;
};

// Two-sided outline: points along the two sides meeting at the corner nearest
// the sensor (origin), corner to corner, at several heights. Optional
// Gaussian BEV noise.
inline std::vector<geom::Vec3> rectangle_outline(const RectPose& r, double spacing, double noise, Rng& rng) {
  const double c = std::cos(r.yaw), s = std::sin(r.yaw);
  auto world = [&](double u, double v) { return geom::Vec2{r.cx + c * u - s * v, r.cy + s * u + c * v}; };
  const double hl = 0.5 * r.l, hw = 0.5 * r.w;
  double su = 1.0, sv = 1.0, best = 1e300;
  for (double a : {-1.0, 1.0}) {
    for (double b : {-1.0, 1.0}) {
      const geom::Vec2 p = world(a * hl, b * hw);
      if (std::hypot(p.x, p.y) < best) {
        best = std::hypot(p.x, p.y);
        su = a;
        sv = b;
      }
    }
  }
  std::vector<geom::Vec3> out;
  auto side = [&](double u0, double v0, double u1, double v1) {
    const int n = std::max(2, static_cast<int>(std::ceil(std::hypot(u1 - u0, v1 - v0) / spacing)) + 1);
    for (int i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / (n - 1);
      const geom::Vec2 p = world(u0 + t * (u1 - u0), v0 + t * (v1 - v0));
      for (double z : {0.4, 0.9, 1.4}) {
        const double nx = noise > 0 ? rng.normal(0.0, noise) : 0.0, ny = noise > 0 ? rng.normal(0.0, noise) : 0.0;
        out.push_back({p.x + nx, p.y + ny, z});
      }
    }
  };
  side(su * hl, sv * hw, -su * hl, sv * hw);  // along the length
  side(su * hl, sv * hw, su * hl, -sv * hw);  // along the width
  return out;
}

// Yaw difference folded into [0, 45] degrees (rectangles repeat every 90).
inline double yaw_error_mod90_deg(double a, double b) {
  double d = std::fmod(std::abs(a - b) * 180.0 / std::numbers::pi, 90.0);
  return std::min(d, 90.0 - d);
}

}  // namespace spl::testing
