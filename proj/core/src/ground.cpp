#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

#include "spl/ingest.hpp"

namespace spl::ingest {

double GroundModel::height_at(double x, double y) const {
  const int ix = static_cast<int>(std::floor((x - x0) / cell));
  const int iy = static_cast<int>(std::floor((y - y0) / cell));
  if (ix >= 0 && iy >= 0 && ix < nx && iy < ny) {
    const double h = heights[static_cast<std::size_t>(iy) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(ix)];
    if (!std::isnan(h)) return h;
  }
  return plane_z(x, y);
}

namespace {

struct Plane {
  Eigen::Vector3d n;
  double d;
};

std::optional<Plane> plane_from_points(const geom::Vec3& p0, const geom::Vec3& p1, const geom::Vec3& p2) {
  const geom::Vec3 n = geom::cross(p1 - p0, p2 - p0);
  const double len = geom::norm(n);
  if (len < 1e-9) return std::nullopt;
  Eigen::Vector3d nn(n.x / len, n.y / len, n.z / len);
  if (nn.z() < 0) nn = -nn;
  return Plane{nn, -(nn.x() * p0.x + nn.y() * p0.y + nn.z() * p0.z)};
}

Plane least_squares_plane(const std::vector<geom::Vec3>& pts) {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : pts) mean += Eigen::Vector3d(p.x, p.y, p.z);
  mean /= static_cast<double>(pts.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : pts) {
    const Eigen::Vector3d q = Eigen::Vector3d(p.x, p.y, p.z) - mean;
    cov += q * q.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  Eigen::Vector3d n = es.eigenvectors().col(0);
  if (n.z() < 0) n = -n;
  return {n, -n.dot(mean)};
}

}  // namespace

GroundSplit remove_ground(const geom::PointCloud& cloud, const GroundParams& params) {
  if (cloud.size() < 50) throw Error(ErrorCode::InvalidArgument, "ground removal needs at least 50 points");

  std::vector<double> zs;
  zs.reserve(cloud.size());
  for (const auto& p : cloud.points) zs.push_back(p.z);
  const auto q_idx = static_cast<std::size_t>(params.low_quantile * static_cast<double>(zs.size() - 1));
  std::nth_element(zs.begin(), zs.begin() + static_cast<std::ptrdiff_t>(q_idx), zs.end());
  const double z_cut = zs[q_idx] + params.candidate_band;

  std::vector<geom::Vec3> candidates;
  for (const auto& p : cloud.points) {
    if (p.z <= z_cut) candidates.push_back(p.pos());
  }
  if (candidates.size() < 3) throw Error(ErrorCode::GroundFitFailed, "not enough low points");

  Rng rng(params.seed);
  std::vector<geom::Vec3> scoring;
  if (candidates.size() <= params.score_sample) {
    scoring = candidates;
  } else {
    scoring.reserve(params.score_sample);
    for (std::size_t i = 0; i < params.score_sample; ++i) scoring.push_back(candidates[rng.below(candidates.size())]);
  }

  const double min_nz = std::cos(params.max_tilt_deg * std::numbers::pi / 180.0);
  std::optional<Plane> best;
  std::size_t best_count = 0;
  for (int it = 0; it < params.iterations; ++it) {
    const auto& p0 = candidates[rng.below(candidates.size())];
    const auto& p1 = candidates[rng.below(candidates.size())];
    const auto& p2 = candidates[rng.below(candidates.size())];
    auto plane = plane_from_points(p0, p1, p2);
    if (!plane || plane->n.z() < min_nz) continue;
    std::size_t count = 0;
    for (const auto& p : scoring) {
      if (std::abs(plane->n.x() * p.x + plane->n.y() * p.y + plane->n.z() * p.z + plane->d) <= params.inlier_dist) ++count;
    }
    if (count > best_count) {
      best_count = count;
      best = plane;
    }
  }
  if (!best) throw Error(ErrorCode::GroundFitFailed, "no admissible plane hypothesis");

  // Refit on the inliers of the best hypothesis.
  std::vector<geom::Vec3> inliers;
  for (const auto& p : candidates) {
    if (std::abs(best->n.x() * p.x + best->n.y() * p.y + best->n.z() * p.z + best->d) <= params.inlier_dist) inliers.push_back(p);
  }
  Plane plane = inliers.size() >= 3 ? least_squares_plane(inliers) : *best;
  if (plane.n.z() < min_nz) plane = *best;

  GroundSplit out;
  out.model.a = plane.n.x();
  out.model.b = plane.n.y();
  out.model.c = plane.n.z();
  out.model.d = plane.d;
  out.nonground.frame_id = cloud.frame_id;

  double xmin = std::numeric_limits<double>::max(), ymin = xmin;
  double xmax = std::numeric_limits<double>::lowest(), ymax = xmax;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    if (out.model.signed_distance(p.pos()) <= params.inlier_dist) {
      out.ground_indices.push_back(i);
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
    } else {
      out.nonground_indices.push_back(i);
      out.nonground.points.push_back(p);
    }
  }
  const double ratio = static_cast<double>(out.ground_indices.size()) / static_cast<double>(cloud.size());
  if (ratio < params.min_inlier_ratio) {
    throw Error(ErrorCode::GroundFitFailed, "inlier ratio " + std::to_string(ratio) + " below threshold");
  }

  // Height grid from points within the inlier band.
  auto& m = out.model;
  m.cell = params.cell;
  m.x0 = std::floor(xmin / m.cell) * m.cell;
  m.y0 = std::floor(ymin / m.cell) * m.cell;
  m.nx = static_cast<int>(std::floor((xmax - m.x0) / m.cell)) + 1;
  m.ny = static_cast<int>(std::floor((ymax - m.y0) / m.cell)) + 1;
  std::vector<double> sum(static_cast<std::size_t>(m.nx) * static_cast<std::size_t>(m.ny), 0.0);
  std::vector<int> cnt(sum.size(), 0);
  for (std::size_t i : out.ground_indices) {
    const auto& p = cloud.points[i];
    if (std::abs(m.signed_distance(p.pos())) > params.inlier_dist) continue;
    const int ix = static_cast<int>(std::floor((p.x - m.x0) / m.cell));
    const int iy = static_cast<int>(std::floor((p.y - m.y0) / m.cell));
    const auto k = static_cast<std::size_t>(iy) * static_cast<std::size_t>(m.nx) + static_cast<std::size_t>(ix);
    sum[k] += p.z;
    ++cnt[k];
  }
  m.heights.assign(sum.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t k = 0; k < sum.size(); ++k) {
    if (cnt[k] > 0) m.heights[k] = sum[k] / cnt[k];
  }
  return out;
}

}  // namespace spl::ingest
