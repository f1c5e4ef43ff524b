#include "spl/pointlabel.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace spl::pointlabel {

bool ClassGeometry::is_valid() const {
  auto le = [](const geom::Vec3& a, const geom::Vec3& b) { return a.x <= b.x && a.y <= b.y && a.z <= b.z; };
  return h_min < h_max && r1 < r2 && dbscan_eps > 0.0 && dbscan_min_samples >= 1 && min_points_for_box >= 1 &&
         le(min_size, avg_size) && le(avg_size, max_size) && min_size.x > 0.0 && min_size.y > 0.0 &&
         min_size.z > 0.0;
}

ClassGeometryConfig default_class_geometry() {
  ClassGeometryConfig cfg;
  cfg[ObjectClass::Vehicle] = {1.2, 4.5, 0.5, 4, 0.25, 1.0, 30, {3.2, 1.5, 1.3}, {4.5, 1.8, 1.6}, {6.5, 2.6, 2.8}};
  cfg[ObjectClass::Pedestrian] = {1.4, 2.1, 0.3, 4, 0.15, 0.6, 10, {0.4, 0.4, 1.4}, {0.7, 0.7, 1.75}, {1.0, 1.0, 2.1}};
  cfg[ObjectClass::Cyclist] = {1.2, 2.2, 0.3, 4, 0.15, 0.6, 10, {1.2, 0.4, 1.2}, {1.8, 0.6, 1.7}, {2.4, 1.0, 2.2}};
  return cfg;
}

namespace {

bool projects_into(const geom::Projection& p, const ingest::BinaryMask& mask) {
  if (!p.in_image) return false;
  return mask.at(static_cast<int>(std::floor(p.u)), static_cast<int>(std::floor(p.v)));
}

}  // namespace

std::vector<std::size_t> associate_points(std::span<const geom::Projection> projections,
                                          const ingest::Detection2D& det, int dilate_px) {
  const ingest::BinaryMask mask = dilate_px > 0 ? det.mask.dilated(dilate_px) : det.mask;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < projections.size(); ++i) {
    if (projects_into(projections[i], mask)) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> associate_points(const geom::PointCloud& cloud, const geom::CameraModel& cam,
                                          const ingest::Detection2D& det, int dilate_px) {
  const auto proj = geom::project_points(cloud, cam);
  return associate_points(proj, det, dilate_px);
}

DepthRange depth_range(const ClassGeometry& cfg, double pixel_height, double fy) {
  if (!(pixel_height > 0.0)) throw Error(ErrorCode::InvalidPixelHeight, "pixel height must be positive");
  if (!(fy > 0.0)) throw Error(ErrorCode::InvalidArgument, "fy must be positive");
  return {fy * cfg.h_min / pixel_height, fy * cfg.h_max / pixel_height};
}

std::vector<std::size_t> depth_filter(std::span<const std::size_t> candidates,
                                      std::span<const geom::Projection> projections, const ClassGeometry& cfg,
                                      double pixel_height, double fy) {
  const DepthRange range = depth_range(cfg, pixel_height, fy);
  std::vector<std::size_t> out;
  for (std::size_t i : candidates) {
    const double d = projections[i].depth;
    if (d > 0.0 && d >= range.d_min && d <= range.d_max) out.push_back(i);
  }
  return out;
}

std::vector<SubclusterScore> subcluster_scores(std::span<const int> labels,
                                               std::span<const geom::Projection> projections,
                                               const ingest::BinaryMask& mask) {
  std::map<int, std::pair<std::size_t, std::size_t>> stats;  // label -> (size, in mask)
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kNoise) continue;
    auto& s = stats[labels[i]];
    ++s.first;
    if (projects_into(projections[i], mask)) ++s.second;
  }
  std::size_t largest = 0;
  for (const auto& [label, s] : stats) largest = std::max(largest, s.first);
  std::vector<SubclusterScore> out;
  for (const auto& [label, s] : stats) {
    SubclusterScore sc;
    sc.label = label;
    sc.size = s.first;
    sc.in_mask_fraction = static_cast<double>(s.second) / static_cast<double>(s.first);
    sc.score = sc.in_mask_fraction + static_cast<double>(s.first) / static_cast<double>(largest);
    out.push_back(sc);
  }
  return out;
}

int select_subcluster(std::span<const int> labels, std::span<const geom::Projection> projections,
                      const ingest::BinaryMask& mask) {
  const auto scores = subcluster_scores(labels, projections, mask);
  if (scores.empty()) throw Error(ErrorCode::NoValidCluster, "all points are noise");
  const SubclusterScore* best = &scores.front();
  for (const auto& s : scores) {
    if (s.score > best->score || (s.score == best->score && s.size > best->size)) best = &s;
  }
  return best->label;
}

geom::Vec3 centroid(std::span<const std::size_t> indices, std::span<const geom::Vec3> points) {
  geom::Vec3 c;
  for (std::size_t i : indices) c += points[i];
  if (!indices.empty()) c *= 1.0 / static_cast<double>(indices.size());
  return c;
}

std::vector<std::size_t> recover_missing(std::span<const std::size_t> seed, const SpatialIndex& index, double r1,
                                         double r2) {
  const auto points = index.points();
  std::vector<std::size_t> result(seed.begin(), seed.end());
  if (seed.empty()) return result;
  const geom::Vec3 c0 = centroid(seed, points);
  const double r2sq = r2 * r2;
  std::vector<char> member(points.size(), 0);
  for (std::size_t i : seed) member[i] = 1;

  std::vector<std::size_t> frontier(seed.begin(), seed.end());
  std::vector<std::size_t> found;
  while (!frontier.empty()) {
    std::vector<std::size_t> next;
    for (std::size_t p : frontier) {
      index.radius_search(points[p], r1, found);
      for (std::size_t q : found) {
        if (member[q] || geom::squared_distance(points[q], c0) > r2sq) continue;
        member[q] = 1;
        next.push_back(q);
        result.push_back(q);
      }
    }
    frontier.swap(next);
  }
  std::sort(result.begin(), result.end());
  result.erase(std::unique(result.begin(), result.end()), result.end());
  return result;
}

std::vector<std::vector<std::size_t>> resolve_conflicts(const std::vector<std::vector<std::size_t>>& sets,
                                                        std::span<const geom::Vec3> points, int k) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "knn k must be >= 1");
  // Claimants per point, in set order.
  std::map<std::size_t, std::vector<int>> claims;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    for (std::size_t i : sets[s]) {
      auto& c = claims[i];
      if (c.empty() || c.back() != static_cast<int>(s)) c.push_back(static_cast<int>(s));
    }
  }

  std::vector<std::vector<std::size_t>> unique_pts(sets.size());
  for (const auto& [i, owners] : claims) {
    if (owners.size() == 1) unique_pts[static_cast<std::size_t>(owners[0])].push_back(i);
  }

  std::vector<std::vector<std::size_t>> out = unique_pts;
  std::vector<std::pair<double, int>> voters;
  for (const auto& [i, owners] : claims) {
    if (owners.size() < 2) continue;
    voters.clear();
    for (int s : owners) {
      for (std::size_t j : unique_pts[static_cast<std::size_t>(s)]) {
        voters.emplace_back(geom::squared_distance(points[i], points[j]), s);
      }
    }
    int winner = owners.front();
    if (!voters.empty()) {
      const std::size_t kk = std::min(voters.size(), static_cast<std::size_t>(k));
      std::partial_sort(voters.begin(), voters.begin() + static_cast<std::ptrdiff_t>(kk), voters.end());
      std::map<int, int> votes;
      for (std::size_t v = 0; v < kk; ++v) ++votes[voters[v].second];
      int best_count = 0;
      for (const auto& [s, n] : votes) best_count = std::max(best_count, n);
      int tied = 0;
      for (const auto& [s, n] : votes) {
        if (n == best_count) {
          ++tied;
          winner = s;
        }
      }
      if (tied > 1) {
        // Nearest voter among the tied owners.
        for (std::size_t v = 0; v < kk; ++v) {
          if (votes[voters[v].second] == best_count) {
            winner = voters[v].second;
            break;
          }
        }
      }
    }
    out[static_cast<std::size_t>(winner)].push_back(i);
  }
  for (auto& s : out) std::sort(s.begin(), s.end());
  return out;
}

PointLabel make_point_label(const ObjectPoints& obj, std::span<const geom::Vec3> points) {
  if (obj.point_indices.empty()) throw Error(ErrorCode::EmptyObject, "object has no points");
  PointLabel label;
  label.position = centroid(obj.point_indices, points);
  label.cls = obj.cls;
  label.track_id = obj.track_id;
  label.frame_id = obj.frame_id;
  label.num_points = static_cast<int>(obj.point_indices.size());
  return label;
}

std::vector<ObjectPoints> extract_objects(const geom::PointCloud& nonground, const geom::CameraModel& cam,
                                          const std::vector<ingest::Detection2D>& detections,
                                          const ClassGeometryConfig& cfg, const PointLabelParams& params) {
  const auto positions = nonground.positions();
  const auto projections = geom::project_points(nonground, cam);

  std::map<double, SpatialIndex> indices;  // keyed by r1
  std::vector<std::vector<std::size_t>> sets;
  sets.reserve(detections.size());
  for (const auto& det : detections) {
    const ClassGeometry& g = cfg[det.cls];
    std::vector<std::size_t> pts = associate_points(projections, det, params.dilate_px);
    const double pixel_height = det.rect.height();
    if (pixel_height > 0.0) {
      pts = depth_filter(pts, projections, g, pixel_height, cam.fy);
    } else {
      pts.clear();
    }
    if (params.refine && !pts.empty()) {
      std::vector<geom::Vec3> sub(pts.size());
      std::vector<geom::Projection> sub_proj(pts.size());
      for (std::size_t j = 0; j < pts.size(); ++j) {
        sub[j] = positions[pts[j]];
        sub_proj[j] = projections[pts[j]];
      }
      const auto labels = dbscan(sub, g.dbscan_eps, g.dbscan_min_samples);
      if (std::all_of(labels.begin(), labels.end(), [](int l) { return l == kNoise; })) {
        pts.clear();
      } else {
        const int chosen = select_subcluster(labels, sub_proj, det.mask);
        std::vector<std::size_t> seed;
        for (std::size_t j = 0; j < pts.size(); ++j) {
          if (labels[j] == chosen) seed.push_back(pts[j]);
        }
        auto it = indices.find(g.r1);
        if (it == indices.end()) it = indices.emplace(g.r1, SpatialIndex(positions, g.r1)).first;
        pts = recover_missing(seed, it->second, g.r1, g.r2);
      }
    }
    sets.push_back(std::move(pts));
  }
  if (params.refine) sets = resolve_conflicts(sets, positions, params.knn_k);

  std::vector<ObjectPoints> out;
  for (std::size_t d = 0; d < detections.size(); ++d) {
    if (sets[d].empty()) continue;
    ObjectPoints obj;
    obj.track_id = detections[d].track_id;
    obj.cls = detections[d].cls;
    obj.frame_id = detections[d].frame_id;
    obj.point_indices = std::move(sets[d]);
    obj.centroid = centroid(obj.point_indices, positions);
    out.push_back(std::move(obj));
  }
  return out;
}

}  // namespace spl::pointlabel
