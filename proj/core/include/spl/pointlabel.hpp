// Per-object point sets and 3D point pseudo labels from instance masks plus
// LiDAR geometry.
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "spl/common.hpp"
#include "spl/geom.hpp"
#include "spl/ingest.hpp"

namespace spl::pointlabel {

struct ClassGeometry {
  double h_min = 1.0;
  double h_max = 2.0;
  double dbscan_eps = 0.5;
  int dbscan_min_samples = 4;
  double r1 = 0.25;
  double r2 = 1.0;
  int min_points_for_box = 30;
  geom::Vec3 min_size;  // (l, w, h)
  geom::Vec3 avg_size;
  geom::Vec3 max_size;

  bool is_valid() const;
};

struct ClassGeometryConfig {
  std::array<ClassGeometry, kNumClasses> per_class;

  const ClassGeometry& operator[](ObjectClass c) const { return per_class[static_cast<std::size_t>(class_index(c))]; }
  ClassGeometry& operator[](ObjectClass c) { return per_class[static_cast<std::size_t>(class_index(c))]; }
};

ClassGeometryConfig default_class_geometry();

struct ObjectPoints {
  int track_id = 0;
  ObjectClass cls = ObjectClass::Vehicle;
  int frame_id = 0;
  std::vector<std::size_t> point_indices;  // into the frame's nonground cloud
  geom::Vec3 centroid;
};

struct PointLabel {
  geom::Vec3 position;
  ObjectClass cls = ObjectClass::Vehicle;
  int track_id = 0;
  int frame_id = 0;
  int num_points = 0;
};

// Uniform hash grid over a fixed point set for radius queries.
class SpatialIndex {
 public:
  SpatialIndex(std::span<const geom::Vec3> points, double cell);

  // Indices of points within `radius` (inclusive) of q, ascending.
  void radius_search(const geom::Vec3& q, double radius, std::vector<std::size_t>& out) const;
  std::span<const geom::Vec3> points() const { return points_; }

 private:
  std::int64_t key(std::int64_t ix, std::int64_t iy, std::int64_t iz) const;
  std::span<const geom::Vec3> points_;
  double cell_;
  std::unordered_map<std::int64_t, std::vector<std::size_t>> cells_;
};

// Indices of points whose projection falls inside the mask dilated by a
// square structuring element of radius dilate_px.
std::vector<std::size_t> associate_points(std::span<const geom::Projection> projections,
                                          const ingest::Detection2D& det, int dilate_px);
std::vector<std::size_t> associate_points(const geom::PointCloud& cloud, const geom::CameraModel& cam,
                                          const ingest::Detection2D& det, int dilate_px);

struct DepthRange {
  double d_min = 0.0;
  double d_max = 0.0;
};

// [fy * h_min / h_i, fy * h_max / h_i]. Throws InvalidPixelHeight for h_i <= 0.
DepthRange depth_range(const ClassGeometry& cfg, double pixel_height, double fy);
// Keeps candidates whose camera depth lies in the closed depth range.
std::vector<std::size_t> depth_filter(std::span<const std::size_t> candidates,
                                      std::span<const geom::Projection> projections, const ClassGeometry& cfg,
                                      double pixel_height, double fy);

inline constexpr int kNoise = -1;

// DBSCAN with Euclidean 3D distance. A point is core when at least
// min_samples points, itself included, lie within eps. Clusters are numbered
// in order of their lowest-index core point; a border point joins the first
// cluster that reaches it.
std::vector<int> dbscan(std::span<const geom::Vec3> points, double eps, int min_samples);

struct SubclusterScore {
  int label = 0;
  std::size_t size = 0;
  double in_mask_fraction = 0.0;
  double score = 0.0;
};

// Per-cluster fitting scores: in-mask fraction plus size relative to the
// largest cluster. `projections` are aligned with `labels`.
std::vector<SubclusterScore> subcluster_scores(std::span<const int> labels,
                                               std::span<const geom::Projection> projections,
                                               const ingest::BinaryMask& mask);
// Highest score; ties go to the larger cluster, then the lower label.
// Throws NoValidCluster when every point is noise.
int select_subcluster(std::span<const int> labels, std::span<const geom::Projection> projections,
                      const ingest::BinaryMask& mask);

// Grows `seed` with points within r1 of the current set and within r2 of the
// seed centroid until nothing changes. Result is sorted and contains seed.
std::vector<std::size_t> recover_missing(std::span<const std::size_t> seed, const SpatialIndex& index, double r1,
                                         double r2);

// Points claimed by several sets go to the majority owner among their k
// nearest uniquely-claimed points (restricted to the point's claimants);
// ties go to the nearest such voter; without voters the first claimant keeps
// it. Output sets are pairwise disjoint and sorted.
std::vector<std::vector<std::size_t>> resolve_conflicts(const std::vector<std::vector<std::size_t>>& sets,
                                                        std::span<const geom::Vec3> points, int k);

// Throws EmptyObject for an empty set.
PointLabel make_point_label(const ObjectPoints& obj, std::span<const geom::Vec3> points);
geom::Vec3 centroid(std::span<const std::size_t> indices, std::span<const geom::Vec3> points);

struct PointLabelParams {
  int dilate_px = 2;
  int knn_k = 5;
  // Subcluster selection, missing-point recovery and conflict voting.
  bool refine = true;
};

// Runs association, depth gating and (optionally) the three refinement steps
// for every detection of a frame. Objects that end up empty are dropped.
std::vector<ObjectPoints> extract_objects(const geom::PointCloud& nonground, const geom::CameraModel& cam,
                                          const std::vector<ingest::Detection2D>& detections,
                                          const ClassGeometryConfig& cfg, const PointLabelParams& params);

}  // namespace spl::pointlabel
