// 3D box pseudo labels: L-shape fitting, ground snapping, size and surface
// proximity filters, track velocities, temporal refinement and the split into
// trusted supervision versus pseudo labels.
#pragma once

#include <optional>
#include <set>
#include <span>
#include <vector>

#include "spl/common.hpp"
#include "spl/geom.hpp"
#include "spl/ingest.hpp"
#include "spl/pointlabel.hpp"

namespace spl::boxlabel {

enum class BoxSource { Fitted, Refined };

struct BoxLabel {
  geom::Box3D box;
  ObjectClass cls = ObjectClass::Vehicle;
  int track_id = 0;
  int frame_id = 0;
  std::optional<geom::Vec3> velocity;  // sensor frame of frame_id, m/s
  std::optional<double> spr;           // vehicles only
  BoxSource source = BoxSource::Fitted;
};

struct LabelSet {
  std::vector<BoxLabel> gt_supervision;
  std::vector<BoxLabel> pseudo_boxes;
  std::vector<pointlabel::PointLabel> pseudo_points;
};

struct LShapeParams {
  double step_deg = 1.0;
  double min_edge_dist = 0.01;
  // Extra passes at step/10, step/100, ... around the best angle.
  int refine_levels = 2;
  // Place the better-populated edge of each axis at the median of its points
  // instead of the extreme point, so range noise does not inflate the box.
  bool median_edges = true;
};

// Closeness-criterion L-shape fit. The result has l >= w and yaw in [0, pi);
// z extent comes from the points. Throws TooFewPoints below min_points (and
// for fewer than 3 points).
geom::Box3D fit_lshape(std::span<const geom::Vec3> points, int min_points = 3, const LShapeParams& params = {});
// Closeness score of one orientation (exposed for tests and benchmarks).
double lshape_closeness(std::span<const geom::Vec3> points, double theta, double min_edge_dist);
// Minimal BEV rectangle of the points at a fixed yaw, z extent from points.
geom::Box3D min_rect_at_yaw(std::span<const geom::Vec3> points, double yaw);

geom::Box3D ground_snap(const geom::Box3D& box, const ingest::GroundModel& ground);

// Swaps l and w (turning yaw by +90 degrees) when w > l.
geom::Box3D canonical_lw(const geom::Box3D& box);
bool size_filter(const geom::Box3D& box, const pointlabel::ClassGeometry& cfg);

// Fraction of points within d_surf of the nearest BEV side plane, counting
// only points inside the box's z extent (padded by d_surf). Throws EmptyObject.
double spr(const geom::Box3D& box, std::span<const geom::Vec3> points, double d_surf);

struct TrackEntry {
  int frame_id = 0;
  double timestamp = 0.0;
  geom::Vec3 centroid;  // any common frame; velocities come out in the same frame
};

struct TrackHistory {
  int track_id = 0;
  ObjectClass cls = ObjectClass::Vehicle;
  std::vector<TrackEntry> entries;
};

// Time-weighted central differences inside, one-sided at the ends. Throws
// TrackTooShort below 2 entries, InvalidArgument for non-increasing time.
std::vector<geom::Vec3> track_velocity(const TrackHistory& track);

struct TemporalParams {
  double v_still = 0.5;
  bool align_pedestrian_yaw = true;
  bool flip_against_velocity = true;
  bool vehicle_max_dims = true;
  bool drop_static_cyclists = true;
};

struct RefineInput {
  BoxLabel label;  // velocity must be set
  // Object points in the label's frame, used by the pedestrian refit.
  std::vector<geom::Vec3> points;
};

// Applies the four temporal rules to one track (entries sorted by frame).
// Returns an empty vector when the track is dropped.
std::vector<BoxLabel> refine_temporal(const std::vector<RefineInput>& track, const TemporalParams& params);

// Speed at or above v_dyn on at least min_consecutive consecutive entries.
bool is_dynamic(std::span<const double> speeds, double v_dyn, int min_consecutive = 2);

// Image-space AABB of the projected box corners clipped to the image; empty
// when any corner lies behind the camera.
std::optional<geom::Rect2D> projected_rect(const geom::Box3D& box, const geom::CameraModel& cam);

struct SplitParams {
  double align_iou = 0.4;
  double overlap_iou = 0.1;
};

// Splits one frame's labels. In unsupervised mode (annotations == nullptr)
// boxes aligned with their detection mask and on a dynamic track become
// supervision. With annotations, those are the supervision and every
// generated label is pseudo. Pseudo labels overlapping supervision are
// dropped; point labels count as class-min-size boxes, and also overlap when
// they lie inside a supervision box footprint.
LabelSet split_labels(const std::vector<BoxLabel>& boxes, const std::vector<pointlabel::PointLabel>& points,
                      const std::vector<ingest::Detection2D>& detections, const geom::CameraModel& cam,
                      const std::set<int>& dynamic_tracks, const pointlabel::ClassGeometryConfig& geometry,
                      const SplitParams& params, const std::vector<BoxLabel>* annotations = nullptr);

}  // namespace spl::boxlabel
