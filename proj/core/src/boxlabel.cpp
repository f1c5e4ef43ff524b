#include "spl/boxlabel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace spl::boxlabel {

geom::Box3D ground_snap(const geom::Box3D& box, const ingest::GroundModel& ground) {
  geom::Box3D out = box;
  out.cz = ground.height_at(box.cx, box.cy) + 0.5 * box.h;
  return out;
}

bool size_filter(const geom::Box3D& box, const pointlabel::ClassGeometry& cfg) {
  const geom::Box3D b = canonical_lw(box);
  auto within = [](double v, double lo, double hi) { return v >= 0.8 * lo && v <= 1.2 * hi; };
  return within(b.l, cfg.min_size.x, cfg.max_size.x) && within(b.w, cfg.min_size.y, cfg.max_size.y) &&
         within(b.h, cfg.min_size.z, cfg.max_size.z);
}

double spr(const geom::Box3D& box, std::span<const geom::Vec3> points, double d_surf) {
  if (points.empty()) throw Error(ErrorCode::EmptyObject, "surface proximity ratio of an empty point set");
  const double hl = 0.5 * box.l, hw = 0.5 * box.w;
  const double zlo = box.z_min() - d_surf, zhi = box.z_max() + d_surf;
  std::size_t close = 0;
  for (const auto& p : points) {
    if (p.z < zlo || p.z > zhi) continue;
    const geom::Vec3 q = geom::to_box_frame(box, p);
    const double d = std::min(std::min(std::abs(q.x - hl), std::abs(q.x + hl)),
                              std::min(std::abs(q.y - hw), std::abs(q.y + hw)));
    if (d <= d_surf) ++close;
  }
  return static_cast<double>(close) / static_cast<double>(points.size());
}

std::vector<geom::Vec3> track_velocity(const TrackHistory& track) {
  const auto& e = track.entries;
  if (e.size() < 2) throw Error(ErrorCode::TrackTooShort, "track " + std::to_string(track.track_id) + " has fewer than 2 entries");
  for (std::size_t i = 1; i < e.size(); ++i) {
    if (!(e[i].timestamp > e[i - 1].timestamp)) {
      throw Error(ErrorCode::InvalidArgument, "track timestamps must be strictly increasing");
    }
  }
  const std::size_t n = e.size();
  std::vector<geom::Vec3> v(n);
  v[0] = (e[1].centroid - e[0].centroid) / (e[1].timestamp - e[0].timestamp);
  v[n - 1] = (e[n - 1].centroid - e[n - 2].centroid) / (e[n - 1].timestamp - e[n - 2].timestamp);
  for (std::size_t t = 1; t + 1 < n; ++t) {
    const double dt_prev = e[t].timestamp - e[t - 1].timestamp;
    const double dt_next = e[t + 1].timestamp - e[t].timestamp;
    const geom::Vec3 dp_prev = e[t].centroid - e[t - 1].centroid;
    const geom::Vec3 dp_next = e[t + 1].centroid - e[t].centroid;
    // Backward and forward velocities, each weighted by the opposite interval.
    // Exact for quadratic motion; equal intervals give the symmetric difference.
    v[t] = (dp_prev * (dt_next / dt_prev) + dp_next * (dt_prev / dt_next)) / (dt_prev + dt_next);
  }
  return v;
}

namespace {

double bev_speed(const BoxLabel& b) {
  if (!b.velocity) return 0.0;
  return std::hypot(b.velocity->x, b.velocity->y);
}

}  // namespace

std::vector<BoxLabel> refine_temporal(const std::vector<RefineInput>& track, const TemporalParams& params) {
  std::vector<BoxLabel> out;
  out.reserve(track.size());
  for (const auto& in : track) out.push_back(in.label);
  if (out.empty()) return out;
  const ObjectClass cls = out.front().cls;

  double max_speed = 0.0;
  for (const auto& b : out) max_speed = std::max(max_speed, bev_speed(b));
  if (params.drop_static_cyclists && cls == ObjectClass::Cyclist && max_speed <= params.v_still) return {};

  for (std::size_t i = 0; i < out.size(); ++i) {
    BoxLabel& b = out[i];
    const double speed = bev_speed(b);
    if (speed <= params.v_still) continue;
    const double heading = std::atan2(b.velocity->y, b.velocity->x);
    if (cls == ObjectClass::Pedestrian && params.align_pedestrian_yaw) {
      const auto& pts = track[i].points;
      if (!pts.empty()) {
        const double bottom = b.box.z_min(), h = b.box.h;
        b.box = min_rect_at_yaw(pts, heading);
        b.box.h = h;
        b.box.cz = bottom + 0.5 * h;
      }
      b.box.yaw = geom::normalize_angle(heading);
      b.source = BoxSource::Refined;
    } else if (cls != ObjectClass::Pedestrian && params.flip_against_velocity) {
      if (std::abs(geom::normalize_angle(b.box.yaw - heading)) > std::numbers::pi / 2.0) {
        b.box.yaw = geom::normalize_angle(b.box.yaw + std::numbers::pi);
        b.source = BoxSource::Refined;
      }
    }
  }

  if (cls == ObjectClass::Vehicle && params.vehicle_max_dims) {
    double L = 0.0, W = 0.0, H = 0.0;
    for (const auto& b : out) {
      L = std::max(L, b.box.l);
      W = std::max(W, b.box.w);
      H = std::max(H, b.box.h);
    }
    for (auto& b : out) {
      if (b.box.l == L && b.box.w == W && b.box.h == H) continue;
      // Keep the BEV corner nearest the sensor fixed and grow away from it.
      const auto corners = geom::bev_corners(b.box);
      std::size_t near = 0;
      for (std::size_t k = 1; k < 4; ++k) {
        if (std::hypot(corners[k].x, corners[k].y) < std::hypot(corners[near].x, corners[near].y)) near = k;
      }
      const geom::Vec3 local = geom::to_box_frame(b.box, {corners[near].x, corners[near].y, b.box.cz});
      const double sx = local.x >= 0.0 ? 1.0 : -1.0, sy = local.y >= 0.0 ? 1.0 : -1.0;
      const double c = std::cos(b.box.yaw), s = std::sin(b.box.yaw);
      const double ox = sx * 0.5 * L, oy = sy * 0.5 * W;
      const double bottom = b.box.z_min();
      b.box.cx = corners[near].x - (ox * c - oy * s);
      b.box.cy = corners[near].y - (ox * s + oy * c);
      b.box.l = L;
      b.box.w = W;
      b.box.h = H;
      b.box.cz = bottom + 0.5 * H;
      b.source = BoxSource::Refined;
    }
  }
  return out;
}

bool is_dynamic(std::span<const double> speeds, double v_dyn, int min_consecutive) {
  int run = 0;
  for (double s : speeds) {
    run = s >= v_dyn ? run + 1 : 0;
    if (run >= min_consecutive) return true;
  }
  return false;
}

std::optional<geom::Rect2D> projected_rect(const geom::Box3D& box, const geom::CameraModel& cam) {
  geom::Rect2D r{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                 -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& c : geom::box3d_corners(box)) {
    const auto p = geom::project_point(c, cam);
    if (p.depth <= 0.0) return std::nullopt;
    r.x_min = std::min(r.x_min, p.u);
    r.y_min = std::min(r.y_min, p.v);
    r.x_max = std::max(r.x_max, p.u);
    r.y_max = std::max(r.y_max, p.v);
  }
  r.x_min = std::clamp(r.x_min, 0.0, static_cast<double>(cam.image_w));
  r.x_max = std::clamp(r.x_max, 0.0, static_cast<double>(cam.image_w));
  r.y_min = std::clamp(r.y_min, 0.0, static_cast<double>(cam.image_h));
  r.y_max = std::clamp(r.y_max, 0.0, static_cast<double>(cam.image_h));
  return r;
}

namespace {

bool overlaps_any(const geom::Box3D& box, const std::vector<BoxLabel>& sup, double thr) {
  return std::any_of(sup.begin(), sup.end(), [&](const BoxLabel& s) { return geom::iou_bev(box, s.box) > thr; });
}

bool inside_footprint(const geom::Vec3& p, const geom::Box3D& box) {
  const geom::Vec3 q = geom::to_box_frame(box, p);
  return std::abs(q.x) <= 0.5 * box.l && std::abs(q.y) <= 0.5 * box.w;
}

}  // namespace

LabelSet split_labels(const std::vector<BoxLabel>& boxes, const std::vector<pointlabel::PointLabel>& points,
                      const std::vector<ingest::Detection2D>& detections, const geom::CameraModel& cam,
                      const std::set<int>& dynamic_tracks, const pointlabel::ClassGeometryConfig& geometry,
                      const SplitParams& params, const std::vector<BoxLabel>* annotations) {
  LabelSet out;
  std::vector<const BoxLabel*> rest;
  if (annotations) {
    out.gt_supervision = *annotations;
    for (const auto& b : boxes) rest.push_back(&b);
  } else {
    for (const auto& b : boxes) {
      bool promote = false;
      if (dynamic_tracks.count(b.track_id)) {
        const auto det = std::find_if(detections.begin(), detections.end(), [&](const ingest::Detection2D& d) {
          return d.track_id == b.track_id && d.frame_id == b.frame_id;
        });
        const auto rect = projected_rect(b.box, cam);
        if (det != detections.end() && rect) {
          promote = geom::iou_rect2d(*rect, det->mask.bounds()) >= params.align_iou;
        }
      }
      if (promote) {
        out.gt_supervision.push_back(b);
      } else {
        rest.push_back(&b);
      }
    }
  }
  for (const BoxLabel* b : rest) {
    if (!overlaps_any(b->box, out.gt_supervision, params.overlap_iou)) out.pseudo_boxes.push_back(*b);
  }
  for (const auto& p : points) {
    const auto& size = geometry[p.cls].min_size;
    const geom::Box3D pb{p.position.x, p.position.y, p.position.z, size.x, size.y, size.z, 0.0};
    const bool covered = std::any_of(out.gt_supervision.begin(), out.gt_supervision.end(),
                                     [&](const BoxLabel& s) { return inside_footprint(p.position, s.box); });
    if (!covered && !overlaps_any(pb, out.gt_supervision, params.overlap_iou)) out.pseudo_points.push_back(p);
  }
  return out;
}

}  // namespace spl::boxlabel
