#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "spl/pipeline.hpp"

namespace spl::pipeline {

namespace {

struct Observation {
  std::size_t frame_idx = 0;
  pointlabel::PointLabel point;
  std::optional<boxlabel::BoxLabel> box;
  std::vector<geom::Vec3> points;  // sensor frame of frame_idx
  std::vector<double> time_offset;  // capture time of each point minus the frame's
};

struct Track {
  ObjectClass cls = ObjectClass::Vehicle;
  std::vector<Observation> obs;  // in frame order
};

// Centroid of the points captured in the observation's own frame. Points
// borrowed from neighbouring frames trail moving objects, and the trail is
// one-sided at the ends of the sequence.
geom::Vec3 own_centroid(const Observation& o) {
  geom::Vec3 sum;
  int n = 0;
  for (std::size_t k = 0; k < o.points.size(); ++k) {
    if (o.time_offset[k] != 0.0) continue;
    sum += o.points[k];
    ++n;
  }
  return n > 0 ? sum / static_cast<double>(n) : o.point.position;
}

std::optional<boxlabel::BoxLabel> fit_box(const Observation& o, ObjectClass cls, const ingest::GroundModel& ground,
                                          const LabelGenConfig& cfg) {
  const auto& g = cfg.geometry[cls];
  if (static_cast<int>(o.points.size()) < g.min_points_for_box) return std::nullopt;
  geom::Box3D box = boxlabel::fit_lshape(o.points, g.min_points_for_box, cfg.lshape);
  std::optional<double> ratio;
  if (cls == ObjectClass::Vehicle) ratio = boxlabel::spr(box, o.points, cfg.spr_distance);
  box = boxlabel::ground_snap(box, ground);
  if (!boxlabel::size_filter(box, g) || (ratio && *ratio < cfg.spr_threshold)) return std::nullopt;
  boxlabel::BoxLabel b;
  b.box = box;
  b.cls = cls;
  b.track_id = o.point.track_id;
  b.frame_id = o.point.frame_id;
  b.spr = ratio;
  return b;
}

}  // namespace

std::map<int, boxlabel::LabelSet> generate_labels(const std::vector<ingest::FrameBundle>& frames,
                                                  const LabelGenConfig& cfg,
                                                  const std::map<int, std::vector<boxlabel::BoxLabel>>* annotations,
                                                  LabelGenStats* stats) {
  LabelGenStats st;
  std::map<int, Track> tracks;
  std::vector<ingest::GroundModel> ground(frames.size());
  for (std::size_t fi = 0; fi < frames.size(); ++fi) {
    const auto& frame = frames[fi];
    if (frame.detections.empty()) continue;
    std::vector<std::size_t> source;
    const geom::PointCloud cloud = ingest::aggregate_frames(frames, fi, cfg.aggregation_window, &source);
    const ingest::GroundSplit split = ingest::remove_ground(cloud, cfg.ground);
    ground[fi] = split.model;
    const auto positions = split.nonground.positions();
    const auto objects =
        pointlabel::extract_objects(split.nonground, frame.camera, frame.detections, cfg.geometry, cfg.points);
    for (const auto& obj : objects) {
      ++st.objects;
      Observation o;
      o.frame_idx = fi;
      o.point = pointlabel::make_point_label(obj, positions);
      o.point.frame_id = frame.frame_id;
      o.points.reserve(obj.point_indices.size());
      for (std::size_t i : obj.point_indices) {
        o.points.push_back(positions[i]);
        o.time_offset.push_back(frames[source[split.nonground_indices[i]]].timestamp - frame.timestamp);
      }
      auto& t = tracks[obj.track_id];
      t.cls = obj.cls;
      t.obs.push_back(std::move(o));
    }
  }

  std::map<int, std::vector<boxlabel::BoxLabel>> boxes_by_frame;
  std::map<int, std::vector<pointlabel::PointLabel>> points_by_frame;
  std::set<int> dynamic_tracks;
  for (auto& [track_id, track] : tracks) {
    // Velocities in the world frame, then rotated into each sensor frame.
    std::vector<geom::Vec3> vel(track.obs.size());
    if (track.obs.size() >= 2) {
      boxlabel::TrackHistory hist;
      hist.track_id = track_id;
      hist.cls = track.cls;
      for (const auto& o : track.obs) {
        const auto& f = frames[o.frame_idx];
        hist.entries.push_back({f.frame_id, f.timestamp, f.pose.apply(own_centroid(o))});
      }
      const auto world = boxlabel::track_velocity(hist);
      for (std::size_t i = 0; i < vel.size(); ++i) {
        vel[i] = frames[track.obs[i].frame_idx].pose.rotation.transpose() * world[i];
      }
    }
    std::vector<double> speeds;
    double max_speed = 0.0;
    for (const auto& v : vel) {
      speeds.push_back(std::hypot(v.x, v.y));
      max_speed = std::max(max_speed, speeds.back());
    }
    if (boxlabel::is_dynamic(speeds, cfg.v_dyn, cfg.dyn_min_frames)) dynamic_tracks.insert(track_id);
    if (cfg.temporal_refine && cfg.temporal.drop_static_cyclists && track.cls == ObjectClass::Cyclist &&
        max_speed <= cfg.temporal.v_still) {
      ++st.dropped_tracks;
      continue;
    }

    for (std::size_t i = 0; i < track.obs.size(); ++i) {
      auto& o = track.obs[i];
      // Points captured in neighbouring frames trail a moving object; shift
      // them to the center frame's capture time.
      if (speeds[i] > cfg.temporal.v_still) {
        for (std::size_t k = 0; k < o.points.size(); ++k) o.points[k] -= vel[i] * o.time_offset[k];
      }
      o.box = fit_box(o, track.cls, ground[o.frame_idx], cfg);
    }

    std::vector<boxlabel::RefineInput> inputs;
    for (std::size_t i = 0; i < track.obs.size(); ++i) {
      auto& o = track.obs[i];
      if (o.box) {
        o.box->velocity = vel[i];
        inputs.push_back({*o.box, o.points});
      } else if (cfg.enable_point_labels) {
        points_by_frame[o.point.frame_id].push_back(o.point);
      }
    }
    std::vector<boxlabel::BoxLabel> refined;
    if (cfg.temporal_refine) {
      boxlabel::TemporalParams tp = cfg.temporal;
      tp.drop_static_cyclists = false;  // handled above for the whole track
      refined = boxlabel::refine_temporal(inputs, tp);
    } else {
      for (const auto& in : inputs) refined.push_back(in.label);
    }
    for (auto& b : refined) boxes_by_frame[b.frame_id].push_back(b);
  }

  std::map<int, boxlabel::LabelSet> out;
  for (const auto& frame : frames) {
    const auto& boxes = boxes_by_frame[frame.frame_id];
    const auto& points = points_by_frame[frame.frame_id];
    const std::vector<boxlabel::BoxLabel>* ann = nullptr;
    static const std::vector<boxlabel::BoxLabel> kNone;
    if (annotations) {
      auto it = annotations->find(frame.frame_id);
      ann = it != annotations->end() ? &it->second : &kNone;
    }
    out[frame.frame_id] = boxlabel::split_labels(boxes, points, frame.detections, frame.camera, dynamic_tracks,
                                                 cfg.geometry, cfg.split, ann);
    st.boxes += static_cast<int>(out[frame.frame_id].gt_supervision.size() + out[frame.frame_id].pseudo_boxes.size());
    st.points += static_cast<int>(out[frame.frame_id].pseudo_points.size());
  }
  if (annotations) {
    // Annotation boxes are not generated labels.
    for (const auto& [f, a] : *annotations) {
      if (out.count(f)) st.boxes -= static_cast<int>(a.size());
    }
  }
  if (stats) *stats = st;
  return out;
}

}  // namespace spl::pipeline
