#include "spl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

namespace spl::ingest {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kNoHit = std::numeric_limits<double>::infinity();

// Slab test against an oriented box; returns the entry distance along a unit
// ray, or kNoHit.
double ray_box(const geom::Vec3& o, const geom::Vec3& d, const geom::Box3D& box) {
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  const double ox = o.x - box.cx, oy = o.y - box.cy, oz = o.z - box.cz;
  const std::array<double, 3> lo{c * ox + s * oy, -s * ox + c * oy, oz};
  const std::array<double, 3> ld{c * d.x + s * d.y, -s * d.x + c * d.y, d.z};
  const std::array<double, 3> half{0.5 * box.l, 0.5 * box.w, 0.5 * box.h};
  double t0 = 0.0, t1 = kNoHit;
  for (int k = 0; k < 3; ++k) {
    if (std::abs(ld[k]) < 1e-12) {
      if (std::abs(lo[k]) > half[k]) return kNoHit;
      continue;
    }
    double a = (-half[k] - lo[k]) / ld[k];
    double b = (half[k] - lo[k]) / ld[k];
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
    if (t0 > t1) return kNoHit;
  }
  return t0 > 1e-9 ? t0 : kNoHit;
}

geom::Box3D body_box(const SynthObject& obj, double t) {
  auto b = object_box_world(obj, t);
  b.cz = 0.5 * (obj.clearance + obj.h);
  b.h = obj.h - obj.clearance;
  return b;
}

struct Hit {
  double t = kNoHit;
  int owner = kOwnerGround;
};

Hit cast(const geom::Vec3& o, const geom::Vec3& d, const std::vector<geom::Box3D>& bodies,
         const std::vector<geom::Box3D>& clutter, bool with_ground) {
  Hit best;
  if (with_ground && d.z < -1e-12) {
    best.t = -o.z / d.z;
    best.owner = kOwnerGround;
  }
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    const double t = ray_box(o, d, bodies[i]);
    if (t < best.t) best = {t, static_cast<int>(i)};
  }
  for (const auto& b : clutter) {
    const double t = ray_box(o, d, b);
    if (t < best.t) best = {t, kOwnerClutter};
  }
  return best;
}

}  // namespace

geom::Box3D object_box_world(const SynthObject& obj, double t) {
  geom::Box3D b;
  b.cx = obj.x + obj.speed * t * std::cos(obj.heading);
  b.cy = obj.y + obj.speed * t * std::sin(obj.heading);
  b.cz = 0.5 * obj.h;
  b.l = obj.l;
  b.w = obj.w;
  b.h = obj.h;
  b.yaw = geom::normalize_angle(obj.heading);
  return b;
}

geom::RigidTransform ego_pose(const SynthSceneSpec& spec, double t) {
  const double dist = spec.ego_speed * t;
  return geom::RigidTransform::from_yaw(
      spec.ego_heading,
      {dist * std::cos(spec.ego_heading), dist * std::sin(spec.ego_heading), spec.lidar.mount_height});
}

geom::CameraModel make_camera(const CameraSpec& cs) {
  geom::CameraModel cam;
  cam.fx = cs.fx;
  cam.fy = cs.fy;
  cam.cx = cs.cx;
  cam.cy = cs.cy;
  cam.image_w = cs.image_w;
  cam.image_h = cs.image_h;
  // Camera at the LiDAR origin: x_cam = -y, y_cam = -z, z_cam = x.
  cam.lidar_to_cam.rotation = {{0, -1, 0, 0, 0, -1, 1, 0, 0}};
  return cam;
}

SynthResult synth_scene(const SynthSceneSpec& spec) {
  if (spec.n_frames < 1 || spec.dt <= 0.0) throw Error(ErrorCode::InvalidArgument, "n_frames >= 1 and dt > 0 required");
  for (const auto& o : spec.objects) {
    if (o.l <= 0 || o.w <= 0 || o.h <= 0 || o.clearance < 0 || o.clearance >= o.h) {
      throw Error(ErrorCode::InvalidArgument, "object dimensions must be positive with clearance < h");
    }
  }
  Rng rng(spec.seed);
  const auto cam = make_camera(spec.camera);
  const auto cam_to_lidar = cam.lidar_to_cam.inverse();

  SynthResult out;
  out.frames.resize(static_cast<std::size_t>(spec.n_frames));
  out.gt.resize(out.frames.size());
  out.point_owner.resize(out.frames.size());

  const int n_az = static_cast<int>(std::floor((spec.lidar.azimuth_max_deg - spec.lidar.azimuth_min_deg) /
                                               spec.lidar.azimuth_res_deg)) + 1;

  for (int f = 0; f < spec.n_frames; ++f) {
    const double t = f * spec.dt;
    const auto pose = ego_pose(spec, t);
    const auto world_to_sensor = pose.inverse();

    std::vector<geom::Box3D> bodies;
    for (const auto& o : spec.objects) bodies.push_back(body_box(o, t));
    for (std::size_t i = 0; i < spec.objects.size(); ++i) {
      for (std::size_t j = i + 1; j < spec.objects.size(); ++j) {
        if (geom::bev_intersection_area(object_box_world(spec.objects[i], t), object_box_world(spec.objects[j], t)) > 0.0) {
          throw Error(ErrorCode::InvalidArgument, "objects " + std::to_string(i) + " and " + std::to_string(j) +
                                                      " overlap in frame " + std::to_string(f));
        }
      }
    }

    auto& frame = out.frames[static_cast<std::size_t>(f)];
    frame.frame_id = f;
    frame.timestamp = t;
    frame.pose = pose;
    frame.camera = cam;
    frame.cloud.frame_id = f;
    auto& owners = out.point_owner[static_cast<std::size_t>(f)];
    std::vector<int> hits_per_object(spec.objects.size(), 0);

    const geom::Vec3 origin = pose.translation;
    for (int ch = 0; ch < spec.lidar.channels; ++ch) {
      const double elev = spec.lidar.channels == 1
                              ? spec.lidar.elev_min_deg * kDeg
                              : (spec.lidar.elev_min_deg + (spec.lidar.elev_max_deg - spec.lidar.elev_min_deg) * ch /
                                                               (spec.lidar.channels - 1)) * kDeg;
      for (int a = 0; a < n_az; ++a) {
        const double az = (spec.lidar.azimuth_min_deg + a * spec.lidar.azimuth_res_deg) * kDeg;
        const geom::Vec3 dir_s{std::cos(elev) * std::cos(az), std::cos(elev) * std::sin(az), std::sin(elev)};
        const geom::Vec3 dir = pose.apply_rotation(dir_s);
        const Hit hit = cast(origin, dir, bodies, spec.clutter, true);
        const double noise = rng.normal(0.0, spec.noise_sigma);
        if (hit.t > spec.lidar.max_range) continue;
        const double range = hit.t + noise;
        // Stored as float32 so in-memory frames equal what the dataset files hold.
        const geom::Vec3 p = range * dir_s;
        const double intensity = hit.owner == kOwnerGround ? 0.2 : (hit.owner == kOwnerClutter ? 0.4 : 0.6);
        frame.cloud.points.push_back({static_cast<float>(p.x), static_cast<float>(p.y), static_cast<float>(p.z),
                                      static_cast<float>(intensity)});
        owners.push_back(hit.owner);
        if (hit.owner >= 0) ++hits_per_object[static_cast<std::size_t>(hit.owner)];
      }
    }

    // Instance masks: nearest hit along each pixel ray, restricted to the
    // projected extent of each object.
    for (std::size_t i = 0; i < spec.objects.size(); ++i) {
      const auto corners = geom::box3d_corners(bodies[i]);
      double umin = kNoHit, vmin = kNoHit, umax = -kNoHit, vmax = -kNoHit;
      bool behind = false;
      for (const auto& c : corners) {
        const auto pr = geom::project_point(world_to_sensor.apply(c), cam);
        if (pr.depth <= 0.1) {
          behind = true;
          break;
        }
        umin = std::min(umin, pr.u);
        umax = std::max(umax, pr.u);
        vmin = std::min(vmin, pr.v);
        vmax = std::max(vmax, pr.v);
      }
      if (behind) continue;
      const int u0 = std::max(0, static_cast<int>(std::floor(umin)));
      const int u1 = std::min(cam.image_w - 1, static_cast<int>(std::ceil(umax)));
      const int v0 = std::max(0, static_cast<int>(std::floor(vmin)));
      const int v1 = std::min(cam.image_h - 1, static_cast<int>(std::ceil(vmax)));
      std::vector<std::pair<int, int>> pixels;
      for (int v = v0; v <= v1; ++v) {
        for (int u = u0; u <= u1; ++u) {
          const geom::Vec3 dc{(u + 0.5 - cam.cx) / cam.fx, (v + 0.5 - cam.cy) / cam.fy, 1.0};
          const geom::Vec3 ds = cam_to_lidar.apply_rotation(dc / geom::norm(dc));
          const Hit hit = cast(origin, pose.apply_rotation(ds), bodies, spec.clutter, false);
          if (hit.owner == static_cast<int>(i)) pixels.emplace_back(u, v);
        }
      }
      if (static_cast<int>(pixels.size()) < spec.min_mask_pixels) continue;
      Detection2D det;
      det.frame_id = f;
      det.cls = spec.objects[i].cls;
      det.mask = BinaryMask::from_pixels(cam.image_w, cam.image_h, pixels);
      det.rect = det.mask.bounds();
      det.track_id = static_cast<int>(i);
      det.score = spec.detection_score;
      frame.detections.push_back(std::move(det));

      if (!spec.objects[i].distractor) {
        GtLabel gt;
        gt.frame_id = f;
        gt.cls = spec.objects[i].cls;
        gt.track_id = static_cast<int>(i);
        const auto wb = object_box_world(spec.objects[i], t);
        const auto c = world_to_sensor.apply(wb.center());
        gt.box = {c.x, c.y, c.z, wb.l, wb.w, wb.h, geom::normalize_angle(wb.yaw - spec.ego_heading)};
        gt.num_points = hits_per_object[i];
        out.gt[static_cast<std::size_t>(f)].push_back(gt);
      }
    }
  }
  return out;
}

namespace {

geom::Vec3 vec3_of(const toml::Table& t, const std::string& key, const geom::Vec3& fallback) {
  if (!t.contains(key)) return fallback;
  auto v = t.numbers(key);
  if (v.size() != 3) throw Error(ErrorCode::ConfigError, key + " must have 3 elements");
  return {v[0], v[1], v[2]};
}

}  // namespace

SynthSceneSpec scene_spec_from_toml(const toml::Document& doc) {
  const auto& r = doc.root;
  SynthSceneSpec spec;
  const std::string preset = r.string_or("scene.preset", "");
  if (preset == "standard") {
    spec = standard_benchmark_spec();
  } else if (!preset.empty()) {
    throw Error(ErrorCode::ConfigError, "unknown scene preset '" + preset + "'");
  }
  spec.n_frames = static_cast<int>(r.integer_or("scene.n_frames", spec.n_frames));
  spec.dt = r.number_or("scene.dt", spec.dt);
  spec.ego_speed = r.number_or("scene.ego_speed", spec.ego_speed);
  spec.ego_heading = r.number_or("scene.ego_heading_deg", spec.ego_heading / kDeg) * kDeg;
  spec.noise_sigma = r.number_or("scene.noise_sigma", spec.noise_sigma);
  spec.min_mask_pixels = static_cast<int>(r.integer_or("scene.min_mask_pixels", spec.min_mask_pixels));
  spec.detection_score = r.number_or("scene.detection_score", spec.detection_score);
  spec.seed = static_cast<std::uint64_t>(r.integer_or("scene.seed", static_cast<std::int64_t>(spec.seed)));

  auto& li = spec.lidar;
  li.channels = static_cast<int>(r.integer_or("lidar.channels", li.channels));
  li.elev_min_deg = r.number_or("lidar.elev_min_deg", li.elev_min_deg);
  li.elev_max_deg = r.number_or("lidar.elev_max_deg", li.elev_max_deg);
  li.azimuth_res_deg = r.number_or("lidar.azimuth_res_deg", li.azimuth_res_deg);
  li.azimuth_min_deg = r.number_or("lidar.azimuth_min_deg", li.azimuth_min_deg);
  li.azimuth_max_deg = r.number_or("lidar.azimuth_max_deg", li.azimuth_max_deg);
  li.max_range = r.number_or("lidar.max_range", li.max_range);
  li.mount_height = r.number_or("lidar.mount_height", li.mount_height);

  auto& ca = spec.camera;
  ca.fx = r.number_or("camera.fx", ca.fx);
  ca.fy = r.number_or("camera.fy", ca.fy);
  ca.cx = r.number_or("camera.cx", ca.cx);
  ca.cy = r.number_or("camera.cy", ca.cy);
  ca.image_w = static_cast<int>(r.integer_or("camera.image_w", ca.image_w));
  ca.image_h = static_cast<int>(r.integer_or("camera.image_h", ca.image_h));

  if (auto it = doc.table_arrays.find("objects"); it != doc.table_arrays.end()) {
    spec.objects.clear();
    for (const auto& t : it->second) {
      SynthObject o;
      const auto cls = class_from_name(t.string_or("class", "Vehicle"));
      if (!cls) throw Error(ErrorCode::ConfigError, "unknown object class");
      o.cls = *cls;
      const auto size = vec3_of(t, "size", {o.l, o.w, o.h});
      o.l = size.x;
      o.w = size.y;
      o.h = size.z;
      o.clearance = t.number_or("clearance", o.clearance);
      const auto pos = t.numbers_or("position", {o.x, o.y});
      if (pos.size() != 2) throw Error(ErrorCode::ConfigError, "position must have 2 elements");
      o.x = pos[0];
      o.y = pos[1];
      o.heading = t.number_or("heading_deg", 0.0) * kDeg;
      o.speed = t.number_or("speed", 0.0);
      o.distractor = t.boolean_or("distractor", false);
      spec.objects.push_back(o);
    }
  }
  if (auto it = doc.table_arrays.find("clutter"); it != doc.table_arrays.end()) {
    spec.clutter.clear();
    for (const auto& t : it->second) {
      const auto c = vec3_of(t, "center", {});
      const auto s = vec3_of(t, "size", {1, 1, 1});
      spec.clutter.push_back({c.x, c.y, c.z, s.x, s.y, s.z, t.number_or("yaw_deg", 0.0) * kDeg});
    }
  }
  return spec;
}

SynthSceneSpec standard_benchmark_spec() {
  SynthSceneSpec s;
  s.n_frames = 20;
  s.dt = 0.1;
  s.ego_speed = 2.0;
  s.noise_sigma = 0.02;
  s.seed = 0;
  auto obj = [](ObjectClass c, double l, double w, double h, double clearance, double x, double y,
                double heading_deg, double speed, bool distractor = false) {
    SynthObject o;
    o.cls = c;
    o.l = l;
    o.w = w;
    o.h = h;
    o.clearance = clearance;
    o.x = x;
    o.y = y;
    o.heading = heading_deg * kDeg;
    o.speed = speed;
    o.distractor = distractor;
    return o;
  };
  using C = ObjectClass;
  s.objects = {
      obj(C::Vehicle, 4.4, 1.8, 1.5, 0.2, 11.1, -6.0, 0.0, 2.5),    // leading car
      obj(C::Vehicle, 4.6, 1.9, 1.6, 0.2, 20.4, 9.1, 0.0, 0.0),     // parked
      obj(C::Vehicle, 4.2, 1.8, 1.5, 0.2, 40.0, -7.8, 180.0, 2.5),  // oncoming
      obj(C::Vehicle, 4.8, 2.0, 1.7, 0.2, 30.7, 1.3, 60.0, 0.0),    // parked at an angle
      obj(C::Pedestrian, 0.7, 0.7, 1.75, 0.05, 30.0, -10.6, 90.0, 1.4),  // crossing
      obj(C::Pedestrian, 0.7, 0.7, 1.7, 0.05, 42.0, -2.9, 0.0, 0.0),
      obj(C::Cyclist, 1.8, 0.6, 1.7, 0.05, 14.0, 3.0, 0.0, 3.0),
      obj(C::Cyclist, 1.8, 0.6, 1.7, 0.05, 26.9, 8.1, 0.0, 2.5),
      obj(C::Cyclist, 1.8, 0.6, 1.4, 0.05, 16.0, 8.5, 0.0, 0.0, true),  // parked bicycle
  };
  s.clutter = {
      {30.0, 12.0, 1.5, 60.0, 0.5, 3.0, 0.0},   // building fronts
      {30.0, -13.0, 1.5, 60.0, 0.5, 3.0, 0.0},
      {11.0, -9.5, 1.5, 0.3, 0.3, 3.0, 0.0},    // poles
      {22.0, 7.2, 1.5, 0.3, 0.3, 3.0, 0.0},
      {44.0, 7.8, 1.5, 0.3, 0.3, 3.0, 0.0},
  };
  return s;
}

}  // namespace spl::ingest
