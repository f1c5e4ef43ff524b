// Synthetic sequences with known ground truth: a ray-cast LiDAR over a flat
// ground plane with box-shaped objects and unlabeled clutter, plus a pinhole
// camera producing instance masks as occlusion-aware box silhouettes.
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "spl/common.hpp"
#include "spl/geom.hpp"
#include "spl/ingest.hpp"
#include "spl/toml.hpp"

namespace spl::ingest {

struct SynthObject {
  ObjectClass cls = ObjectClass::Vehicle;
  double l = 4.5;
  double w = 1.8;
  double h = 1.5;
  // Gap between the ground and the reflecting body; the labeled box still
  // touches the ground.
  double clearance = 0.0;
  double x = 10.0;  // world position at t = 0
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;  // m/s along heading
  // Detected in the image but absent from ground truth (e.g. a parked bicycle).
  bool distractor = false;
};

struct LidarSpec {
  int channels = 64;
  double elev_min_deg = -24.8;
  double elev_max_deg = 2.0;
  double azimuth_res_deg = 0.2;
  double azimuth_min_deg = -50.0;
  double azimuth_max_deg = 50.0;
  double max_range = 80.0;
  double mount_height = 1.73;
};

struct CameraSpec {
  double fx = 700.0;
  double fy = 700.0;
  double cx = 621.0;
  double cy = 187.5;
  int image_w = 1242;
  int image_h = 375;
};

struct SynthSceneSpec {
  int n_frames = 20;
  double dt = 0.1;
  double ego_speed = 0.0;
  double ego_heading = 0.0;
  std::vector<SynthObject> objects;
  std::vector<geom::Box3D> clutter;  // world frame, static
  LidarSpec lidar;
  CameraSpec camera;
  double noise_sigma = 0.02;
  int min_mask_pixels = 30;
  double detection_score = 0.9;
  std::uint64_t seed = 0;
};

struct GtLabel {
  int frame_id = 0;
  ObjectClass cls = ObjectClass::Vehicle;
  int track_id = 0;
  geom::Box3D box;  // sensor frame of that frame
  int num_points = 0;
};

inline constexpr int kOwnerGround = -1;
inline constexpr int kOwnerClutter = -2;

struct SynthResult {
  std::vector<FrameBundle> frames;
  std::vector<std::vector<GtLabel>> gt;  // per frame: non-distractor objects that were detected
  // Per frame, per point: object index, kOwnerGround or kOwnerClutter.
  std::vector<std::vector<int>> point_owner;
};

// Deterministic given spec.seed. Track ids equal object indices. Throws
// InvalidArgument when two objects overlap in BEV in any frame.
SynthResult synth_scene(const SynthSceneSpec& spec);

// Box occupied by object `idx` at time t, world frame.
geom::Box3D object_box_world(const SynthObject& obj, double t);
geom::RigidTransform ego_pose(const SynthSceneSpec& spec, double t);
geom::CameraModel make_camera(const CameraSpec& cs);

// 20 frames, 8 labeled objects per frame (4 vehicles, 2 pedestrians,
// 2 cyclists), one parked-bicycle distractor and roadside clutter.
SynthSceneSpec standard_benchmark_spec();
SynthSceneSpec scene_spec_from_toml(const toml::Document& doc);

}  // namespace spl::ingest
