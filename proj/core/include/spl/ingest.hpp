// Sequence ingestion: dataset layout reader/writer, multi-frame aggregation
// and the ground remover.
//
// Dataset layout (one directory per sequence):
//   points/<frame:06d>.bin   little-endian float32 (x, y, z, intensity) records
//   poses.txt                frame_id + 12 floats (row-major 3x4 sensor->world)
//   calib.txt                fx, fy, cx, cy, image_w, image_h and lidar_to_cam (12 floats)
//   detections.jsonl         {frame, class, rect, mask_rle, track_id, score}
//   timestamps.txt           one float (seconds) per line, in poses.txt order
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "spl/common.hpp"
#include "spl/geom.hpp"
#include "spl/mask.hpp"

namespace spl::ingest {

struct Detection2D {
  int frame_id = 0;
  ObjectClass cls = ObjectClass::Vehicle;
  geom::Rect2D rect;
  BinaryMask mask;
  int track_id = 0;
  double score = 1.0;
};

struct FrameBundle {
  int frame_id = 0;
  double timestamp = 0.0;
  geom::PointCloud cloud;
  geom::RigidTransform pose;  // sensor -> world
  std::vector<Detection2D> detections;
  geom::CameraModel camera;
};

// Throws MissingFile, MalformedRecord (message carries file and line) or
// CalibrationInvalid.
std::vector<FrameBundle> load_sequence(const std::filesystem::path& dir);
void write_sequence(const std::filesystem::path& dir, const std::vector<FrameBundle>& frames);

std::vector<float> read_points_bin(const std::filesystem::path& file);
void write_points_bin(const std::filesystem::path& file, const geom::PointCloud& cloud);
geom::CameraModel read_calib(const std::filesystem::path& file);

// Union of frames [center - window, center + window] (clamped to the
// sequence) expressed in the center frame's sensor coordinates. When
// `source` is given it receives the originating frame index of every point.
geom::PointCloud aggregate_frames(const std::vector<FrameBundle>& frames, std::size_t center_idx,
                                  int window, std::vector<std::size_t>* source = nullptr);

struct GroundModel {
  // Plane a x + b y + c z + d = 0 with unit normal, c > 0.
  double a = 0.0;
  double b = 0.0;
  double c = 1.0;
  double d = 0.0;
  // BEV height grid of ground inliers; NaN marks empty cells.
  double cell = 0.5;
  double x0 = 0.0;
  double y0 = 0.0;
  int nx = 0;
  int ny = 0;
  std::vector<double> heights;

  double signed_distance(const geom::Vec3& p) const { return a * p.x + b * p.y + c * p.z + d; }
  double plane_z(double x, double y) const { return -(a * x + b * y + d) / c; }
  // Grid cell height when the cell has inliers, plane height otherwise.
  double height_at(double x, double y) const;
};

struct GroundParams {
  int iterations = 1000;
  double inlier_dist = 0.15;
  double cell = 0.5;
  double min_inlier_ratio = 0.1;
  // Candidates: points below the low_quantile height plus this band.
  double candidate_band = 1.0;
  double low_quantile = 0.1;
  double max_tilt_deg = 25.0;
  // Hypotheses are scored on at most this many candidates.
  std::size_t score_sample = 4000;
  std::uint64_t seed = 7;
};

struct GroundSplit {
  geom::PointCloud nonground;
  GroundModel model;
  std::vector<std::size_t> nonground_indices;  // into the input cloud
  std::vector<std::size_t> ground_indices;
};

// Throws InvalidArgument for fewer than 50 points, GroundFitFailed when the
// inlier ratio falls below params.min_inlier_ratio.
GroundSplit remove_ground(const geom::PointCloud& cloud, const GroundParams& params = {});

}  // namespace spl::ingest
