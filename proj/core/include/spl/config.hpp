// Complete run configuration with its TOML mapping. Every tunable constant
// of the library is a key; defaults live in default_config().
#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "spl/boxlabel.hpp"
#include "spl/features.hpp"
#include "spl/ingest.hpp"
#include "spl/pointlabel.hpp"
#include "spl/proto.hpp"
#include "spl/signals.hpp"
#include "spl/toml.hpp"

namespace spl {

enum class TrainMode { Unsupervised, Sparse };

struct LabelGenConfig {
  int aggregation_window = 2;
  ingest::GroundParams ground;
  pointlabel::ClassGeometryConfig geometry = pointlabel::default_class_geometry();
  pointlabel::PointLabelParams points;
  bool enable_point_labels = true;
  boxlabel::LShapeParams lshape;
  double spr_distance = 0.2;
  double spr_threshold = 0.8;
  boxlabel::TemporalParams temporal;
  bool temporal_refine = true;
  double v_dyn = 1.0;
  int dyn_min_frames = 2;
  boxlabel::SplitParams split;
};

struct FeatureSynthConfig {
  int d_in = 32;
  int modes_per_class = 3;
  int background_modes = 4;
  int nuisance_dims = 8;
  double nuisance_sigma = 0.3;
  double noise_sigma = 0.05;
  double fov_deg = 50.0;
  double max_range = 80.0;
  std::uint64_t seed = 0;
};

struct TrainConfig {
  TrainMode mode = TrainMode::Unsupervised;
  std::array<int, 3> epochs{5, 5, 20};
  double lr = 0.2;
  std::uint64_t seed = 0;
  bool stage2_inter = true;
  double l_reg = 0.0;
  double cls_prior = 0.1;  // initial sigmoid output of the cls head
};

struct EvalConfig {
  std::array<double, kNumClasses> iou{0.5, 0.25, 0.25};
  double point_distance = 1.0;
};

struct Config {
  LabelGenConfig labels;
  BevGridSpec grid;
  signals::HeatmapParams heatmap;
  double eps_g = signals::kGtEpsilon;
  proto::LossConfig loss;
  int K = 5;
  int D = 64;
  std::size_t memory_size = 1000;
  int kmeans_max_iter = 100;
  double kmeans_tol = 1e-6;
  TrainConfig train;
  FeatureSynthConfig features;
  EvalConfig eval;
};

Config default_config();
// Missing keys keep their defaults; unknown sections are ignored. Throws
// ConfigError on type errors or invalid values.
Config config_from_toml(const toml::Document& doc);
Config load_config(const std::filesystem::path& file);
// Full TOML rendering; parsing it back yields an equal configuration.
std::string config_to_toml(const Config& cfg);
void validate(const Config& cfg);

std::string_view train_mode_name(TrainMode m);

}  // namespace spl
