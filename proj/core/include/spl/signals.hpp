// Training signals on the BEV grid: Gaussian center heatmaps, projected
// features, prototype similarity, mined positives, the ambiguity mask and
// foreground/background feature sets.
#pragma once

#include <vector>

#include "spl/common.hpp"
#include "spl/features.hpp"

namespace spl::signals {

struct HeatmapObject {
  ObjectClass cls = ObjectClass::Vehicle;
  double x = 0.0;
  double y = 0.0;
  double l = 1.0;  // footprint used for the radius
  double w = 1.0;
};

// Largest radius (in cells) keeping IoU >= min_overlap for a box of the given
// size (in cells) under corner displacement; minimum of the three cases.
double gaussian_radius(double height, double width, double min_overlap = 0.7);

struct HeatmapParams {
  double min_overlap = 0.7;
  int min_radius = 2;
  double peak = 1.0;
};

// Per object a truncated Gaussian around its center cell, max-merged within
// each class channel. Objects outside the grid are skipped.
Heatmap gaussian_heatmap(const std::vector<HeatmapObject>& objects, const BevGridSpec& grid,
                         const HeatmapParams& params = {});
// Center cell of a metric position, or -1 outside the grid.
long center_cell(const BevGridSpec& grid, double x, double y);

// Throws DimMismatch when the head input dim differs from raw.D.
FeatureMap project_features(const FeatureMap& raw, const ProjectionHead& head);

struct Similarity {
  int C = 0;
  int K = 0;
  std::vector<double> S;       // cells x C x K
  std::vector<double> s_max;   // S'
  std::vector<int> cls;        // C_id^s
  std::vector<int> proto;      // K_id^s

  double at(std::size_t cell, int c, int k) const {
    return S[(cell * static_cast<std::size_t>(C) + static_cast<std::size_t>(c)) * static_cast<std::size_t>(K) +
             static_cast<std::size_t>(k)];
  }
};

// Ties go to the lowest class, then the lowest prototype index.
Similarity similarity_map(const FeatureMap& fp, const PrototypeBank& bank);

inline constexpr double kGtEpsilon = 1e-4;

// S' where S' > tau_s and max_c H_g < eps_g, else 0. One value per cell.
std::vector<double> similarity_score_map(const std::vector<double>& s_max, const Heatmap& hg, double tau_s,
                                         double eps_g = kGtEpsilon);

struct Fused {
  Heatmap hm;                  // mined positives in channel C_id^s
  std::vector<unsigned char> mask;  // 1 = cell contributes to the cls loss
  Heatmap hup;                 // min(1, H_g + H_m)
};

Fused fuse(const std::vector<double>& hs, const std::vector<int>& cls_s, const Heatmap& hp, const Heatmap& hg);

struct GtCenter {
  std::size_t cell = 0;
  int cls = 0;
};

// F_g at each GT center cell (prototype = argmax similarity within its class)
// followed by F_m at every cell with H_m > 0.
std::vector<ForegroundFeature> extract_foreground(const FeatureMap& fp, const std::vector<GtCenter>& gt,
                                                  const Heatmap& hm, const Similarity& sim);

// Uniform sample without replacement of cells where H_g, H_p and H_s all stay
// below eps_g. Returns every candidate when there are fewer than `count`.
std::vector<BackgroundFeature> sample_background(const FeatureMap& fp, const Heatmap& hg, const Heatmap& hp,
                                                 const std::vector<double>& hs, std::size_t count, Rng& rng,
                                                 double eps_g = kGtEpsilon);

}  // namespace spl::signals
