#include "spl/signals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace spl::signals {

double gaussian_radius(double height, double width, double min_overlap) {
  const double o = min_overlap;
  const double b1 = height + width;
  const double c1 = width * height * (1.0 - o) / (1.0 + o);
  const double r1 = (b1 + std::sqrt(b1 * b1 - 4.0 * c1)) / 2.0;

  const double b2 = 2.0 * (height + width);
  const double c2 = (1.0 - o) * width * height;
  const double r2 = (b2 + std::sqrt(b2 * b2 - 16.0 * c2)) / 2.0;

  const double a3 = 4.0 * o;
  const double b3 = -2.0 * o * (height + width);
  const double c3 = (o - 1.0) * width * height;
  const double r3 = (b3 + std::sqrt(b3 * b3 - 4.0 * a3 * c3)) / 2.0;
  return std::min({r1, r2, r3});
}

long center_cell(const BevGridSpec& grid, double x, double y) {
  if (!grid.contains(x, y)) return -1;
  const int col = std::min(static_cast<int>(std::floor(grid.col_f(x))), grid.width() - 1);
  const int row = std::min(static_cast<int>(std::floor(grid.row_f(y))), grid.height() - 1);
  return static_cast<long>(row) * grid.width() + col;
}

Heatmap gaussian_heatmap(const std::vector<HeatmapObject>& objects, const BevGridSpec& grid,
                         const HeatmapParams& params) {
  Heatmap hm = Heatmap::for_grid(grid);
  const int W = grid.width(), H = grid.height();
  for (const auto& obj : objects) {
    const long cell = center_cell(grid, obj.x, obj.y);
    if (cell < 0) continue;
    const int row = static_cast<int>(cell / W), col = static_cast<int>(cell % W);
    const int radius =
        std::max(params.min_radius, static_cast<int>(gaussian_radius(obj.l / grid.cell, obj.w / grid.cell, params.min_overlap)));
    const double sigma = (2.0 * radius + 1.0) / 6.0;
    const double floor = std::numeric_limits<double>::epsilon();
    const int c = class_index(obj.cls);
    for (int dy = -radius; dy <= radius; ++dy) {
      const int r = row + dy;
      if (r < 0 || r >= H) continue;
      for (int dx = -radius; dx <= radius; ++dx) {
        const int q = col + dx;
        if (q < 0 || q >= W) continue;
        const double g = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        if (g < floor) continue;
        double& v = hm.at(static_cast<std::size_t>(r) * W + q, c);
        v = std::max(v, params.peak * g);
      }
    }
  }
  return hm;
}

FeatureMap project_features(const FeatureMap& raw, const ProjectionHead& head) {
  if (head.d_in != raw.D) {
    throw Error(ErrorCode::DimMismatch,
                "projection head expects " + std::to_string(head.d_in) + " inputs, feature map has " + std::to_string(raw.D));
  }
  FeatureMap out(raw.H, raw.W, head.d_out);
  out.normalized = true;
  for (std::size_t i = 0; i < raw.cells(); ++i) {
    const auto x = raw.cell(i);
    if (std::all_of(x.begin(), x.end(), [](double v) { return v == 0.0; })) continue;
    auto y = out.cell(i);
    for (int j = 0; j < head.d_out; ++j) y[static_cast<std::size_t>(j)] = head.bias[static_cast<std::size_t>(j)];
    for (int k = 0; k < head.d_in; ++k) {
      const double xk = x[static_cast<std::size_t>(k)];
      if (xk == 0.0) continue;
      const double* wrow = head.weight.data() + static_cast<std::size_t>(k) * head.d_out;
      for (int j = 0; j < head.d_out; ++j) y[static_cast<std::size_t>(j)] += xk * wrow[j];
    }
    normalize_in_place(y);
  }
  return out;
}

Similarity similarity_map(const FeatureMap& fp, const PrototypeBank& bank) {
  if (fp.D != bank.D) throw Error(ErrorCode::DimMismatch, "feature and prototype dims differ");
  Similarity sim;
  sim.C = bank.C;
  sim.K = bank.K;
  const std::size_t n = fp.cells();
  const std::size_t ck = static_cast<std::size_t>(bank.C) * bank.K;
  sim.S.assign(n * ck, 0.0);
  sim.s_max.assign(n, 0.0);
  sim.cls.assign(n, 0);
  sim.proto.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto f = fp.cell(i);
    double best = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < bank.C; ++c) {
      for (int k = 0; k < bank.K; ++k) {
        const double s = dot(f, bank.at(c, k));
        sim.S[i * ck + static_cast<std::size_t>(c) * bank.K + static_cast<std::size_t>(k)] = s;
        if (s > best) {
          best = s;
          sim.cls[i] = c;
          sim.proto[i] = k;
        }
      }
    }
    sim.s_max[i] = best;
  }
  return sim;
}

std::vector<double> similarity_score_map(const std::vector<double>& s_max, const Heatmap& hg, double tau_s,
                                         double eps_g) {
  std::vector<double> hs(s_max.size(), 0.0);
  for (std::size_t i = 0; i < s_max.size(); ++i) {
    if (s_max[i] > tau_s && hg.max_at(i) < eps_g) hs[i] = s_max[i];
  }
  return hs;
}

Fused fuse(const std::vector<double>& hs, const std::vector<int>& cls_s, const Heatmap& hp, const Heatmap& hg) {
  Fused out;
  out.hm = Heatmap(hg.H, hg.W, hg.C);
  out.hup = hg;
  out.mask.assign(hg.cells(), 1);
  for (std::size_t i = 0; i < hg.cells(); ++i) {
    const bool p_pos = hp.max_at(i) > 0.0;
    const bool s_pos = hs[i] > 0.0;
    double m = 0.0;
    if (p_pos && s_pos && cls_s[i] == hp.argmax_at(i)) {
      m = hs[i];
      out.hm.at(i, cls_s[i]) = m;
      double& up = out.hup.at(i, cls_s[i]);
      up = std::min(1.0, up + m);
    }
    if ((p_pos || s_pos) && m == 0.0) out.mask[i] = 0;
  }
  return out;
}

std::vector<ForegroundFeature> extract_foreground(const FeatureMap& fp, const std::vector<GtCenter>& gt,
                                                  const Heatmap& hm, const Similarity& sim) {
  std::vector<ForegroundFeature> out;
  for (const auto& g : gt) {
    ForegroundFeature f;
    const auto v = fp.cell(g.cell);
    f.f.assign(v.begin(), v.end());
    f.cls = g.cls;
    int best = 0;
    for (int k = 1; k < sim.K; ++k) {
      if (sim.at(g.cell, g.cls, k) > sim.at(g.cell, g.cls, best)) best = k;
    }
    f.proto = best;
    f.origin = FeatureOrigin::Gt;
    f.cell = g.cell;
    out.push_back(std::move(f));
  }
  for (std::size_t i = 0; i < hm.cells(); ++i) {
    if (!(hm.max_at(i) > 0.0)) continue;
    ForegroundFeature f;
    const auto v = fp.cell(i);
    f.f.assign(v.begin(), v.end());
    f.cls = sim.cls[i];
    f.proto = sim.proto[i];
    f.origin = FeatureOrigin::Mined;
    f.cell = i;
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<BackgroundFeature> sample_background(const FeatureMap& fp, const Heatmap& hg, const Heatmap& hp,
                                                 const std::vector<double>& hs, std::size_t count, Rng& rng,
                                                 double eps_g) {
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < fp.cells(); ++i) {
    if (hg.max_at(i) < eps_g && hp.max_at(i) < eps_g && hs[i] < eps_g) candidates.push_back(i);
  }
  const std::size_t take = std::min(count, candidates.size());
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(candidates.size() - i));
    std::swap(candidates[i], candidates[j]);
  }
  std::vector<BackgroundFeature> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    BackgroundFeature b;
    const auto v = fp.cell(candidates[i]);
    b.f.assign(v.begin(), v.end());
    b.cell = candidates[i];
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace spl::signals
