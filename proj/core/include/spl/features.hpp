// Dense BEV containers shared by the signal builders and the prototype
// learner: grid geometry, class heatmaps, feature maps, the projection head
// and the prototype bank.
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "spl/common.hpp"

namespace spl {

// Rows run along y, columns along x.
struct BevGridSpec {
  double x_min = -50.0;
  double x_max = 50.0;
  double y_min = -50.0;
  double y_max = 50.0;
  double cell = 0.5;

  int width() const { return static_cast<int>(std::lround((x_max - x_min) / cell)); }
  int height() const { return static_cast<int>(std::lround((y_max - y_min) / cell)); }
  std::size_t cells() const { return static_cast<std::size_t>(width()) * static_cast<std::size_t>(height()); }
  bool is_valid() const { return cell > 0.0 && width() >= 1 && height() >= 1; }
  bool contains(double x, double y) const { return x >= x_min && x < x_max && y >= y_min && y < y_max; }
  // Continuous cell coordinates of a metric position.
  double col_f(double x) const { return (x - x_min) / cell; }
  double row_f(double y) const { return (y - y_min) / cell; }
  double cell_center_x(int col) const { return x_min + (col + 0.5) * cell; }
  double cell_center_y(int row) const { return y_min + (row + 0.5) * cell; }
};

// H x W x C values, cell-major.
struct Heatmap {
  int H = 0;
  int W = 0;
  int C = kNumClasses;
  std::vector<double> values;

  Heatmap() = default;
  Heatmap(int h, int w, int c) : H(h), W(w), C(c), values(static_cast<std::size_t>(h) * w * c, 0.0) {}
  static Heatmap for_grid(const BevGridSpec& g, int c = kNumClasses) { return Heatmap(g.height(), g.width(), c); }

  std::size_t cells() const { return static_cast<std::size_t>(H) * static_cast<std::size_t>(W); }
  double& at(std::size_t cell, int c) { return values[cell * static_cast<std::size_t>(C) + static_cast<std::size_t>(c)]; }
  double at(std::size_t cell, int c) const { return values[cell * static_cast<std::size_t>(C) + static_cast<std::size_t>(c)]; }
  double max_at(std::size_t cell) const;
  // Channel of the largest value; ties go to the lowest channel.
  int argmax_at(std::size_t cell) const;
};

// H x W x D values, cell-major. An all-zero cell is a null cell.
struct FeatureMap {
  int H = 0;
  int W = 0;
  int D = 0;
  std::vector<double> values;
  bool normalized = false;

  FeatureMap() = default;
  FeatureMap(int h, int w, int d) : H(h), W(w), D(d), values(static_cast<std::size_t>(h) * w * d, 0.0) {}

  std::size_t cells() const { return static_cast<std::size_t>(H) * static_cast<std::size_t>(W); }
  std::span<double> cell(std::size_t i) { return {values.data() + i * static_cast<std::size_t>(D), static_cast<std::size_t>(D)}; }
  std::span<const double> cell(std::size_t i) const {
    return {values.data() + i * static_cast<std::size_t>(D), static_cast<std::size_t>(D)};
  }
};

// Per-cell affine map (a 1x1 convolution) followed by L2 normalization.
// weight is D_in x D, row-major.
struct ProjectionHead {
  int d_in = 0;
  int d_out = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  ProjectionHead() = default;
  ProjectionHead(int in, int out)
      : d_in(in), d_out(out), weight(static_cast<std::size_t>(in) * out, 0.0), bias(static_cast<std::size_t>(out), 0.0) {}
  static ProjectionHead identity(int d);
  // Scaled normal initialization with zero bias.
  static ProjectionHead random(int in, int out, Rng& rng);
  double w(int i, int j) const { return weight[static_cast<std::size_t>(i) * d_out + static_cast<std::size_t>(j)]; }
  bool is_finite() const;
};

// C x K x D unit-norm prototypes.
struct PrototypeBank {
  int C = kNumClasses;
  int K = 5;
  int D = 64;
  std::vector<double> P;

  PrototypeBank() = default;
  PrototypeBank(int c, int k, int d) : C(c), K(k), D(d), P(static_cast<std::size_t>(c) * k * d, 0.0) {}
  // Random directions, normalized.
  static PrototypeBank random(int c, int k, int d, Rng& rng);

  std::span<double> at(int c, int k) {
    return {P.data() + (static_cast<std::size_t>(c) * K + static_cast<std::size_t>(k)) * D, static_cast<std::size_t>(D)};
  }
  std::span<const double> at(int c, int k) const {
    return {P.data() + (static_cast<std::size_t>(c) * K + static_cast<std::size_t>(k)) * D, static_cast<std::size_t>(D)};
  }
};

enum class FeatureOrigin { Gt, Mined };

struct ForegroundFeature {
  std::vector<double> f;
  int cls = 0;
  int proto = 0;
  FeatureOrigin origin = FeatureOrigin::Gt;
  std::size_t cell = 0;  // source cell in the feature map
};

struct BackgroundFeature {
  std::vector<double> f;
  std::size_t cell = 0;
};

double dot(std::span<const double> a, std::span<const double> b);
double l2norm(std::span<const double> a);
// Scales to unit norm; zero vectors are left unchanged.
void normalize_in_place(std::span<double> a);

}  // namespace spl
