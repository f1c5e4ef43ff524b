#include "spl/features.hpp"

#include <cmath>

namespace spl {

double Heatmap::max_at(std::size_t cell) const {
  double m = at(cell, 0);
  for (int c = 1; c < C; ++c) m = std::max(m, at(cell, c));
  return m;
}

int Heatmap::argmax_at(std::size_t cell) const {
  int best = 0;
  for (int c = 1; c < C; ++c) {
    if (at(cell, c) > at(cell, best)) best = c;
  }
  return best;
}

ProjectionHead ProjectionHead::identity(int d) {
  ProjectionHead h(d, d);
  for (int i = 0; i < d; ++i) h.weight[static_cast<std::size_t>(i) * d + static_cast<std::size_t>(i)] = 1.0;
  return h;
}

ProjectionHead ProjectionHead::random(int in, int out, Rng& rng) {
  ProjectionHead h(in, out);
  const double scale = 1.0 / std::sqrt(static_cast<double>(in));
  for (auto& v : h.weight) v = rng.normal(0.0, scale);
  return h;
}

bool ProjectionHead::is_finite() const {
  for (double v : weight) {
    if (!std::isfinite(v)) return false;
  }
  for (double v : bias) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

PrototypeBank PrototypeBank::random(int c, int k, int d, Rng& rng) {
  PrototypeBank bank(c, k, d);
  for (int ci = 0; ci < c; ++ci) {
    for (int ki = 0; ki < k; ++ki) {
      auto p = bank.at(ci, ki);
      for (auto& v : p) v = rng.normal();
      normalize_in_place(p);
    }
  }
  return bank;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void normalize_in_place(std::span<double> a) {
  const double n = l2norm(a);
  if (n == 0.0) return;
  for (auto& v : a) v /= n;
}

}  // namespace spl
