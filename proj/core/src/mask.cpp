#include "spl/mask.hpp"

#include <algorithm>
#include <limits>

#include "spl/common.hpp"

namespace spl::ingest {

BinaryMask BinaryMask::from_pixels(int image_w, int image_h, const std::vector<std::pair<int, int>>& uv) {
  BinaryMask m;
  m.image_w_ = image_w;
  m.image_h_ = image_h;
  int xmin = std::numeric_limits<int>::max(), ymin = xmin;
  int xmax = std::numeric_limits<int>::min(), ymax = xmax;
  for (auto [u, v] : uv) {
    if (u < 0 || v < 0 || u >= image_w || v >= image_h) continue;
    xmin = std::min(xmin, u);
    xmax = std::max(xmax, u);
    ymin = std::min(ymin, v);
    ymax = std::max(ymax, v);
  }
  if (xmin > xmax) return m;
  m.x0_ = xmin;
  m.y0_ = ymin;
  m.w_ = xmax - xmin + 1;
  m.h_ = ymax - ymin + 1;
  m.bits_.assign(static_cast<std::size_t>(m.w_) * static_cast<std::size_t>(m.h_), 0);
  for (auto [u, v] : uv) {
    if (u < 0 || v < 0 || u >= image_w || v >= image_h) continue;
    m.bits_[static_cast<std::size_t>(v - m.y0_) * static_cast<std::size_t>(m.w_) + static_cast<std::size_t>(u - m.x0_)] = 1;
  }
  m.recompute();
  return m;
}

BinaryMask BinaryMask::decode_rle(int image_w, int image_h, const std::vector<std::uint32_t>& counts) {
  if (image_w <= 0 || image_h <= 0) throw Error(ErrorCode::MalformedRecord, "mask size must be positive");
  const std::uint64_t total = static_cast<std::uint64_t>(image_w) * static_cast<std::uint64_t>(image_h);
  std::vector<std::pair<int, int>> pixels;
  std::uint64_t pos = 0;
  bool fg = false;
  for (std::uint32_t run : counts) {
    if (pos + run > total) throw Error(ErrorCode::MalformedRecord, "mask RLE exceeds image size");
    if (fg) {
      for (std::uint64_t i = pos; i < pos + run; ++i) {
        pixels.emplace_back(static_cast<int>(i % static_cast<std::uint64_t>(image_w)),
                            static_cast<int>(i / static_cast<std::uint64_t>(image_w)));
      }
    }
    pos += run;
    fg = !fg;
  }
  if (pos != total) throw Error(ErrorCode::MalformedRecord, "mask RLE does not cover the image");
  return from_pixels(image_w, image_h, pixels);
}

std::vector<std::uint32_t> BinaryMask::encode_rle() const {
  std::vector<std::uint32_t> counts;
  const std::uint64_t total = static_cast<std::uint64_t>(image_w_) * static_cast<std::uint64_t>(image_h_);
  bool cur = false;
  std::uint64_t run = 0;
  std::uint64_t pos = 0;
  auto flush_to = [&](std::uint64_t next_pos, bool value) {
    // Extends runs from pos to next_pos with `value`.
    const std::uint64_t n = next_pos - pos;
    if (n == 0) return;
    if (value == cur) {
      run += n;
    } else {
      counts.push_back(static_cast<std::uint32_t>(run));
      cur = value;
      run = n;
    }
    pos = next_pos;
  };
  for (int r = 0; r < h_; ++r) {
    const std::uint64_t row_start = static_cast<std::uint64_t>(y0_ + r) * static_cast<std::uint64_t>(image_w_);
    for (int c = 0; c < w_; ++c) {
      const bool b = bits_[static_cast<std::size_t>(r * w_ + c)] != 0;
      const std::uint64_t idx = row_start + static_cast<std::uint64_t>(x0_ + c);
      flush_to(idx, false);
      flush_to(idx + 1, b);
    }
  }
  flush_to(total, false);
  counts.push_back(static_cast<std::uint32_t>(run));
  return counts;
}

bool BinaryMask::at(int u, int v) const {
  if (u < x0_ || v < y0_ || u >= x0_ + w_ || v >= y0_ + h_) return false;
  return bits_[static_cast<std::size_t>(v - y0_) * static_cast<std::size_t>(w_) + static_cast<std::size_t>(u - x0_)] != 0;
}

geom::Rect2D BinaryMask::bounds() const {
  return {static_cast<double>(x0_), static_cast<double>(y0_), static_cast<double>(x0_ + w_),
          static_cast<double>(y0_ + h_)};
}

BinaryMask BinaryMask::dilated(int radius) const {
  if (radius <= 0 || empty()) return *this;
  BinaryMask out;
  out.image_w_ = image_w_;
  out.image_h_ = image_h_;
  out.x0_ = std::max(0, x0_ - radius);
  out.y0_ = std::max(0, y0_ - radius);
  const int x1 = std::min(image_w_, x0_ + w_ + radius);
  const int y1 = std::min(image_h_, y0_ + h_ + radius);
  out.w_ = x1 - out.x0_;
  out.h_ = y1 - out.y0_;
  // Separable max filter: horizontal pass then vertical pass.
  std::vector<std::uint8_t> horiz(static_cast<std::size_t>(out.w_) * static_cast<std::size_t>(h_), 0);
  for (int r = 0; r < h_; ++r) {
    for (int c = 0; c < out.w_; ++c) {
      const int u = out.x0_ + c;
      std::uint8_t v = 0;
      for (int du = -radius; du <= radius && !v; ++du) v = at(u + du, y0_ + r) ? 1 : 0;
      horiz[static_cast<std::size_t>(r * out.w_ + c)] = v;
    }
  }
  out.bits_.assign(static_cast<std::size_t>(out.w_) * static_cast<std::size_t>(out.h_), 0);
  for (int r = 0; r < out.h_; ++r) {
    const int v = out.y0_ + r;
    for (int c = 0; c < out.w_; ++c) {
      std::uint8_t b = 0;
      for (int dv = -radius; dv <= radius && !b; ++dv) {
        const int src = v + dv - y0_;
        if (src >= 0 && src < h_) b = horiz[static_cast<std::size_t>(src * out.w_ + c)];
      }
      out.bits_[static_cast<std::size_t>(r * out.w_ + c)] = b;
    }
  }
  out.recompute();
  return out;
}

void BinaryMask::recompute() {
  count_ = static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

bool operator==(const BinaryMask& a, const BinaryMask& b) {
  if (a.image_w_ != b.image_w_ || a.image_h_ != b.image_h_ || a.count_ != b.count_) return false;
  if (a.empty()) return true;
  const auto ra = a.bounds(), rb = b.bounds();
  const int x0 = static_cast<int>(std::min(ra.x_min, rb.x_min)), x1 = static_cast<int>(std::max(ra.x_max, rb.x_max));
  const int y0 = static_cast<int>(std::min(ra.y_min, rb.y_min)), y1 = static_cast<int>(std::max(ra.y_max, rb.y_max));
  for (int v = y0; v < y1; ++v) {
    for (int u = x0; u < x1; ++u) {
      if (a.at(u, v) != b.at(u, v)) return false;
    }
  }
  return true;
}

}  // namespace spl::ingest
