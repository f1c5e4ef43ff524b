// Binary instance mask over an image, stored cropped to its bounding box.
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "spl/geom.hpp"

namespace spl::ingest {

class BinaryMask {
 public:
  BinaryMask() = default;

  // Pixels outside [0, image_w) x [0, image_h) are ignored.
  static BinaryMask from_pixels(int image_w, int image_h, const std::vector<std::pair<int, int>>& uv);
  // Row-major run lengths over the full image, alternating background and
  // foreground runs and starting with a (possibly empty) background run.
  static BinaryMask decode_rle(int image_w, int image_h, const std::vector<std::uint32_t>& counts);
  std::vector<std::uint32_t> encode_rle() const;

  bool at(int u, int v) const;
  bool empty() const { return count_ == 0; }
  std::size_t count() const { return count_; }
  int image_w() const { return image_w_; }
  int image_h() const { return image_h_; }
  // Tight pixel-edge bounds: [min col, max col + 1] x [min row, max row + 1].
  geom::Rect2D bounds() const;
  // Square structuring element of the given radius, clipped to the image.
  BinaryMask dilated(int radius) const;

  friend bool operator==(const BinaryMask& a, const BinaryMask& b);

 private:
  void recompute();

  int image_w_ = 0;
  int image_h_ = 0;
  int x0_ = 0;
  int y0_ = 0;
  int w_ = 0;
  int h_ = 0;
  std::vector<std::uint8_t> bits_;
  std::size_t count_ = 0;
};

}  // namespace spl::ingest
