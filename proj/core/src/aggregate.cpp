#include <algorithm>

#include "spl/ingest.hpp"

namespace spl::ingest {

geom::PointCloud aggregate_frames(const std::vector<FrameBundle>& frames, std::size_t center_idx, int window,
                                  std::vector<std::size_t>* source) {
  if (center_idx >= frames.size()) throw Error(ErrorCode::InvalidArgument, "center index out of range");
  if (window < 0) throw Error(ErrorCode::InvalidArgument, "window must be >= 0");
  const auto& center = frames[center_idx];
  const auto world_to_center = center.pose.inverse();
  const std::size_t lo = center_idx >= static_cast<std::size_t>(window) ? center_idx - static_cast<std::size_t>(window) : 0;
  const std::size_t hi = std::min(frames.size() - 1, center_idx + static_cast<std::size_t>(window));

  geom::PointCloud out;
  out.frame_id = center.frame_id;
  std::size_t total = 0;
  for (std::size_t i = lo; i <= hi; ++i) total += frames[i].cloud.size();
  out.points.reserve(total);
  // The center frame goes first so its points keep their indices.
  out.points = center.cloud.points;
  if (source) {
    source->assign(out.points.size(), center_idx);
    source->reserve(total);
  }
  for (std::size_t i = lo; i <= hi; ++i) {
    if (i == center_idx) continue;
    const auto tf = world_to_center.compose(frames[i].pose);
    for (const auto& p : frames[i].cloud.points) {
      const auto q = tf.apply(p.pos());
      out.points.push_back({q.x, q.y, q.z, p.intensity});
      if (source) source->push_back(i);
    }
  }
  return out;
}

}  // namespace spl::ingest
