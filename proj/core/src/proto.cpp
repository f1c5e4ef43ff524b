#include "spl/proto.hpp"

#include <map>
#include <utility>

namespace spl::proto {

void MemoryBank::push(int c, std::span<const double> f) {
  if (static_cast<int>(f.size()) != dim_) throw Error(ErrorCode::DimMismatch, "memory feature dim mismatch");
  if (c < 0 || c >= num_classes()) throw Error(ErrorCode::InvalidArgument, "memory class out of range");
  auto& q = queues_[static_cast<std::size_t>(c)];
  if (capacity_ == 0) return;
  q.emplace_back(f.begin(), f.end());
  while (q.size() > capacity_) q.pop_front();
}

void memory_push(MemoryBank& memory, const std::vector<ForegroundFeature>& features) {
  for (const auto& f : features) memory.push(f.cls, f.f);
}

double total_loss(double l_reg, double l_cls, double l_intra, double l_inter, double lambda1, double lambda2) {
  return l_reg + l_cls + lambda1 * l_intra + lambda2 * l_inter;
}

void update_prototypes(PrototypeBank& bank, const std::vector<ForegroundFeature>& features, double alpha) {
  std::map<std::pair<int, int>, std::pair<std::vector<double>, int>> sums;
  for (const auto& f : features) {
    auto& [sum, n] = sums[{f.cls, f.proto}];
    if (sum.empty()) sum.assign(static_cast<std::size_t>(bank.D), 0.0);
    for (std::size_t d = 0; d < sum.size(); ++d) sum[d] += f.f[d];
    ++n;
  }
  for (auto& [key, acc] : sums) {
    auto p = bank.at(key.first, key.second);
    const double inv = 1.0 / acc.second;
    // p + (1 - alpha)(mean - p): an unchanged prototype is left bit-identical
    // instead of being renormalized.
    bool changed = false;
    for (std::size_t d = 0; d < p.size(); ++d) {
      const double step = (1.0 - alpha) * (acc.first[d] * inv - p[d]);
      if (step != 0.0) changed = true;
      p[d] += step;
    }
    if (changed) normalize_in_place(p);
  }
}

}  // namespace spl::proto
