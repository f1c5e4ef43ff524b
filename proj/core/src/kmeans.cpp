#include <algorithm>
#include <cmath>
#include <limits>

#include "spl/proto.hpp"

namespace spl::proto {

namespace {

double sqdist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

KMeansResult kmeans(const std::vector<std::vector<double>>& data, int k, Rng& rng, int max_iter, double tol) {
  const std::size_t n = data.size();
  if (k < 1 || n < static_cast<std::size_t>(k)) throw Error(ErrorCode::InvalidArgument, "k-means needs at least k points");
  KMeansResult res;

  // k-means++ seeding.
  res.centroids.push_back(data[static_cast<std::size_t>(rng.below(n))]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = sqdist(data[i], res.centroids[0]);
  while (res.centroids.size() < static_cast<std::size_t>(k)) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        target -= d2[i];
        if (target < 0.0 && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<std::size_t>(rng.below(n));
    }
    res.centroids.push_back(data[pick]);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sqdist(data[i], res.centroids.back()));
  }

  res.assignment.assign(n, 0);
  const std::size_t dim = data[0].size();
  for (int it = 0; it < max_iter; ++it) {
    double wcss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = sqdist(data[i], res.centroids[static_cast<std::size_t>(c)]);
        if (d < best) {
          best = d;
          res.assignment[i] = c;
        }
      }
      wcss += best;
    }
    res.wcss_history.push_back(wcss);

    std::vector<std::vector<double>> next(static_cast<std::size_t>(k), std::vector<double>(dim, 0.0));
    std::vector<std::size_t> count(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& c = next[static_cast<std::size_t>(res.assignment[i])];
      for (std::size_t d = 0; d < dim; ++d) c[d] += data[i][d];
      ++count[static_cast<std::size_t>(res.assignment[i])];
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < next.size(); ++c) {
      if (count[c] == 0) {
        next[c] = res.centroids[c];  // empty cluster keeps its centroid
      } else {
        for (auto& v : next[c]) v /= static_cast<double>(count[c]);
      }
      shift = std::max(shift, std::sqrt(sqdist(next[c], res.centroids[c])));
    }
    res.centroids = std::move(next);
    res.iterations = it + 1;
    if (shift < tol) break;
  }
  return res;
}

PrototypeBank kmeans_init(const MemoryBank& memory, int K, Rng& rng) {
  PrototypeBank bank(memory.num_classes(), K, memory.dim());
  for (int c = 0; c < memory.num_classes(); ++c) {
    if (memory.size(c) < static_cast<std::size_t>(K)) {
      throw Error(ErrorCode::InsufficientMemory, "class " + std::to_string(c) + " has " +
                                                     std::to_string(memory.size(c)) + " memory entries, need " +
                                                     std::to_string(K));
    }
    const auto& q = memory.entries(c);
    const std::vector<std::vector<double>> data(q.begin(), q.end());
    const auto res = kmeans(data, K, rng);
    for (int k = 0; k < K; ++k) {
      auto p = bank.at(c, k);
      std::copy(res.centroids[static_cast<std::size_t>(k)].begin(), res.centroids[static_cast<std::size_t>(k)].end(),
                p.begin());
      normalize_in_place(p);
    }
  }
  return bank;
}

}  // namespace spl::proto
