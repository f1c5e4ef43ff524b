// Prototype learning: memory bank, contrastive and focal losses with analytic
// gradients, momentum prototype updates, k-means initialization, projection
// head backward pass and checkpoint files.
#pragma once

#include <deque>
#include <filesystem>
#include <span>
#include <vector>

#include "spl/common.hpp"
#include "spl/features.hpp"

namespace spl::proto {

struct LossConfig {
  double tau_t = 1.0;
  double tau_s = 0.9;
  double alpha = 0.9;
  double lambda1 = 0.5;
  double lambda2 = 1.0;
  double focal_alpha = 2.0;
  double focal_beta = 4.0;

  bool is_valid() const { return tau_t > 0.0 && alpha >= 0.0 && alpha <= 1.0 && lambda1 >= 0.0 && lambda2 >= 0.0; }
};

struct LossReport {
  double value = 0.0;
  // One gradient per input feature (same order); empty for skipped ones.
  std::vector<std::vector<double>> grad_features;
  std::vector<std::vector<double>> grad_background;
  // Dense gradient w.r.t. a prediction map, where applicable.
  std::vector<double> grad_pred;
  int used = 0;
  int skipped = 0;
};

// Per-class FIFO of unit-norm features.
class MemoryBank {
 public:
  MemoryBank(int num_classes = kNumClasses, std::size_t capacity = 1000, int dim = 64)
      : capacity_(capacity), dim_(dim), queues_(static_cast<std::size_t>(num_classes)) {}

  std::size_t capacity() const { return capacity_; }
  int dim() const { return dim_; }
  int num_classes() const { return static_cast<int>(queues_.size()); }
  const std::deque<std::vector<double>>& entries(int c) const { return queues_[static_cast<std::size_t>(c)]; }
  std::size_t size(int c) const { return entries(c).size(); }
  void push(int c, std::span<const double> f);

 private:
  std::size_t capacity_;
  int dim_;
  std::vector<std::deque<std::vector<double>>> queues_;
};

void memory_push(MemoryBank& memory, const std::vector<ForegroundFeature>& features);

// Contrast of each feature against its most similar same-class memory entry
// (held constant) and every memory entry of the other classes. Features
// whose class has no stored entry are skipped and counted.
LossReport memory_loss(const std::vector<ForegroundFeature>& features, const MemoryBank& memory, double tau_t);

// Softmax over the K prototypes of each feature's class.
LossReport intra_loss(const std::vector<ForegroundFeature>& features, const PrototypeBank& bank, double tau_t);
// Assigned prototype against other-class prototypes and background features.
LossReport inter_loss(const std::vector<ForegroundFeature>& features, const std::vector<BackgroundFeature>& background,
                      const PrototypeBank& bank, double tau_t);
// Penalty-reduced focal loss. Cells with mask 0 contribute nothing; the sum
// is divided by max(1, #unmasked cells with target >= 0.999).
LossReport focal_cls_loss(std::span<const double> pred, std::span<const double> target,
                          std::span<const unsigned char> mask, int channels, double alpha_f = 2.0,
                          double beta_f = 4.0);

double total_loss(double l_reg, double l_cls, double l_intra, double l_inter, double lambda1, double lambda2);

// Momentum update of every prototype with assigned features; result normalized.
void update_prototypes(PrototypeBank& bank, const std::vector<ForegroundFeature>& features, double alpha);

struct KMeansResult {
  std::vector<std::vector<double>> centroids;  // unnormalized
  std::vector<int> assignment;
  std::vector<double> wcss_history;  // after each assignment step
  int iterations = 0;
};

// k-means++ seeding and Lloyd iterations until the largest centroid shift is
// below tol or max_iter is reached.
KMeansResult kmeans(const std::vector<std::vector<double>>& data, int k, Rng& rng, int max_iter = 100,
                    double tol = 1e-6);
// Throws InsufficientMemory when a class holds fewer than K entries.
PrototypeBank kmeans_init(const MemoryBank& memory, int K, Rng& rng);

struct HeadGradients {
  std::vector<double> weight;  // D_in x D
  std::vector<double> bias;
  std::vector<double> raw;     // cells x D_in
};

// Chain rule through the L2 normalization and the affine map. `upstream` is
// dL/dF' (cells x D). Null raw cells receive and pass no gradient.
HeadGradients head_backward(const FeatureMap& raw, const ProjectionHead& head, std::span<const double> upstream);

// prototypes.bin: u32 C, K, D, count, then C*K*D float32 prototypes, then
// `count` memory records of (class as float32, D float32). Little endian.
void save_prototypes(const std::filesystem::path& file, const PrototypeBank& bank, const MemoryBank* memory);
PrototypeBank load_prototypes(const std::filesystem::path& file, MemoryBank* memory = nullptr);
// head.bin: u32 D_in, D, then weight and bias as float32; optional cls head
// (u32 C, then D x C weight and C bias).
void save_head(const std::filesystem::path& file, const ProjectionHead& head, std::span<const double> cls_weight,
               std::span<const double> cls_bias);
ProjectionHead load_head(const std::filesystem::path& file, std::vector<double>* cls_weight = nullptr,
                         std::vector<double>* cls_bias = nullptr);

}  // namespace spl::proto
