#include <algorithm>
#include <cmath>
#include <limits>

#include "spl/proto.hpp"

namespace spl::proto {

namespace {

// -log softmax of term 0 over `terms`; accumulates dL/df scaled by `weight`
// into grad_f and, when grad_terms is given, dL/dterm into grad_terms[t].
double contrast(std::span<const double> f, const std::vector<std::span<const double>>& terms, double tau,
                double weight, std::vector<double>& grad_f, std::vector<std::vector<double>*>* grad_terms) {
  std::vector<double> logits(terms.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < terms.size(); ++t) {
    logits[t] = dot(f, terms[t]) / tau;
    mx = std::max(mx, logits[t]);
  }
  double z = 0.0;
  for (double l : logits) z += std::exp(l - mx);
  const double loss = -(logits[0] - mx) + std::log(z);
  for (std::size_t t = 0; t < terms.size(); ++t) {
    const double p = std::exp(logits[t] - mx) / z;
    const double coeff = weight * (p - (t == 0 ? 1.0 : 0.0)) / tau;
    if (coeff == 0.0) continue;
    for (std::size_t d = 0; d < f.size(); ++d) grad_f[d] += coeff * terms[t][d];
    if (grad_terms && (*grad_terms)[t]) {
      auto& g = *(*grad_terms)[t];
      for (std::size_t d = 0; d < f.size(); ++d) g[d] += coeff * f[d];
    }
  }
  return loss;
}

}  // namespace

LossReport memory_loss(const std::vector<ForegroundFeature>& features, const MemoryBank& memory, double tau_t) {
  LossReport r;
  r.grad_features.resize(features.size());
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const int c = features[i].cls;
    if (c < 0 || c >= memory.num_classes() || memory.size(c) == 0) {
      ++r.skipped;
    } else {
      usable.push_back(i);
    }
  }
  r.used = static_cast<int>(usable.size());
  if (usable.empty()) return r;
  const double weight = 1.0 / static_cast<double>(usable.size());
  std::vector<std::span<const double>> terms;
  for (std::size_t i : usable) {
    const auto& f = features[i];
    const auto& own = memory.entries(f.cls);
    std::size_t pos = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < own.size(); ++m) {
      const double s = dot(f.f, own[m]);
      if (s > best) {
        best = s;
        pos = m;
      }
    }
    terms.clear();
    terms.emplace_back(own[pos]);
    for (int c = 0; c < memory.num_classes(); ++c) {
      if (c == f.cls) continue;
      for (const auto& e : memory.entries(c)) terms.emplace_back(e);
    }
    auto& g = r.grad_features[i];
    g.assign(f.f.size(), 0.0);
    r.value += weight * contrast(f.f, terms, tau_t, weight, g, nullptr);
  }
  return r;
}

LossReport intra_loss(const std::vector<ForegroundFeature>& features, const PrototypeBank& bank, double tau_t) {
  LossReport r;
  r.grad_features.resize(features.size());
  r.used = static_cast<int>(features.size());
  if (features.empty()) return r;
  const double weight = 1.0 / static_cast<double>(features.size());
  std::vector<std::span<const double>> terms;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& f = features[i];
    terms.clear();
    terms.emplace_back(bank.at(f.cls, f.proto));
    for (int k = 0; k < bank.K; ++k) {
      if (k != f.proto) terms.emplace_back(bank.at(f.cls, k));
    }
    auto& g = r.grad_features[i];
    g.assign(f.f.size(), 0.0);
    r.value += weight * contrast(f.f, terms, tau_t, weight, g, nullptr);
  }
  return r;
}

LossReport inter_loss(const std::vector<ForegroundFeature>& features, const std::vector<BackgroundFeature>& background,
                      const PrototypeBank& bank, double tau_t) {
  LossReport r;
  r.grad_features.resize(features.size());
  r.grad_background.assign(background.size(), std::vector<double>(static_cast<std::size_t>(bank.D), 0.0));
  r.used = static_cast<int>(features.size());
  if (features.empty()) return r;
  const double weight = 1.0 / static_cast<double>(features.size());
  std::vector<std::span<const double>> terms;
  std::vector<std::vector<double>*> grad_terms;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& f = features[i];
    terms.clear();
    grad_terms.clear();
    terms.emplace_back(bank.at(f.cls, f.proto));
    grad_terms.push_back(nullptr);
    for (int c = 0; c < bank.C; ++c) {
      if (c == f.cls) continue;
      for (int k = 0; k < bank.K; ++k) {
        terms.emplace_back(bank.at(c, k));
        grad_terms.push_back(nullptr);
      }
    }
    for (std::size_t j = 0; j < background.size(); ++j) {
      terms.emplace_back(background[j].f);
      grad_terms.push_back(&r.grad_background[j]);
    }
    auto& g = r.grad_features[i];
    g.assign(f.f.size(), 0.0);
    r.value += weight * contrast(f.f, terms, tau_t, weight, g, &grad_terms);
  }
  return r;
}

LossReport focal_cls_loss(std::span<const double> pred, std::span<const double> target,
                          std::span<const unsigned char> mask, int channels, double alpha_f, double beta_f) {
  if (pred.size() != target.size() || pred.size() != mask.size() * static_cast<std::size_t>(channels)) {
    throw Error(ErrorCode::DimMismatch, "focal loss inputs disagree in shape");
  }
  LossReport r;
  r.grad_pred.assign(pred.size(), 0.0);
  std::size_t positives = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (mask[i / static_cast<std::size_t>(channels)] && target[i] >= 0.999) ++positives;
  }
  const double norm = 1.0 / static_cast<double>(std::max<std::size_t>(positives, 1));
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask[i / static_cast<std::size_t>(channels)]) continue;
    const double p = pred[i], t = target[i];
    if (t >= 0.999) {
      const double q = 1.0 - p;
      sum += -std::pow(q, alpha_f) * std::log(p);
      r.grad_pred[i] = norm * (alpha_f * std::pow(q, alpha_f - 1.0) * std::log(p) - std::pow(q, alpha_f) / p);
    } else {
      const double wneg = std::pow(1.0 - t, beta_f);
      const double lq = std::log(1.0 - p);
      sum += -wneg * std::pow(p, alpha_f) * lq;
      r.grad_pred[i] = -norm * wneg * (alpha_f * std::pow(p, alpha_f - 1.0) * lq - std::pow(p, alpha_f) / (1.0 - p));
    }
  }
  r.value = sum * norm;
  r.used = static_cast<int>(positives);
  return r;
}

HeadGradients head_backward(const FeatureMap& raw, const ProjectionHead& head, std::span<const double> upstream) {
  if (head.d_in != raw.D) throw Error(ErrorCode::DimMismatch, "projection head input dim mismatch");
  if (upstream.size() != raw.cells() * static_cast<std::size_t>(head.d_out)) {
    throw Error(ErrorCode::DimMismatch, "upstream gradient shape mismatch");
  }
  const std::size_t din = static_cast<std::size_t>(head.d_in), dout = static_cast<std::size_t>(head.d_out);
  HeadGradients g;
  g.weight.assign(din * dout, 0.0);
  g.bias.assign(dout, 0.0);
  g.raw.assign(raw.cells() * din, 0.0);
  std::vector<double> y(dout), dy(dout);
  for (std::size_t i = 0; i < raw.cells(); ++i) {
    const auto gz = upstream.subspan(i * dout, dout);
    if (std::all_of(gz.begin(), gz.end(), [](double v) { return v == 0.0; })) continue;
    const auto x = raw.cell(i);
    if (std::all_of(x.begin(), x.end(), [](double v) { return v == 0.0; })) continue;
    for (std::size_t j = 0; j < dout; ++j) y[j] = head.bias[j];
    for (std::size_t k = 0; k < din; ++k) {
      for (std::size_t j = 0; j < dout; ++j) y[j] += x[k] * head.weight[k * dout + j];
    }
    const double n = l2norm(y);
    if (n == 0.0) continue;
    double zg = 0.0;
    for (std::size_t j = 0; j < dout; ++j) zg += y[j] / n * gz[j];
    for (std::size_t j = 0; j < dout; ++j) dy[j] = (gz[j] - y[j] / n * zg) / n;
    for (std::size_t j = 0; j < dout; ++j) g.bias[j] += dy[j];
    for (std::size_t k = 0; k < din; ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < dout; ++j) {
        g.weight[k * dout + j] += x[k] * dy[j];
        acc += head.weight[k * dout + j] * dy[j];
      }
      g.raw[i * din + k] = acc;
    }
  }
  return g;
}

}  // namespace spl::proto
