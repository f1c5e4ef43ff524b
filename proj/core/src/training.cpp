#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numbers>

#include "spl/pipeline.hpp"

namespace spl::pipeline {

namespace {

constexpr double kPredClamp = 1e-4;

struct Forward {
  FeatureMap fp;
  std::vector<double> logits;
  std::vector<double> pred;
};

Forward forward(const TrainFrame& frame, const TrainState& s) {
  Forward f;
  f.fp = signals::project_features(frame.raw, s.head);
  const std::size_t C = s.cls_bias.size(), D = static_cast<std::size_t>(f.fp.D);
  f.logits.assign(f.fp.cells() * C, 0.0);
  f.pred.assign(f.fp.cells() * C, 0.0);
  for (std::size_t i = 0; i < f.fp.cells(); ++i) {
    const auto x = f.fp.cell(i);
    for (std::size_t c = 0; c < C; ++c) {
      double z = s.cls_bias[c];
      for (std::size_t d = 0; d < D; ++d) z += x[d] * s.cls_weight[d * C + c];
      f.logits[i * C + c] = z;
      f.pred[i * C + c] = std::clamp(1.0 / (1.0 + std::exp(-z)), kPredClamp, 1.0 - kPredClamp);
    }
  }
  return f;
}

struct StepGrads {
  std::vector<double> dfp;  // cells x D
  std::vector<double> dcls_w;
  std::vector<double> dcls_b;
};

double cls_loss(const Forward& f, const Heatmap& target, const std::vector<unsigned char>& mask, const TrainState& s,
                const Config& cfg, StepGrads& g) {
  const auto rep = proto::focal_cls_loss(f.pred, target.values, mask, target.C, cfg.loss.focal_alpha, cfg.loss.focal_beta);
  const std::size_t C = s.cls_bias.size(), D = static_cast<std::size_t>(f.fp.D);
  for (std::size_t i = 0; i < f.fp.cells(); ++i) {
    if (!mask[i]) continue;
    const auto x = f.fp.cell(i);
    for (std::size_t c = 0; c < C; ++c) {
      const double p = f.pred[i * C + c];
      if (p <= kPredClamp || p >= 1.0 - kPredClamp) continue;  // clamped: no gradient
      const double dz = rep.grad_pred[i * C + c] * p * (1.0 - p);
      if (dz == 0.0) continue;
      g.dcls_b[c] += dz;
      for (std::size_t d = 0; d < D; ++d) {
        g.dcls_w[d * C + c] += x[d] * dz;
        g.dfp[i * D + d] += s.cls_weight[d * C + c] * dz;
      }
    }
  }
  return rep.value;
}

void scatter(const proto::LossReport& rep, const std::vector<ForegroundFeature>& fg,
             const std::vector<BackgroundFeature>& bg, double weight, std::size_t D, StepGrads& g) {
  for (std::size_t i = 0; i < fg.size() && i < rep.grad_features.size(); ++i) {
    const auto& gr = rep.grad_features[i];
    for (std::size_t d = 0; d < gr.size(); ++d) g.dfp[fg[i].cell * D + d] += weight * gr[d];
  }
  for (std::size_t j = 0; j < bg.size() && j < rep.grad_background.size(); ++j) {
    const auto& gr = rep.grad_background[j];
    for (std::size_t d = 0; d < gr.size(); ++d) g.dfp[bg[j].cell * D + d] += weight * gr[d];
  }
}

std::vector<unsigned char> combine(const std::vector<unsigned char>& a, const std::vector<unsigned char>& b) {
  std::vector<unsigned char> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] && b[i];
  return out;
}

double current_lr(const TrainState& s, const Config& cfg) {
  if (s.total_steps <= 0) return cfg.train.lr;
  const double t = std::min(1.0, static_cast<double>(s.step) / static_cast<double>(s.total_steps));
  return cfg.train.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

void apply_step(const TrainFrame& frame, TrainState& s, const Config& cfg, const StepGrads& g, double loss) {
  const auto hg = proto::head_backward(frame.raw, s.head, g.dfp);
  const double lr = current_lr(s, cfg);
  for (std::size_t i = 0; i < s.head.weight.size(); ++i) s.head.weight[i] -= lr * hg.weight[i];
  for (std::size_t i = 0; i < s.head.bias.size(); ++i) s.head.bias[i] -= lr * hg.bias[i];
  for (std::size_t i = 0; i < s.cls_weight.size(); ++i) s.cls_weight[i] -= lr * g.dcls_w[i];
  for (std::size_t i = 0; i < s.cls_bias.size(); ++i) s.cls_bias[i] -= lr * g.dcls_b[i];
  s.loss_history.push_back(loss);
  ++s.step;
}

StepGrads zero_grads(const Forward& f, const TrainState& s) {
  StepGrads g;
  g.dfp.assign(f.fp.values.size(), 0.0);
  g.dcls_w.assign(s.cls_weight.size(), 0.0);
  g.dcls_b.assign(s.cls_bias.size(), 0.0);
  return g;
}

std::vector<ForegroundFeature> gt_features(const TrainFrame& frame, const FeatureMap& fp) {
  std::vector<ForegroundFeature> out;
  for (const auto& g : frame.gt_centers) {
    ForegroundFeature f;
    const auto v = fp.cell(g.cell);
    f.f.assign(v.begin(), v.end());
    f.cls = g.cls;
    f.cell = g.cell;
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace

TrainState init_state(const TrainData& data, const Config& cfg) {
  TrainState s;
  s.rng = Rng(cfg.train.seed);
  s.head = ProjectionHead::random(data.d_in, cfg.D, s.rng);
  s.cls_weight.assign(static_cast<std::size_t>(cfg.D) * kNumClasses, 0.0);
  for (auto& w : s.cls_weight) w = s.rng.normal(0.0, 0.01);
  s.cls_bias.assign(kNumClasses, std::log(cfg.train.cls_prior / (1.0 - cfg.train.cls_prior)));
  s.bank = PrototypeBank::random(kNumClasses, cfg.K, cfg.D, s.rng);
  s.memory = proto::MemoryBank(kNumClasses, cfg.memory_size, cfg.D);
  return s;
}

void plan_schedule(TrainState& state, const TrainData& data, const Config& cfg, const std::vector<int>& stages) {
  long epochs = 0;
  for (int st : stages) {
    if (st >= 1 && st <= 3) epochs += cfg.train.epochs[static_cast<std::size_t>(st - 1)];
  }
  state.total_steps = state.step + epochs * static_cast<long>(data.frames.size());
}

void run_stage1(const TrainData& data, TrainState& s, const Config& cfg) {
  for (int e = 0; e < cfg.train.epochs[0]; ++e) {
    for (const auto& frame : data.frames) {
      const Forward f = forward(frame, s);
      StepGrads g = zero_grads(f, s);
      double loss = cfg.train.l_reg + cls_loss(f, frame.hg, frame.valid, s, cfg, g);
      const auto fg = gt_features(frame, f.fp);
      const auto rep = proto::memory_loss(fg, s.memory, cfg.loss.tau_t);
      loss += rep.value;
      scatter(rep, fg, {}, 1.0, static_cast<std::size_t>(f.fp.D), g);
      apply_step(frame, s, cfg, g, loss);
      proto::memory_push(s.memory, fg);
    }
  }
  s.bank = proto::kmeans_init(s.memory, cfg.K, s.rng);
  s.prototypes_ready = true;
}

void run_stage2(const TrainData& data, TrainState& s, const Config& cfg) {
  for (int e = 0; e < cfg.train.epochs[1]; ++e) {
    for (const auto& frame : data.frames) {
      const Forward f = forward(frame, s);
      StepGrads g = zero_grads(f, s);
      const std::size_t D = static_cast<std::size_t>(f.fp.D);
      const double l_cls = cls_loss(f, frame.hg, frame.valid, s, cfg, g);
      const auto sim = signals::similarity_map(f.fp, s.bank);
      const auto fg = signals::extract_foreground(f.fp, frame.gt_centers, Heatmap(f.fp.H, f.fp.W, kNumClasses), sim);
      const auto intra = proto::intra_loss(fg, s.bank, cfg.loss.tau_t);
      scatter(intra, fg, {}, cfg.loss.lambda1, D, g);
      double l_inter = 0.0;
      if (cfg.train.stage2_inter) {
        const auto inter = proto::inter_loss(fg, {}, s.bank, cfg.loss.tau_t);
        scatter(inter, fg, {}, cfg.loss.lambda2, D, g);
        l_inter = inter.value;
      }
      const double loss = proto::total_loss(cfg.train.l_reg, l_cls, intra.value, l_inter, cfg.loss.lambda1,
                                            cfg.train.stage2_inter ? cfg.loss.lambda2 : 0.0);
      apply_step(frame, s, cfg, g, loss);
      proto::update_prototypes(s.bank, fg, cfg.loss.alpha);
    }
  }
}

void run_stage3(const TrainData& data, TrainState& s, const Config& cfg) {
  const std::size_t bg_count = static_cast<std::size_t>(kNumClasses) * static_cast<std::size_t>(cfg.K);
  for (int e = 0; e < cfg.train.epochs[2]; ++e) {
    for (const auto& frame : data.frames) {
      const Forward f = forward(frame, s);
      StepGrads g = zero_grads(f, s);
      const std::size_t D = static_cast<std::size_t>(f.fp.D);
      const auto sim = signals::similarity_map(f.fp, s.bank);
      const auto hs = signals::similarity_score_map(sim.s_max, frame.hg, cfg.loss.tau_s, cfg.eps_g);
      const auto fused = signals::fuse(hs, sim.cls, frame.hp, frame.hg);
      const double l_cls = cls_loss(f, fused.hup, combine(frame.valid, fused.mask), s, cfg, g);
      const auto fg = signals::extract_foreground(f.fp, frame.gt_centers, fused.hm, sim);
      const auto bg = signals::sample_background(f.fp, frame.hg, frame.hp, hs, bg_count, s.rng, cfg.eps_g);
      const auto intra = proto::intra_loss(fg, s.bank, cfg.loss.tau_t);
      const auto inter = proto::inter_loss(fg, bg, s.bank, cfg.loss.tau_t);
      scatter(intra, fg, {}, cfg.loss.lambda1, D, g);
      scatter(inter, fg, bg, cfg.loss.lambda2, D, g);
      const double loss =
          proto::total_loss(cfg.train.l_reg, l_cls, intra.value, inter.value, cfg.loss.lambda1, cfg.loss.lambda2);
      apply_step(frame, s, cfg, g, loss);
      proto::update_prototypes(s.bank, fg, cfg.loss.alpha);
    }
  }
}

void run_stages(const TrainData& data, TrainState& state, const Config& cfg, const std::vector<int>& stages) {
  plan_schedule(state, data, cfg, stages);
  for (int st : stages) {
    switch (st) {
      case 1: run_stage1(data, state, cfg); break;
      case 2: run_stage2(data, state, cfg); break;
      case 3: run_stage3(data, state, cfg); break;
      default: throw Error(ErrorCode::InvalidArgument, "unknown stage " + std::to_string(st));
    }
  }
}

MiningReport evaluate_mining(const TrainData& data, const TrainState& state, const Config& cfg) {
  MiningReport r;
  for (const auto& frame : data.frames) {
    const FeatureMap fp = signals::project_features(frame.raw, state.head);
    const auto sim = signals::similarity_map(fp, state.bank);
    const auto hs = signals::similarity_score_map(sim.s_max, frame.hg, cfg.loss.tau_s, cfg.eps_g);
    const auto fused = signals::fuse(hs, sim.cls, frame.hp, frame.hg);
    for (const auto& u : frame.unlabeled) {
      ++r.unlabeled;
      if (fused.hm.at(u.cell, u.cls) > 0.0) ++r.mined;
    }
    for (std::size_t i = 0; i < fp.cells(); ++i) {
      if (frame.object_cell[i] || !frame.valid[i]) continue;
      if (frame.hp.max_at(i) > 0.0) ++r.background_hp_cells;
      if (fused.hm.max_at(i) > 0.0) ++r.background_mined_cells;
    }
  }
  r.mined_recall = r.unlabeled > 0 ? static_cast<double>(r.mined) / r.unlabeled : 0.0;
  r.fp_cell_rate =
      r.background_hp_cells > 0 ? static_cast<double>(r.background_mined_cells) / static_cast<double>(r.background_hp_cells) : 0.0;
  return r;
}

void save_checkpoint(const std::filesystem::path& dir, const TrainState& state) {
  std::filesystem::create_directories(dir);
  proto::save_prototypes(dir / "prototypes.bin", state.bank, &state.memory);
  proto::save_head(dir / "head.bin", state.head, state.cls_weight, state.cls_bias);
  nlohmann::ordered_json j;
  j["steps"] = state.step;
  j["loss"] = state.loss_history;
  std::ofstream out(dir / "train_log.json", std::ios::trunc);
  out << j.dump() << "\n";
}

void load_checkpoint(const std::filesystem::path& dir, TrainState& state) {
  state.bank = proto::load_prototypes(dir / "prototypes.bin", &state.memory);
  state.head = proto::load_head(dir / "head.bin", &state.cls_weight, &state.cls_bias);
  state.prototypes_ready = true;
}

}  // namespace spl::pipeline
