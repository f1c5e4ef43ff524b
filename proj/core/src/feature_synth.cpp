#include <algorithm>
#include <cmath>
#include <numbers>

#include "spl/pipeline.hpp"

namespace spl::pipeline {

namespace {

struct Dictionary {
  std::vector<std::vector<double>> class_modes;  // (class * modes + mode) -> d_in
  std::vector<std::vector<double>> background;
  std::vector<std::vector<double>> nuisance;
};

std::vector<double> random_unit(int d, Rng& rng) {
  std::vector<double> v(static_cast<std::size_t>(d));
  for (auto& x : v) x = rng.normal();
  normalize_in_place(v);
  return v;
}

// The appearance dictionary depends only on the feature seed, so every frame
// of a run shares it.
Dictionary make_dictionary(const FeatureSynthConfig& cfg) {
  Rng rng(cfg.seed ^ 0x5eedf00dULL);
  Dictionary d;
  for (int i = 0; i < kNumClasses * cfg.modes_per_class; ++i) d.class_modes.push_back(random_unit(cfg.d_in, rng));
  for (int i = 0; i < cfg.background_modes; ++i) d.background.push_back(random_unit(cfg.d_in, rng));
  for (int i = 0; i < cfg.nuisance_dims; ++i) d.nuisance.push_back(random_unit(cfg.d_in, rng));
  return d;
}

bool in_view(const FeatureSynthConfig& cfg, double x, double y) {
  if (x <= 0.0) return false;
  const double range = std::hypot(x, y);
  return range <= cfg.max_range && std::abs(std::atan2(y, x)) <= cfg.fov_deg * std::numbers::pi / 180.0;
}

}  // namespace

FeatureMap synth_features(const std::vector<SceneObject>& objects, const BevGridSpec& grid,
                          const FeatureSynthConfig& cfg, Rng& rng, std::vector<unsigned char>* object_cell) {
  const Dictionary dict = make_dictionary(cfg);
  const int W = grid.width(), H = grid.height();
  FeatureMap fm(H, W, cfg.d_in);
  std::vector<int> owner(fm.cells(), -1);
  for (std::size_t o = 0; o < objects.size(); ++o) {
    const auto& box = objects[o].box;
    const long center = signals::center_cell(grid, box.cx, box.cy);
    if (center >= 0) owner[static_cast<std::size_t>(center)] = static_cast<int>(o);
    const double reach = 0.5 * std::hypot(box.l, box.w);
    const int c0 = std::max(0, static_cast<int>(std::floor(grid.col_f(box.cx - reach))));
    const int c1 = std::min(W - 1, static_cast<int>(std::floor(grid.col_f(box.cx + reach))));
    const int r0 = std::max(0, static_cast<int>(std::floor(grid.row_f(box.cy - reach))));
    const int r1 = std::min(H - 1, static_cast<int>(std::floor(grid.row_f(box.cy + reach))));
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const geom::Vec3 p{grid.cell_center_x(c), grid.cell_center_y(r), box.cz};
        const geom::Vec3 q = geom::to_box_frame(box, p);
        if (std::abs(q.x) <= 0.5 * box.l && std::abs(q.y) <= 0.5 * box.w) {
          owner[static_cast<std::size_t>(r) * W + c] = static_cast<int>(o);
        }
      }
    }
  }
  if (object_cell) object_cell->assign(fm.cells(), 0);

  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * W + c;
      const int o = owner[i];
      if (o < 0 && !in_view(cfg, grid.cell_center_x(c), grid.cell_center_y(r))) continue;
      auto v = fm.cell(i);
      const std::vector<double>* base = nullptr;
      if (o >= 0) {
        const auto& obj = objects[static_cast<std::size_t>(o)];
        const int mode = ((obj.mode % cfg.modes_per_class) + cfg.modes_per_class) % cfg.modes_per_class;
        base = &dict.class_modes[static_cast<std::size_t>(class_index(obj.cls) * cfg.modes_per_class + mode)];
        if (object_cell) (*object_cell)[i] = 1;
      } else {
        base = &dict.background[static_cast<std::size_t>(rng.below(dict.background.size()))];
      }
      for (std::size_t d = 0; d < v.size(); ++d) v[d] = (*base)[d];
      for (const auto& u : dict.nuisance) {
        const double a = rng.normal(0.0, cfg.nuisance_sigma);
        for (std::size_t d = 0; d < v.size(); ++d) v[d] += a * u[d];
      }
      for (auto& x : v) x += rng.normal(0.0, cfg.noise_sigma);
    }
  }
  return fm;
}

namespace {

std::vector<signals::HeatmapObject> heat_objects(const std::vector<boxlabel::BoxLabel>& boxes) {
  std::vector<signals::HeatmapObject> out;
  for (const auto& b : boxes) out.push_back({b.cls, b.box.cx, b.box.cy, b.box.l, b.box.w});
  return out;
}

}  // namespace

TrainFrame make_train_frame(int frame_id, const std::vector<SceneObject>& scene, const boxlabel::LabelSet& labels,
                            const Config& cfg, Rng& rng) {
  TrainFrame f;
  f.frame_id = frame_id;
  f.raw = synth_features(scene, cfg.grid, cfg.features, rng, &f.object_cell);
  f.valid.assign(f.raw.cells(), 0);
  for (std::size_t i = 0; i < f.raw.cells(); ++i) {
    const auto v = f.raw.cell(i);
    f.valid[i] = std::any_of(v.begin(), v.end(), [](double x) { return x != 0.0; });
  }
  f.hg = signals::gaussian_heatmap(heat_objects(labels.gt_supervision), cfg.grid, {cfg.heatmap.min_overlap, cfg.heatmap.min_radius, 1.0});
  auto pseudo = heat_objects(labels.pseudo_boxes);
  for (const auto& p : labels.pseudo_points) {
    const auto& size = cfg.labels.geometry[p.cls].min_size;
    pseudo.push_back({p.cls, p.position.x, p.position.y, size.x, size.y});
  }
  f.hp = signals::gaussian_heatmap(pseudo, cfg.grid, cfg.heatmap);
  for (const auto& b : labels.gt_supervision) {
    const long cell = signals::center_cell(cfg.grid, b.box.cx, b.box.cy);
    if (cell >= 0) f.gt_centers.push_back({static_cast<std::size_t>(cell), class_index(b.cls)});
  }
  for (const auto& obj : scene) {
    const bool supervised = std::any_of(labels.gt_supervision.begin(), labels.gt_supervision.end(), [&](const boxlabel::BoxLabel& b) {
      return b.cls == obj.cls && std::hypot(b.box.cx - obj.box.cx, b.box.cy - obj.box.cy) <= 1.0;
    });
    const long cell = signals::center_cell(cfg.grid, obj.box.cx, obj.box.cy);
    if (!supervised && cell >= 0) f.unlabeled.push_back({static_cast<std::size_t>(cell), class_index(obj.cls)});
  }
  return f;
}

TrainData load_train_data(const std::filesystem::path& data, const Config& cfg) {
  const auto gt = read_label_dir(data / "gt");
  const auto labels = read_label_dir(data / "labels");
  TrainData td;
  td.grid = cfg.grid;
  td.d_in = cfg.features.d_in;
  Rng rng(cfg.features.seed);
  for (const auto& [frame, truth] : gt) {
    std::vector<SceneObject> scene;
    for (const auto& b : truth.gt_supervision) scene.push_back({b.cls, b.box, b.track_id});
    auto it = labels.find(frame);
    if (it == labels.end()) throw Error(ErrorCode::FrameMismatch, "no label file for frame " + std::to_string(frame));
    td.frames.push_back(make_train_frame(frame, scene, it->second, cfg, rng));
  }
  return td;
}

TrainData make_separable_data(const Config& cfg, const SeparableSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  TrainData td;
  td.grid = cfg.grid;
  td.d_in = cfg.features.d_in;
  const double fov = cfg.features.fov_deg * std::numbers::pi / 180.0;
  const double x_lo = std::max(cfg.grid.x_min, 0.0) + 4.0;
  const double x_hi = std::min(cfg.grid.x_max, cfg.features.max_range) - 4.0;
  int track = 0;
  for (int fi = 0; fi < spec.frames; ++fi) {
    std::vector<SceneObject> scene;
    std::vector<geom::Vec2> taken;
    auto place = [&](geom::Vec2& out) {
      for (int attempt = 0; attempt < 200; ++attempt) {
        const double x = rng.uniform(x_lo, x_hi);
        const double ymax = std::min(x * std::tan(fov) * 0.9, std::min(-cfg.grid.y_min, cfg.grid.y_max) - 4.0);
        const double y = rng.uniform(-ymax, ymax);
        const bool clear = std::all_of(taken.begin(), taken.end(), [&](const geom::Vec2& t) { return std::hypot(t.x - x, t.y - y) > 6.0; });
        if (clear) {
          out = {x, y};
          taken.push_back(out);
          return true;
        }
      }
      return false;
    };
    boxlabel::LabelSet labels;
    for (int i = 0; i < spec.objects_per_frame; ++i) {
      geom::Vec2 pos;
      if (!place(pos)) break;
      SceneObject obj;
      obj.cls = kAllClasses[static_cast<std::size_t>(rng.below(kNumClasses))];
      const auto& avg = cfg.labels.geometry[obj.cls].avg_size;
      obj.box = {pos.x, pos.y, 0.5 * avg.z, avg.x * rng.uniform(0.9, 1.1), avg.y * rng.uniform(0.9, 1.1), avg.z,
                 rng.uniform(-std::numbers::pi, std::numbers::pi)};
      obj.mode = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.features.modes_per_class)));
      scene.push_back(obj);
      boxlabel::BoxLabel b;
      b.box = obj.box;
      b.cls = obj.cls;
      b.track_id = track++;
      b.frame_id = fi;
      if (i < static_cast<int>(std::lround(spec.labeled_fraction * spec.objects_per_frame))) {
        labels.gt_supervision.push_back(b);
      } else if (rng.uniform() < 0.5) {
        b.box.cx += rng.normal(0.0, 0.2);
        b.box.cy += rng.normal(0.0, 0.2);
        labels.pseudo_boxes.push_back(b);
      } else {
        pointlabel::PointLabel p;
        p.position = {obj.box.cx + rng.normal(0.0, 0.2), obj.box.cy + rng.normal(0.0, 0.2), obj.box.cz};
        p.cls = obj.cls;
        p.track_id = b.track_id;
        p.frame_id = fi;
        labels.pseudo_points.push_back(p);
      }
    }
    for (int i = 0; i < spec.false_pseudo_per_frame; ++i) {
      geom::Vec2 pos;
      if (!place(pos)) break;
      pointlabel::PointLabel p;
      p.position = {pos.x, pos.y, 0.8};
      p.cls = kAllClasses[static_cast<std::size_t>(rng.below(kNumClasses))];
      p.track_id = track++;
      p.frame_id = fi;
      labels.pseudo_points.push_back(p);
    }
    td.frames.push_back(make_train_frame(fi, scene, labels, cfg, rng));
  }
  return td;
}

}  // namespace spl::pipeline
