#include "spl/config.hpp"

#include <cctype>
#include <functional>
#include <sstream>
#include <variant>

#include "text_util.hpp"

namespace spl {

std::string_view train_mode_name(TrainMode m) { return m == TrainMode::Sparse ? "sparse" : "unsupervised"; }

Config default_config() { return Config{}; }

namespace {

struct Range {
  double* lo;
  double* hi;
};

static_assert(std::is_same_v<std::size_t, std::uint64_t>, "size_t keys share the u64 slot");

using Slot = std::variant<double*, int*, bool*, std::uint64_t*, geom::Vec3*, Range,
                          std::array<int, 3>*, std::array<double, 3>*, TrainMode*>;

struct Binding {
  std::string section;
  std::string key;
  Slot slot;
};

std::vector<Binding> bindings(Config& c) {
  std::vector<Binding> b = {
      {"ingest", "aggregation_window", &c.labels.aggregation_window},
      {"ingest", "ground_iterations", &c.labels.ground.iterations},
      {"ingest", "ground_inlier_dist", &c.labels.ground.inlier_dist},
      {"ingest", "ground_cell", &c.labels.ground.cell},
      {"ingest", "ground_min_inlier_ratio", &c.labels.ground.min_inlier_ratio},
      {"ingest", "ground_candidate_band", &c.labels.ground.candidate_band},
      {"ingest", "ground_low_quantile", &c.labels.ground.low_quantile},
      {"ingest", "ground_max_tilt_deg", &c.labels.ground.max_tilt_deg},
      {"ingest", "ground_score_sample", &c.labels.ground.score_sample},
      {"ingest", "ground_seed", &c.labels.ground.seed},
      {"pointlabel", "dilate_px", &c.labels.points.dilate_px},
      {"pointlabel", "knn_k", &c.labels.points.knn_k},
      {"pointlabel", "refine", &c.labels.points.refine},
      {"pointlabel", "enable_point_labels", &c.labels.enable_point_labels},
  };
  for (ObjectClass cls : kAllClasses) {
    auto& g = c.labels.geometry[cls];
    std::string s(class_name(cls));
    for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    b.push_back({s, "h_min", &g.h_min});
    b.push_back({s, "h_max", &g.h_max});
    b.push_back({s, "dbscan_eps", &g.dbscan_eps});
    b.push_back({s, "dbscan_min_samples", &g.dbscan_min_samples});
    b.push_back({s, "r1", &g.r1});
    b.push_back({s, "r2", &g.r2});
    b.push_back({s, "min_points_for_box", &g.min_points_for_box});
    b.push_back({s, "min_size", &g.min_size});
    b.push_back({s, "avg_size", &g.avg_size});
    b.push_back({s, "max_size", &g.max_size});
  }
  const std::vector<Binding> rest = {
      {"boxlabel", "lshape_step_deg", &c.labels.lshape.step_deg},
      {"boxlabel", "lshape_min_edge_dist", &c.labels.lshape.min_edge_dist},
      {"boxlabel", "lshape_refine_levels", &c.labels.lshape.refine_levels},
      {"boxlabel", "lshape_median_edges", &c.labels.lshape.median_edges},
      {"boxlabel", "spr_distance", &c.labels.spr_distance},
      {"boxlabel", "spr_threshold", &c.labels.spr_threshold},
      {"boxlabel", "temporal_refine", &c.labels.temporal_refine},
      {"boxlabel", "v_still", &c.labels.temporal.v_still},
      {"boxlabel", "v_dyn", &c.labels.v_dyn},
      {"boxlabel", "dyn_min_frames", &c.labels.dyn_min_frames},
      {"boxlabel", "align_iou", &c.labels.split.align_iou},
      {"boxlabel", "overlap_iou", &c.labels.split.overlap_iou},
      {"signals", "x_range", Range{&c.grid.x_min, &c.grid.x_max}},
      {"signals", "y_range", Range{&c.grid.y_min, &c.grid.y_max}},
      {"signals", "cell", &c.grid.cell},
      {"signals", "gaussian_overlap", &c.heatmap.min_overlap},
      {"signals", "min_radius", &c.heatmap.min_radius},
      {"signals", "pseudo_peak", &c.heatmap.peak},
      {"signals", "eps_g", &c.eps_g},
      {"proto", "K", &c.K},
      {"proto", "D", &c.D},
      {"proto", "tau_s", &c.loss.tau_s},
      {"proto", "tau_t", &c.loss.tau_t},
      {"proto", "alpha", &c.loss.alpha},
      {"proto", "lambda1", &c.loss.lambda1},
      {"proto", "lambda2", &c.loss.lambda2},
      {"proto", "focal_alpha", &c.loss.focal_alpha},
      {"proto", "focal_beta", &c.loss.focal_beta},
      {"proto", "memory_size", &c.memory_size},
      {"proto", "kmeans_max_iter", &c.kmeans_max_iter},
      {"proto", "kmeans_tol", &c.kmeans_tol},
      {"train", "mode", &c.train.mode},
      {"train", "epochs", &c.train.epochs},
      {"train", "lr", &c.train.lr},
      {"train", "seed", &c.train.seed},
      {"train", "stage2_inter", &c.train.stage2_inter},
      {"train", "l_reg", &c.train.l_reg},
      {"train", "cls_prior", &c.train.cls_prior},
      {"features", "d_in", &c.features.d_in},
      {"features", "modes_per_class", &c.features.modes_per_class},
      {"features", "background_modes", &c.features.background_modes},
      {"features", "nuisance_dims", &c.features.nuisance_dims},
      {"features", "nuisance_sigma", &c.features.nuisance_sigma},
      {"features", "noise_sigma", &c.features.noise_sigma},
      {"features", "fov_deg", &c.features.fov_deg},
      {"features", "max_range", &c.features.max_range},
      {"features", "seed", &c.features.seed},
      {"eval", "iou", &c.eval.iou},
      {"eval", "point_distance", &c.eval.point_distance},
  };
  b.insert(b.end(), rest.begin(), rest.end());
  return b;
}

[[noreturn]] void bad(const std::string& key, const std::string& msg) {
  throw Error(ErrorCode::ConfigError, "key '" + key + "': " + msg);
}

std::vector<double> fixed_array(const toml::Table& t, const std::string& key, std::size_t n) {
  auto v = t.numbers(key);
  if (v.size() != n) bad(key, "expected " + std::to_string(n) + " numbers");
  return v;
}

void read_slot(const toml::Table& t, const std::string& key, Slot& slot) {
  std::visit(
      [&](auto&& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, double*>) {
          *p = t.number(key);
        } else if constexpr (std::is_same_v<T, int*>) {
          *p = static_cast<int>(t.integer(key));
        } else if constexpr (std::is_same_v<T, bool*>) {
          *p = t.boolean_or(key, *p);
        } else if constexpr (std::is_same_v<T, std::uint64_t*>) {
          const auto v = t.integer(key);
          if (v < 0) bad(key, "must be non-negative");
          *p = static_cast<std::uint64_t>(v);
        } else if constexpr (std::is_same_v<T, geom::Vec3*>) {
          const auto v = fixed_array(t, key, 3);
          *p = {v[0], v[1], v[2]};
        } else if constexpr (std::is_same_v<T, Range>) {
          const auto v = fixed_array(t, key, 2);
          *p.lo = v[0];
          *p.hi = v[1];
        } else if constexpr (std::is_same_v<T, std::array<int, 3>*>) {
          const auto v = fixed_array(t, key, 3);
          for (std::size_t i = 0; i < 3; ++i) {
            if (v[i] != static_cast<double>(static_cast<int>(v[i]))) bad(key, "expected integers");
            (*p)[i] = static_cast<int>(v[i]);
          }
        } else if constexpr (std::is_same_v<T, std::array<double, 3>*>) {
          const auto v = fixed_array(t, key, 3);
          for (std::size_t i = 0; i < 3; ++i) (*p)[i] = v[i];
        } else if constexpr (std::is_same_v<T, TrainMode*>) {
          const auto s = t.string_or(key, "unsupervised");
          if (s == "unsupervised") {
            *p = TrainMode::Unsupervised;
          } else if (s == "sparse") {
            *p = TrainMode::Sparse;
          } else {
            bad(key, "expected \"unsupervised\" or \"sparse\"");
          }
        }
      },
      slot);
}

std::string render_slot(const Slot& slot) {
  using detail::format_double;
  auto num = [](double v) {
    std::string s = format_double(v);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
  };
  return std::visit(
      [&](auto&& p) -> std::string {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, double*>) {
          return num(*p);
        } else if constexpr (std::is_same_v<T, int*> || std::is_same_v<T, std::uint64_t*>) {
          return std::to_string(*p);
        } else if constexpr (std::is_same_v<T, bool*>) {
          return *p ? "true" : "false";
        } else if constexpr (std::is_same_v<T, geom::Vec3*>) {
          return "[" + num(p->x) + ", " + num(p->y) + ", " + num(p->z) + "]";
        } else if constexpr (std::is_same_v<T, Range>) {
          return "[" + num(*p.lo) + ", " + num(*p.hi) + "]";
        } else if constexpr (std::is_same_v<T, std::array<int, 3>*>) {
          return "[" + std::to_string((*p)[0]) + ", " + std::to_string((*p)[1]) + ", " + std::to_string((*p)[2]) + "]";
        } else if constexpr (std::is_same_v<T, std::array<double, 3>*>) {
          return "[" + num((*p)[0]) + ", " + num((*p)[1]) + ", " + num((*p)[2]) + "]";
        } else {
          return "\"" + std::string(train_mode_name(*p)) + "\"";
        }
      },
      slot);
}

}  // namespace

void validate(const Config& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::ConfigError, what);
  };
  require(c.labels.aggregation_window >= 0, "ingest.aggregation_window must be >= 0");
  require(c.labels.points.dilate_px >= 0, "pointlabel.dilate_px must be >= 0");
  require(c.labels.points.knn_k >= 1, "pointlabel.knn_k must be >= 1");
  for (ObjectClass cls : kAllClasses) {
    require(c.labels.geometry[cls].is_valid(), std::string(class_name(cls)) + ": invalid class geometry");
  }
  require(c.labels.lshape.step_deg > 0.0 && c.labels.lshape.step_deg <= 90.0, "boxlabel.lshape_step_deg out of range");
  require(c.labels.lshape.min_edge_dist > 0.0, "boxlabel.lshape_min_edge_dist must be > 0");
  require(c.labels.lshape.refine_levels >= 0, "boxlabel.lshape_refine_levels must be >= 0");
  require(c.labels.spr_distance > 0.0, "boxlabel.spr_distance must be > 0");
  require(c.labels.dyn_min_frames >= 1, "boxlabel.dyn_min_frames must be >= 1");
  require(c.grid.is_valid() && c.grid.x_max > c.grid.x_min && c.grid.y_max > c.grid.y_min, "signals: invalid grid");
  require(c.heatmap.min_overlap > 0.0 && c.heatmap.min_overlap < 1.0, "signals.gaussian_overlap must be in (0, 1)");
  require(c.eps_g > 0.0, "signals.eps_g must be > 0");
  require(c.loss.is_valid(), "proto: invalid loss configuration");
  require(c.K >= 1 && c.D >= 1, "proto.K and proto.D must be >= 1");
  for (int e : c.train.epochs) require(e >= 0, "train.epochs must be >= 0");
  require(c.train.lr > 0.0, "train.lr must be > 0");
  require(c.train.cls_prior > 0.0 && c.train.cls_prior < 1.0, "train.cls_prior must be in (0, 1)");
  require(c.features.d_in >= 1 && c.features.modes_per_class >= 1 && c.features.background_modes >= 1,
          "features: dims and mode counts must be >= 1");
  for (double v : c.eval.iou) require(v > 0.0 && v <= 1.0, "eval.iou entries must be in (0, 1]");
  require(c.eval.point_distance > 0.0, "eval.point_distance must be > 0");
}

Config config_from_toml(const toml::Document& doc) {
  Config c = default_config();
  for (auto& b : bindings(c)) {
    const std::string key = b.section + "." + b.key;
    if (doc.root.contains(key)) read_slot(doc.root, key, b.slot);
  }
  validate(c);
  return c;
}

Config load_config(const std::filesystem::path& file) { return config_from_toml(toml::parse_file(file)); }

std::string config_to_toml(const Config& cfg) {
  Config c = cfg;
  std::ostringstream out;
  std::string section;
  for (auto& b : bindings(c)) {
    if (b.section != section) {
      if (!section.empty()) out << "\n";
      section = b.section;
      out << "[" << section << "]\n";
    }
    out << b.key << " = " << render_slot(b.slot) << "\n";
  }
  return out.str();
}

}  // namespace spl
