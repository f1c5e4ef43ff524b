#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "spl/pipeline.hpp"
#include "support.hpp"

using namespace spl;
using namespace spl::pipeline;
using boxlabel::BoxLabel;
using boxlabel::LabelSet;
namespace fs = std::filesystem;

namespace {

BoxLabel box_label(double x, double y, ObjectClass cls, int track, int frame) {
  BoxLabel b;
  b.box = {x, y, -0.98, 4.5, 1.8, 1.5, 0.0};
  if (cls != ObjectClass::Vehicle) b.box = {x, y, -0.88, 0.7, 0.7, 1.7, 0.0};
  b.cls = cls;
  b.track_id = track;
  b.frame_id = frame;
  return b;
}

std::map<int, std::vector<BoxLabel>> gt_of(const std::vector<std::vector<ingest::GtLabel>>& gt) {
  std::map<int, std::vector<BoxLabel>> out;
  for (const auto& frame : gt) {
    for (const auto& g : frame) {
      BoxLabel b;
      b.box = g.box;
      b.cls = g.cls;
      b.track_id = g.track_id;
      b.frame_id = g.frame_id;
      out[g.frame_id].push_back(b);
    }
  }
  return out;
}

// Small grid and short schedule so the stages run in seconds.
Config small_config() {
  Config c = default_config();
  c.grid = {0.0, 24.0, -12.0, 12.0, 0.5};
  c.train.epochs = {2, 2, 2};
  return c;
}

SeparableSpec small_spec() {
  SeparableSpec s;
  s.frames = 10;
  s.objects_per_frame = 8;
  s.labeled_fraction = 0.5;
  return s;
}

ingest::SynthObject object(ObjectClass cls, double x, double y) {
  ingest::SynthObject o;
  o.cls = cls;
  o.x = x;
  o.y = y;
  if (cls == ObjectClass::Pedestrian) {
    o.l = 0.7;
    o.w = 0.7;
    o.h = 1.75;
    o.clearance = 0.05;
  } else {
    o.clearance = 0.2;
  }
  return o;
}

}  // namespace

TEST_CASE("label files round trip") {
  const auto dir = fs::temp_directory_path() / "spl_test_pipeline" / "labels";
  fs::remove_all(dir);
  LabelSet set;
  set.gt_supervision.push_back(box_label(10, 2, ObjectClass::Vehicle, 1, 3));
  set.gt_supervision[0].velocity = geom::Vec3{2.5, 0.0, 0.0};
  set.gt_supervision[0].spr = 0.93;
  set.pseudo_boxes.push_back(box_label(20, -3, ObjectClass::Pedestrian, 2, 3));
  set.pseudo_points.push_back({{30, 4, -1}, ObjectClass::Cyclist, 5, 3, 12});
  write_label_dir(dir, {{3, set}});
  const auto back = read_label_dir(dir);
  REQUIRE(back.size() == 1);
  const auto& b = back.at(3);
  REQUIRE(b.gt_supervision.size() == 1);
  CHECK(b.gt_supervision[0].box.cx == doctest::Approx(10));
  CHECK(b.gt_supervision[0].velocity->x == doctest::Approx(2.5));
  CHECK(*b.gt_supervision[0].spr == doctest::Approx(0.93));
  REQUIRE(b.pseudo_boxes.size() == 1);
  CHECK(b.pseudo_boxes[0].cls == ObjectClass::Pedestrian);
  REQUIRE(b.pseudo_points.size() == 1);
  CHECK(b.pseudo_points[0].track_id == 5);
  CHECK(b.pseudo_points[0].position.x == doctest::Approx(30));
}

TEST_CASE("label evaluation") {
  const EvalConfig cfg;
  const std::map<int, std::vector<BoxLabel>> gt = {{0, {box_label(10, 0, ObjectClass::Vehicle, 1, 0)}}};
  SUBCASE("perfect predictions") {
    std::map<int, LabelSet> pred;
    pred[0].pseudo_boxes = gt.at(0);
    const auto r = eval_labels(pred, gt, cfg);
    CHECK(r.overall.precision == 1.0);
    CHECK(r.overall.recall == 1.0);
  }
  SUBCASE("no predictions") {
    const auto r = eval_labels({{0, {}}}, gt, cfg);
    CHECK(r.overall.precision == 0.0);
    CHECK(r.overall.recall == 0.0);
    CHECK(r.overall.fn == 1);
  }
  SUBCASE("two predictions on one object") {
    std::map<int, LabelSet> pred;
    pred[0].pseudo_boxes = {box_label(10, 0, ObjectClass::Vehicle, 1, 0), box_label(10.2, 0, ObjectClass::Vehicle, 2, 0)};
    const auto r = eval_labels(pred, gt, cfg);
    CHECK(r.overall.tp == 1);
    CHECK(r.overall.fp == 1);
  }
  SUBCASE("point labels match by distance") {
    std::map<int, LabelSet> pred;
    pred[0].pseudo_points = {{{10.5, 0.3, -1}, ObjectClass::Vehicle, 1, 0, 8}, {{15, 0, -1}, ObjectClass::Vehicle, 2, 0, 8}};
    const auto r = eval_labels(pred, gt, cfg);
    CHECK(r.overall.tp == 1);
    CHECK(r.overall.fp == 1);
  }
  SUBCASE("frame sets must agree") { CHECK_THROWS_AS(eval_labels({{1, {}}}, gt, cfg), Error); }
}

TEST_CASE("empty scene gives empty label sets") {
  ingest::SynthSceneSpec spec;
  spec.n_frames = 3;
  const auto scene = ingest::synth_scene(spec);
  LabelGenStats stats;
  const auto labels = generate_labels(scene.frames, default_config().labels, nullptr, &stats);
  CHECK(labels.size() == 3);
  for (const auto& [frame, set] : labels) {
    CHECK(set.gt_supervision.empty());
    CHECK(set.pseudo_boxes.empty());
    CHECK(set.pseudo_points.empty());
  }
  CHECK(stats.objects == 0);
}

TEST_CASE("a sparse distant car yields a point label") {
  ingest::SynthSceneSpec spec;
  spec.n_frames = 3;
  spec.lidar.azimuth_res_deg = 1.5;
  spec.objects = {object(ObjectClass::Vehicle, 60, 0)};
  const auto scene = ingest::synth_scene(spec);
  const auto cfg = default_config().labels;
  const auto labels = generate_labels(scene.frames, cfg);
  const auto& set = labels.at(1);
  CHECK(set.gt_supervision.empty());
  CHECK(set.pseudo_boxes.empty());
  REQUIRE(set.pseudo_points.size() == 1);
  CHECK(set.pseudo_points[0].num_points < cfg.geometry[ObjectClass::Vehicle].min_points_for_box);
  CHECK(set.pseudo_points[0].position.x == doctest::Approx(60).epsilon(0.05));
}

TEST_CASE("clean scene labels nearly every object") {
  ingest::SynthSceneSpec spec;
  spec.n_frames = 5;
  // No object sits in another's angular shadow.
  spec.objects = {object(ObjectClass::Vehicle, 12, 0),      object(ObjectClass::Vehicle, 14, -8),
                  object(ObjectClass::Vehicle, 14, 8),      object(ObjectClass::Vehicle, 24, -5),
                  object(ObjectClass::Vehicle, 24, 5),      object(ObjectClass::Pedestrian, 8, -3),
                  object(ObjectClass::Pedestrian, 8, 3),    object(ObjectClass::Pedestrian, 18, -5.5)};
  const auto scene = ingest::synth_scene(spec);
  const auto gt = gt_of(scene.gt);
  const auto labels = generate_labels(scene.frames, default_config().labels);
  for (const auto& [frame, objs] : gt) {
    CHECK(objs.size() == 8);
    const auto r = eval_labels({{frame, labels.at(frame)}}, {{frame, objs}}, default_config().eval);
    CHECK(r.overall.tp >= 7);
  }
}

TEST_CASE("label generation is deterministic") {
  auto spec = ingest::standard_benchmark_spec();
  spec.n_frames = 4;
  const auto scene = ingest::synth_scene(spec);
  const auto dir = fs::temp_directory_path() / "spl_test_pipeline";
  write_label_dir(dir / "a", generate_labels(scene.frames, default_config().labels));
  write_label_dir(dir / "b", generate_labels(scene.frames, default_config().labels));
  for (const auto& e : fs::directory_iterator(dir / "a")) {
    std::ifstream fa(e.path()), fb(dir / "b" / e.path().filename());
    const std::string sa{std::istreambuf_iterator<char>(fa), {}}, sb{std::istreambuf_iterator<char>(fb), {}};
    CHECK(sa == sb);
  }
}

TEST_CASE("stage 1 builds class-aligned prototypes") {
  const Config cfg = small_config();
  const auto data = make_separable_data(cfg, small_spec(), 3);
  auto a = init_state(data, cfg);
  run_stages(data, a, cfg, {1});
  CHECK(a.prototypes_ready);

  // Every class's GT features sit closer to its own prototypes.
  std::array<std::vector<double>, kNumClasses> mean;
  for (auto& m : mean) m.assign(static_cast<std::size_t>(cfg.D), 0.0);
  for (const auto& f : data.frames) {
    const auto fp = signals::project_features(f.raw, a.head);
    for (const auto& g : f.gt_centers) {
      for (int d = 0; d < cfg.D; ++d) mean[static_cast<std::size_t>(g.cls)][static_cast<std::size_t>(d)] += fp.cell(g.cell)[static_cast<std::size_t>(d)];
    }
  }
  for (int c = 0; c < kNumClasses; ++c) {
    auto& m = mean[static_cast<std::size_t>(c)];
    normalize_in_place(m);
    double own = -2.0, other = -2.0;
    for (int pc = 0; pc < kNumClasses; ++pc) {
      for (int k = 0; k < cfg.K; ++k) {
        const double s = dot(m, a.bank.at(pc, k));
        (pc == c ? own : other) = std::max(pc == c ? own : other, s);
      }
    }
    CHECK(own > other);
  }

  auto b = init_state(data, cfg);
  run_stages(data, b, cfg, {1});
  CHECK(a.bank.P == b.bank.P);
}

TEST_CASE("stage 1 without epochs clusters the prefilled memory") {
  Config cfg = small_config();
  cfg.train.epochs[0] = 0;
  const auto data = make_separable_data(cfg, small_spec(), 4);
  auto s = init_state(data, cfg);
  Rng rng(9);
  for (int c = 0; c < kNumClasses; ++c) {
    for (int i = 0; i < 20; ++i) s.memory.push(c, spl::testing::random_unit(cfg.D, rng));
  }
  const auto before = s.head.weight;
  Rng replay = s.rng;
  const auto want = proto::kmeans_init(s.memory, cfg.K, replay);
  run_stage1(data, s, cfg);
  CHECK(s.head.weight == before);
  CHECK(s.bank.P == want.P);
}

TEST_CASE("stage 2 uses ground truth only") {
  const Config cfg = small_config();
  const auto data = make_separable_data(cfg, small_spec(), 5);
  auto base = init_state(data, cfg);
  run_stages(data, base, cfg, {1});

  // Pseudo priors do not reach stage 2.
  auto stripped = data;
  for (auto& f : stripped.frames) std::fill(f.hp.values.begin(), f.hp.values.end(), 0.0);
  auto a = base, b = base;
  run_stage2(data, a, cfg);
  run_stage2(stripped, b, cfg);
  CHECK(a.bank.P == b.bank.P);
  CHECK(a.loss_history == b.loss_history);

  // Without GT objects the prototypes never move.
  auto empty = data;
  for (auto& f : empty.frames) {
    f.gt_centers.clear();
    std::fill(f.hg.values.begin(), f.hg.values.end(), 0.0);
  }
  auto c = base;
  run_stage2(empty, c, cfg);
  CHECK(c.bank.P == base.bank.P);
}

TEST_CASE("stage 3 mining and determinism") {
  const Config cfg = small_config();
  const auto data = make_separable_data(cfg, small_spec(), 6);
  auto a = init_state(data, cfg), b = init_state(data, cfg);
  run_stages(data, a, cfg, {1, 2, 3});
  run_stages(data, b, cfg, {1, 2, 3});
  CHECK(a.loss_history == b.loss_history);
  CHECK(a.bank.P == b.bank.P);
  CHECK(a.step == static_cast<long>(6 * data.frames.size()));

  Config saturated = cfg;
  saturated.loss.tau_s = 1.01;
  const auto none = evaluate_mining(data, a, saturated);
  CHECK(none.mined == 0);
  CHECK(none.background_mined_cells == 0);
  CHECK(none.unlabeled > 0);

  const auto dir = fs::temp_directory_path() / "spl_test_pipeline" / "ckpt";
  save_checkpoint(dir, a);
  TrainState loaded;
  load_checkpoint(dir, loaded);
  CHECK(loaded.bank.K == cfg.K);
  for (std::size_t i = 0; i < a.bank.P.size(); ++i) CHECK(loaded.bank.P[i] == doctest::Approx(a.bank.P[i]).epsilon(1e-6));
}

TEST_CASE("config round trip and validation") {
  const Config c = default_config();
  const auto text = config_to_toml(c);
  CHECK(config_to_toml(config_from_toml(toml::parse(text))) == text);
  CHECK(c.K == 5);
  CHECK(c.D == 64);
  CHECK(c.loss.tau_s == 0.9);
  CHECK(c.memory_size == 1000);
  CHECK_THROWS_AS(config_from_toml(toml::parse("[proto]\ntau_t = -1.0\n")), Error);
  CHECK_THROWS_AS(config_from_toml(toml::parse("[proto]\nK = \"five\"\n")), Error);
}

TEST_CASE("stage 2 converges on a fixed batch") {
  Config cfg = small_config();
  const auto data = make_separable_data(cfg, small_spec(), 7);
  auto s = init_state(data, cfg);
  run_stages(data, s, cfg, {1});
  TrainData batch = data;
  batch.frames.resize(1);
  cfg.train.epochs[1] = 200;
  s.loss_history.clear();
  run_stages(batch, s, cfg, {2});
  REQUIRE(s.loss_history.size() == 200);
  // With unit features the contrastive terms cannot fall below the value at
  // which every negative sits at cosine -1.
  const double e2 = std::exp(-2.0 / cfg.loss.tau_t);
  const double floor = cfg.loss.lambda1 * std::log(1.0 + (cfg.K - 1) * e2) +
                       cfg.loss.lambda2 * std::log(1.0 + (kNumClasses - 1) * cfg.K * e2);
  const double first = s.loss_history.front(), last = s.loss_history.back();
  CHECK(last > floor);
  CHECK(last < first);
  CHECK((last - floor) * 3.0 < first - floor);
}
