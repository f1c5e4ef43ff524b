#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "spl/ingest.hpp"
#include "spl/synth.hpp"
#include "support.hpp"

using namespace spl;
using namespace spl::ingest;
namespace fs = std::filesystem;

namespace {

const fs::path kData = SPL_TEST_DATA;

fs::path scratch(const char* name) {
  const fs::path dir = fs::temp_directory_path() / "spl_test_ingest" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void copy_fixture(const fs::path& to) {
  fs::copy(kData / "seq3", to, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
}

std::string slurp(const fs::path& f) {
  std::ifstream in(f, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("three-frame fixture loads") {
  const auto frames = load_sequence(kData / "seq3");
  REQUIRE(frames.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(frames[i].frame_id == static_cast<int>(i));
    CHECK(frames[i].cloud.size() == 4);
    if (i > 0) CHECK(frames[i].timestamp > frames[i - 1].timestamp);
  }
  CHECK(frames[0].cloud.points[0].x == doctest::Approx(5.0));
  CHECK(frames[2].pose.translation.x == doctest::Approx(2.0));
  CHECK(frames[0].detections.empty());
  REQUIRE(frames[1].detections.size() == 1);
  const auto& d = frames[1].detections[0];
  CHECK(d.track_id == 4);
  CHECK(d.score == doctest::Approx(0.8));
  CHECK(d.mask.count() == 3);
  CHECK(d.mask.at(3, 2));
  CHECK(d.mask.at(5, 2));
  CHECK_FALSE(d.mask.at(6, 2));
  CHECK(frames[1].camera.fx == doctest::Approx(100));
}

TEST_CASE("empty detections file gives frames without detections") {
  const auto dir = scratch("empty_dets");
  copy_fixture(dir);
  std::ofstream(dir / "detections.jsonl", std::ios::trunc);
  for (const auto& f : load_sequence(dir)) CHECK(f.detections.empty());
}

TEST_CASE("loader errors") {
  CHECK_THROWS_AS(load_sequence(kData / "does_not_exist"), Error);

  const auto dir = scratch("bad_pose");
  copy_fixture(dir);
  std::ofstream(dir / "poses.txt", std::ios::app) << "3 1 0 0\n";
  try {
    load_sequence(dir);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MalformedRecord);
    CHECK(std::string(e.what()).find("poses.txt") != std::string::npos);
  }

  const auto dir2 = scratch("bad_calib");
  copy_fixture(dir2);
  std::ofstream(dir2 / "calib.txt", std::ios::trunc) << "fx 100\n";
  try {
    load_sequence(dir2);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CalibrationInvalid);
  }
}

TEST_CASE("write then load reproduces the fixture") {
  const auto frames = load_sequence(kData / "seq3");
  const auto dir = scratch("rewrite");
  write_sequence(dir, frames);
  const auto again = load_sequence(dir);
  REQUIRE(again.size() == frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    CHECK(again[i].cloud.points == frames[i].cloud.points);
    CHECK(again[i].timestamp == frames[i].timestamp);
    CHECK(again[i].detections.size() == frames[i].detections.size());
  }
  CHECK(again[1].detections[0].mask == frames[1].detections[0].mask);
}

TEST_CASE("mask RLE round trip") {
  Rng rng(4);
  for (int it = 0; it < 20; ++it) {
    std::vector<std::pair<int, int>> px;
    for (int i = 0; i < 60; ++i) px.emplace_back(static_cast<int>(rng.below(40)), static_cast<int>(rng.below(30)));
    const auto m = BinaryMask::from_pixels(40, 30, px);
    const auto back = BinaryMask::decode_rle(40, 30, m.encode_rle());
    CHECK(back == m);
    for (const auto& [u, v] : px) CHECK(back.at(u, v));
  }
  CHECK_THROWS_AS(BinaryMask::decode_rle(4, 4, {3, 20}), Error);
  CHECK_THROWS_AS(BinaryMask::decode_rle(4, 4, {3, 2}), Error);
}

TEST_CASE("mask dilation") {
  const auto m = BinaryMask::from_pixels(20, 20, {{10, 10}});
  const auto d = m.dilated(2);
  CHECK(d.count() == 25);
  CHECK(d.at(8, 8));
  CHECK(d.at(12, 12));
  CHECK_FALSE(d.at(13, 10));
  const auto corner = BinaryMask::from_pixels(20, 20, {{0, 0}}).dilated(1);
  CHECK(corner.count() == 4);
}

TEST_CASE("frame aggregation") {
  const auto frames = load_sequence(kData / "seq3");
  const auto alone = aggregate_frames(frames, 1, 0);
  CHECK(alone.points == frames[1].cloud.points);

  std::vector<std::size_t> source;
  const auto all = aggregate_frames(frames, 1, 1, &source);
  CHECK(all.size() == 3 * frames[1].cloud.size());
  REQUIRE(source.size() == all.size());

  // Sensor moves +1 m in x per frame, so the previous frame's points shift by
  // -1 and the next frame's by +1 in the center frame.
  for (std::size_t i = 0; i < all.size(); ++i) {
    const std::size_t within = i % 4;
    const auto& orig = frames[source[i]].cloud.points[within];
    const double shift = static_cast<double>(source[i]) - 1.0;
    CHECK(all.points[i].x == doctest::Approx(orig.x + shift));
    CHECK(all.points[i].y == doctest::Approx(orig.y));
  }

  // Window clamps at the sequence ends.
  CHECK(aggregate_frames(frames, 0, 5).size() == 12);
  CHECK_THROWS_AS(aggregate_frames(frames, 3, 0), Error);
}

namespace {

struct RemovalRates {
  double ground = 0.0;
  double object = 0.0;
};

RemovalRates removal_rates(const SynthResult& scene) {
  const auto& cloud = scene.frames[0].cloud;
  const auto& owner = scene.point_owner[0];
  const auto split = remove_ground(cloud);
  CHECK(split.nonground.size() == split.nonground_indices.size());
  CHECK(split.nonground.size() + split.ground_indices.size() == cloud.size());
  std::vector<bool> removed(cloud.size(), true);
  for (auto i : split.nonground_indices) removed[i] = false;
  long ground = 0, ground_removed = 0, object = 0, object_removed = 0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (owner[i] == kOwnerGround) {
      ++ground;
      ground_removed += removed[i];
    } else if (owner[i] >= 0) {
      ++object;
      object_removed += removed[i];
    }
  }
  REQUIRE(ground > 0);
  REQUIRE(object > 0);
  return {static_cast<double>(ground_removed) / ground, static_cast<double>(object_removed) / object};
}

}  // namespace

TEST_CASE("ground removal on a flat scene with boxes") {
  SynthSceneSpec spec;
  spec.n_frames = 1;
  auto box = [](double x, double y, double heading, double h) {
    SynthObject o;
    o.x = x;
    o.y = y;
    o.heading = heading;
    o.h = h;
    o.clearance = 0.2;
    return o;
  };
  spec.objects = {box(10, -3, 0, 1.5), box(15, 4, 0.8, 1.8), box(24, -1, 1.6, 1.5), box(30, 8, 0.3, 2.5)};
  const auto r = removal_rates(synth_scene(spec));
  CHECK(r.ground >= 0.99);
  CHECK(r.object <= 0.01);
}

TEST_CASE("ground removal on the standard scene") {
  auto spec = standard_benchmark_spec();
  spec.n_frames = 1;
  const auto r = removal_rates(synth_scene(spec));
  CHECK(r.ground >= 0.99);
  // Objects standing on the ground lose the slice within the inlier band.
  CHECK(r.object <= 0.03);
}

TEST_CASE("ground removal on an all-ground scene") {
  SynthSceneSpec spec;
  spec.n_frames = 1;
  const auto scene = synth_scene(spec);
  const auto& cloud = scene.frames[0].cloud;
  for (int o : scene.point_owner[0]) CHECK(o == kOwnerGround);
  const auto split = remove_ground(cloud);
  CHECK(static_cast<double>(split.nonground.size()) <= 0.01 * static_cast<double>(cloud.size()));
}

TEST_CASE("ground plane recovery") {
  Rng rng(5);
  geom::PointCloud cloud;
  for (int i = 0; i < 3000; ++i) cloud.points.push_back({rng.uniform(-20, 20), rng.uniform(-20, 20), 0.3, 0.5});
  for (int i = 0; i < 400; ++i) {
    cloud.points.push_back({rng.uniform(4, 6), rng.uniform(-1, 1), rng.uniform(0.6, 2.0), 0.5});
  }
  const auto split = remove_ground(cloud);
  const auto& m = split.model;
  CHECK(m.c > 0.99);
  CHECK(std::abs(m.d / m.c + 0.3) < 0.02);
  CHECK(m.plane_z(3, -2) == doctest::Approx(0.3).epsilon(0.02));
  CHECK(split.nonground.size() >= 390);

  geom::PointCloud tiny;
  tiny.points.resize(10);
  CHECK_THROWS_AS(remove_ground(tiny), Error);
}

TEST_CASE("synthetic scenes are deterministic") {
  auto spec = standard_benchmark_spec();
  spec.n_frames = 3;
  const auto da = scratch("synth_a"), db = scratch("synth_b");
  write_sequence(da, synth_scene(spec).frames);
  write_sequence(db, synth_scene(spec).frames);
  for (const auto& e : fs::recursive_directory_iterator(da)) {
    if (!e.is_regular_file()) continue;
    CHECK(slurp(e.path()) == slurp(db / fs::relative(e.path(), da)));
  }
  spec.seed = 99;
  write_sequence(db, synth_scene(spec).frames);
  CHECK(slurp(da / "points" / "000000.bin") != slurp(db / "points" / "000000.bin"));
}

TEST_CASE("empty synthetic scene is all ground") {
  SynthSceneSpec spec;
  spec.n_frames = 2;
  spec.noise_sigma = 0.0;
  const auto scene = synth_scene(spec);
  for (const auto& f : scene.frames) {
    CHECK(f.detections.empty());
    for (const auto& p : f.cloud.points) CHECK(p.z == doctest::Approx(-spec.lidar.mount_height).epsilon(1e-6));
  }
}

TEST_CASE("mask height follows pinhole geometry") {
  // Taller than the camera, so the top face is hidden and the silhouette is
  // the near face alone: fy * h / depth.
  SynthSceneSpec spec;
  spec.n_frames = 1;
  SynthObject car;
  car.h = 1.9;
  car.x = 10.0 + 0.5 * car.l;
  spec.objects = {car};
  auto scene = synth_scene(spec);
  REQUIRE(scene.frames[0].detections.size() == 1);
  CHECK(std::abs(scene.frames[0].detections[0].mask.bounds().height() - spec.camera.fy * car.h / 10.0) <= 2.0);

  // Lower than the camera: the far top edge bounds the silhouette.
  car.h = 1.5;
  spec.objects = {car};
  scene = synth_scene(spec);
  REQUIRE(scene.frames[0].detections.size() == 1);
  const double mount = spec.lidar.mount_height, near = 10.0, far = 10.0 + car.l;
  const double expect = spec.camera.fy * (mount / near - (mount - car.h) / far);
  CHECK(std::abs(scene.frames[0].detections[0].mask.bounds().height() - expect) <= 2.0);
}

TEST_CASE("overlapping synthetic objects are rejected") {
  SynthSceneSpec spec;
  spec.n_frames = 1;
  SynthObject a, b;
  b.y = 0.5;
  spec.objects = {a, b};
  CHECK_THROWS_AS(synth_scene(spec), Error);
}
