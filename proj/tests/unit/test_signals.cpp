#include <doctest.h>

#include <algorithm>
#include <set>

#include "spl/signals.hpp"
#include "support.hpp"

using namespace spl;
using namespace spl::signals;

namespace {

BevGridSpec small_grid() { return {0.0, 10.0, 0.0, 10.0, 0.5}; }

FeatureMap random_map(int h, int w, int d, Rng& rng) {
  FeatureMap fm(h, w, d);
  for (auto& v : fm.values) v = rng.normal();
  for (std::size_t c = 0; c < fm.cells(); ++c) normalize_in_place(fm.cell(c));
  fm.normalized = true;
  return fm;
}

// Bank whose prototypes are distinct basis vectors.
PrototypeBank basis_bank(int C, int K, int D) {
  PrototypeBank bank(C, K, D);
  for (int c = 0; c < C; ++c) {
    for (int k = 0; k < K; ++k) bank.at(c, k)[static_cast<std::size_t>(c * K + k)] = 1.0;
  }
  return bank;
}

}  // namespace

TEST_CASE("gaussian heatmap") {
  const auto grid = small_grid();
  SUBCASE("single object peaks at its center cell") {
    const auto hm = gaussian_heatmap({{ObjectClass::Pedestrian, 5.1, 5.1, 0.7, 0.7}}, grid);
    const long cell = center_cell(grid, 5.1, 5.1);
    REQUIRE(cell >= 0);
    CHECK(hm.at(static_cast<std::size_t>(cell), 1) == doctest::Approx(1.0));
    CHECK(hm.at(static_cast<std::size_t>(cell), 0) == 0.0);
    const double top = *std::max_element(hm.values.begin(), hm.values.end());
    CHECK(top == doctest::Approx(1.0));
  }
  SUBCASE("empty label set") {
    const auto hm = gaussian_heatmap({}, grid);
    CHECK(std::all_of(hm.values.begin(), hm.values.end(), [](double v) { return v == 0.0; }));
    CHECK(hm.cells() == grid.cells());
  }
  SUBCASE("same-class objects max-merge") {
    const HeatmapObject a{ObjectClass::Vehicle, 4.1, 5.1, 4.5, 1.8};
    const HeatmapObject b{ObjectClass::Vehicle, 5.6, 5.1, 4.5, 1.8};
    const auto ha = gaussian_heatmap({a}, grid), hb = gaussian_heatmap({b}, grid), both = gaussian_heatmap({a, b}, grid);
    for (std::size_t i = 0; i < both.values.size(); ++i) {
      CHECK(both.values[i] == doctest::Approx(std::max(ha.values[i], hb.values[i])));
    }
  }
  SUBCASE("objects outside the grid are skipped") {
    const auto hm = gaussian_heatmap({{ObjectClass::Vehicle, 50, 50, 4, 2}}, grid);
    CHECK(std::all_of(hm.values.begin(), hm.values.end(), [](double v) { return v == 0.0; }));
    CHECK(center_cell(grid, 50, 50) == -1);
  }
}

TEST_CASE("gaussian radius") {
  // 10 x 10 cells at overlap 0.7: the third case is the smallest,
  // (-28 + sqrt(28^2 + 4 * 2.8 * 30)) / 2.
  CHECK(gaussian_radius(10, 10, 0.7) == doctest::Approx((-28.0 + std::sqrt(784.0 + 336.0)) / 2.0));
  CHECK(gaussian_radius(20, 8, 0.7) > gaussian_radius(10, 4, 0.7));
  CHECK(gaussian_radius(10, 10, 0.9) < gaussian_radius(10, 10, 0.5));
}

TEST_CASE("projection head") {
  Rng rng(31);
  const auto raw = random_map(3, 3, 8, rng);
  SUBCASE("identity preserves unit input") {
    const auto out = project_features(raw, ProjectionHead::identity(8));
    for (std::size_t i = 0; i < raw.values.size(); ++i) CHECK(out.values[i] == doctest::Approx(raw.values[i]));
  }
  SUBCASE("outputs are unit norm and scale invariant") {
    const auto head = ProjectionHead::random(8, 16, rng);
    auto scaled = raw;
    for (auto& v : scaled.values) v *= 10.0;
    const auto a = project_features(raw, head), b = project_features(scaled, head);
    for (std::size_t c = 0; c < a.cells(); ++c) {
      CHECK(std::abs(l2norm(a.cell(c)) - 1.0) < 1e-9);
      for (int d = 0; d < 16; ++d) CHECK(a.cell(c)[static_cast<std::size_t>(d)] == doctest::Approx(b.cell(c)[static_cast<std::size_t>(d)]));
    }
  }
  SUBCASE("null cells stay null") {
    auto holes = raw;
    std::fill(holes.cell(4).begin(), holes.cell(4).end(), 0.0);
    const auto out = project_features(holes, ProjectionHead::random(8, 16, rng));
    CHECK(l2norm(out.cell(4)) == 0.0);
  }
  SUBCASE("dimension mismatch") { CHECK_THROWS_AS(project_features(raw, ProjectionHead::identity(5)), Error); }
}

TEST_CASE("similarity map") {
  const int C = 3, K = 5, D = 16;
  const auto bank = basis_bank(C, K, D);
  FeatureMap fm(1, 2, D);
  fm.cell(0)[1 * K + 2] = 1.0;  // equals prototype (1, 2)
  const auto sim = similarity_map(fm, bank);
  CHECK(sim.s_max[0] == doctest::Approx(1.0));
  CHECK(sim.cls[0] == 1);
  CHECK(sim.proto[0] == 2);
  CHECK(sim.s_max[1] == 0.0);

  Rng rng(32);
  const auto map = random_map(4, 4, 64, rng);
  const auto rb = PrototypeBank::random(3, 5, 64, rng);
  const auto s = similarity_map(map, rb);
  for (std::size_t cell = 0; cell < map.cells(); ++cell) {
    double best = -2.0;
    int bc = -1, bk = -1;
    for (int c = 0; c < 3; ++c) {
      for (int k = 0; k < 5; ++k) {
        double v = 0.0;
        for (int d = 0; d < 64; ++d) v += map.cell(cell)[static_cast<std::size_t>(d)] * rb.at(c, k)[static_cast<std::size_t>(d)];
        CHECK(s.at(cell, c, k) == doctest::Approx(v).epsilon(1e-12));
        if (v > best) {
          best = v;
          bc = c;
          bk = k;
        }
      }
    }
    CHECK(s.s_max[cell] == doctest::Approx(best).epsilon(1e-12));
    CHECK(s.cls[cell] == bc);
    CHECK(s.proto[cell] == bk);
  }
}

TEST_CASE("similarity score map") {
  Heatmap hg(1, 3, 3);
  hg.at(1, 0) = 1.0;  // GT peak on cell 1
  const std::vector<double> smax = {0.95, 0.95, 0.85};
  const auto hs = similarity_score_map(smax, hg, 0.9);
  CHECK(hs[0] == doctest::Approx(0.95));
  CHECK(hs[1] == 0.0);
  CHECK(hs[2] == 0.0);
  const auto none = similarity_score_map(smax, hg, 1.01);
  CHECK(std::all_of(none.begin(), none.end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("heatmap fusion cases") {
  Heatmap hp(1, 4, 3), hg(1, 4, 3);
  // Cell 0: prior and similarity agree. Cell 1: prior without similarity.
  // Cell 2: classes disagree. Cell 3: GT only.
  hp.at(0, 1) = 0.8;
  hp.at(1, 1) = 0.8;
  hp.at(2, 0) = 0.8;
  hg.at(3, 2) = 1.0;
  const std::vector<double> hs = {0.95, 0.0, 0.95, 0.0};
  const std::vector<int> cls = {1, 1, 2, 0};
  const auto f = fuse(hs, cls, hp, hg);
  CHECK(f.hm.at(0, 1) == doctest::Approx(0.95));
  CHECK(f.mask[0] == 1);
  CHECK(f.hm.max_at(1) == 0.0);
  CHECK(f.mask[1] == 0);
  CHECK(f.hm.max_at(2) == 0.0);
  CHECK(f.mask[2] == 0);
  CHECK(f.mask[3] == 1);
  CHECK(f.hup.at(3, 2) == doctest::Approx(1.0));
  CHECK(f.hup.at(0, 1) == doctest::Approx(0.95));
}

TEST_CASE("foreground extraction") {
  const int C = 3, K = 5, D = 16;
  const auto bank = basis_bank(C, K, D);
  FeatureMap fm(1, 4, D);
  fm.cell(0)[0 * K + 3] = 1.0;  // equals prototype (0, 3)
  fm.cell(2)[2 * K + 1] = 1.0;
  fm.cell(3)[1 * K + 4] = 1.0;
  const auto sim = similarity_map(fm, bank);
  SUBCASE("one GT object") {
    const Heatmap none(1, 4, C);
    const auto f = extract_foreground(fm, {{0, 0}}, none, sim);
    REQUIRE(f.size() == 1);
    CHECK(f[0].origin == FeatureOrigin::Gt);
    CHECK(f[0].cls == 0);
    CHECK(f[0].proto == 3);
  }
  SUBCASE("mined cells only") {
    Heatmap hm(1, 4, C);
    hm.at(0, 0) = 0.95;
    hm.at(2, 2) = 0.95;
    hm.at(3, 1) = 0.95;
    const auto f = extract_foreground(fm, {}, hm, sim);
    REQUIRE(f.size() == 3);
    for (const auto& x : f) {
      CHECK(x.origin == FeatureOrigin::Mined);
      CHECK(x.cls == sim.cls[x.cell]);
      CHECK(x.proto == sim.proto[x.cell]);
    }
  }
}

TEST_CASE("background sampling") {
  Rng seed_rng(33);
  const auto fm = random_map(4, 4, 8, seed_rng);
  Heatmap hg(4, 4, 3), hp(4, 4, 3);
  std::vector<double> hs(16, 0.0);
  SUBCASE("all foreground gives nothing") {
    for (std::size_t c = 0; c < 16; ++c) hg.at(c, 0) = 0.5;
    Rng rng(1);
    CHECK(sample_background(fm, hg, hp, hs, 15, rng).empty());
  }
  SUBCASE("exactly C*K candidates are all returned") {
    hp.at(0, 1) = 0.3;  // one excluded cell leaves 15
    for (std::uint64_t s : {1u, 2u, 3u}) {
      Rng rng(s);
      const auto bg = sample_background(fm, hg, hp, hs, 15, rng);
      std::set<std::size_t> cells;
      for (const auto& b : bg) cells.insert(b.cell);
      CHECK(cells.size() == 15);
      CHECK(cells.count(0) == 0);
    }
  }
  SUBCASE("fixed seed is deterministic") {
    Rng a(7), b(7);
    const auto x = sample_background(fm, hg, hp, hs, 5, a), y = sample_background(fm, hg, hp, hs, 5, b);
    REQUIRE(x.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(x[i].cell == y[i].cell);
      CHECK(x[i].f == y[i].f);
    }
  }
}
