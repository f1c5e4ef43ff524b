#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "spl/proto.hpp"
#include "support.hpp"

using namespace spl;
using namespace spl::proto;

namespace {

std::vector<double> basis(int d, int i) {
  std::vector<double> v(static_cast<std::size_t>(d), 0.0);
  v[static_cast<std::size_t>(i)] = 1.0;
  return v;
}

ForegroundFeature feature(std::vector<double> f, int cls, int proto) {
  ForegroundFeature x;
  x.f = std::move(f);
  x.cls = cls;
  x.proto = proto;
  return x;
}

const double kOneNegative = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));

}  // namespace

TEST_CASE("memory bank FIFO") {
  MemoryBank m(2, 3, 4);
  for (int i = 0; i < 4; ++i) m.push(0, basis(4, i));
  REQUIRE(m.size(0) == 3);
  CHECK(m.entries(0)[0] == basis(4, 1));
  CHECK(m.entries(0)[2] == basis(4, 3));
  CHECK(m.size(1) == 0);
  memory_push(m, {});
  CHECK(m.size(0) == 3);
  CHECK_THROWS_AS(m.push(0, std::vector<double>(3, 0.0)), Error);
}

TEST_CASE("memory contrastive loss") {
  MemoryBank m(2, 10, 4);
  m.push(0, basis(4, 0));
  m.push(1, basis(4, 1));
  const std::vector<ForegroundFeature> f = {feature(basis(4, 0), 0, 0)};
  CHECK(memory_loss(f, m, 1.0).value == doctest::Approx(kOneNegative).epsilon(1e-4));
  CHECK(kOneNegative == doctest::Approx(0.3133).epsilon(1e-3));

  MemoryBank alone(2, 10, 4);
  alone.push(0, basis(4, 0));
  CHECK(memory_loss(f, alone, 1.0).value == doctest::Approx(0.0));

  const auto skipped = memory_loss({feature(basis(4, 0), 1, 0)}, MemoryBank(2, 10, 4), 1.0);
  CHECK(skipped.skipped == 1);
  CHECK(skipped.value == 0.0);
}

TEST_CASE("intra-class loss") {
  PrototypeBank bank(1, 5, 8);
  for (int k = 0; k < 5; ++k) std::copy_n(basis(8, k).begin(), 8, bank.at(0, k).begin());
  const std::vector<ForegroundFeature> f = {feature(basis(8, 2), 0, 2)};
  // -log(e / (e + 4))
  CHECK(intra_loss(f, bank, 1.0).value == doctest::Approx(-std::log(std::exp(1.0) / (std::exp(1.0) + 4.0))));
  CHECK(intra_loss(f, bank, 1.0).value == doctest::Approx(0.9048).epsilon(1e-3));

  Rng rng(41);
  const auto single = PrototypeBank::random(2, 1, 8, rng);
  CHECK(intra_loss({feature(spl::testing::random_unit(8, rng), 1, 0)}, single, 1.0).value == doctest::Approx(0.0));
}

TEST_CASE("inter-class loss") {
  PrototypeBank bank(1, 1, 4);
  std::copy_n(basis(4, 0).begin(), 4, bank.at(0, 0).begin());
  const std::vector<ForegroundFeature> f = {feature(basis(4, 0), 0, 0)};
  BackgroundFeature bg;
  bg.f = basis(4, 1);
  CHECK(inter_loss(f, {bg}, bank, 1.0).value == doctest::Approx(kOneNegative));
  CHECK(inter_loss(f, {}, bank, 1.0).value == doctest::Approx(0.0));
}

TEST_CASE("loss gradients match finite differences") {
  Rng rng(42);
  const int D = 8;
  for (int it = 0; it < 10; ++it) {
    const auto bank = PrototypeBank::random(3, 3, D, rng);
    std::vector<ForegroundFeature> fs;
    for (int i = 0; i < 3; ++i) {
      fs.push_back(feature(spl::testing::random_unit(D, rng), static_cast<int>(rng.below(3)), static_cast<int>(rng.below(3))));
    }
    std::vector<BackgroundFeature> bg(2);
    for (auto& b : bg) b.f = spl::testing::random_unit(D, rng);

    auto flat = [&]() {
      std::vector<double> x;
      for (const auto& f : fs) x.insert(x.end(), f.f.begin(), f.f.end());
      return x;
    };
    auto unflat = [&](const std::vector<double>& x) {
      auto copy = fs;
      for (std::size_t i = 0; i < copy.size(); ++i) std::copy_n(x.begin() + static_cast<long>(i * D), D, copy[i].f.begin());
      return copy;
    };
    auto analytic = [](const LossReport& r) {
      std::vector<double> g;
      for (const auto& v : r.grad_features) g.insert(g.end(), v.begin(), v.end());
      return g;
    };

    const auto num_intra = spl::testing::numeric_gradient([&](const auto& x) { return intra_loss(unflat(x), bank, 1.0).value; }, flat());
    CHECK(spl::testing::max_rel_error(analytic(intra_loss(fs, bank, 1.0)), num_intra) < 1e-3);

    const auto num_inter =
        spl::testing::numeric_gradient([&](const auto& x) { return inter_loss(unflat(x), bg, bank, 1.0).value; }, flat());
    CHECK(spl::testing::max_rel_error(analytic(inter_loss(fs, bg, bank, 1.0)), num_inter) < 1e-3);
  }
}

TEST_CASE("focal classification loss") {
  // Peaks and empty cells only; a Gaussian tail keeps a nonzero negative term
  // even when the prediction equals it.
  const std::vector<double> target = {1.0, 0.0, 0.0, 0.0, 1.0, 0.0};
  std::vector<double> pred = target;
  for (auto& p : pred) p = p >= 0.999 ? 1.0 - 1e-7 : p;
  const std::vector<unsigned char> all(3, 1);
  CHECK(focal_cls_loss(pred, target, all, 2).value < 1e-5);

  // Cell 1 holds a confident false positive; masking it removes its term.
  std::vector<double> p2 = {1.0 - 1e-7, 0.0, 0.0, 0.9, 1.0 - 1e-7, 0.0};
  const std::vector<double> t2 = {1.0, 0.0, 0.0, 0.0, 1.0, 0.0};
  const std::vector<unsigned char> masked = {1, 0, 1};
  CHECK(focal_cls_loss(p2, t2, all, 2).value > 0.1);
  CHECK(focal_cls_loss(p2, t2, masked, 2).value < 1e-5);
  CHECK(focal_cls_loss(p2, t2, masked, 2).grad_pred[3] == 0.0);

  Rng rng(43);
  std::vector<double> p3(12), t3(12);
  for (std::size_t i = 0; i < 12; ++i) {
    p3[i] = rng.uniform(0.05, 0.95);
    t3[i] = i % 5 == 0 ? 1.0 : rng.uniform(0.0, 0.9);
  }
  const std::vector<unsigned char> m3 = {1, 1, 0, 1, 1, 1};
  const auto num = spl::testing::numeric_gradient([&](const auto& x) { return focal_cls_loss(x, t3, m3, 2).value; }, p3, 1e-6);
  CHECK(spl::testing::max_rel_error(focal_cls_loss(p3, t3, m3, 2).grad_pred, num) < 1e-3);
}

TEST_CASE("total loss") {
  CHECK(total_loss(0, 0, 0, 0, 0.5, 1.0) == 0.0);
  CHECK(total_loss(1, 2, 3, 4, 0, 0) == doctest::Approx(3.0));
  CHECK(total_loss(1, 2, 3, 4, 0.5, 1.0) == doctest::Approx(8.5));
}

TEST_CASE("prototype momentum update") {
  Rng rng(44);
  auto bank = PrototypeBank::random(2, 3, 8, rng);
  const auto before = bank.P;
  SUBCASE("mean equal to the prototype") {
    const std::vector<double> p(bank.at(1, 2).begin(), bank.at(1, 2).end());
    update_prototypes(bank, {feature(p, 1, 2), feature(p, 1, 2)}, 0.9);
    CHECK(bank.P == before);
  }
  SUBCASE("alpha 1") {
    update_prototypes(bank, {feature(spl::testing::random_unit(8, rng), 0, 1)}, 1.0);
    CHECK(bank.P == before);
  }
  SUBCASE("alpha 0 copies the feature") {
    const auto f = spl::testing::random_unit(8, rng);
    update_prototypes(bank, {feature(f, 0, 1)}, 0.0);
    for (int d = 0; d < 8; ++d) CHECK(bank.at(0, 1)[static_cast<std::size_t>(d)] == doctest::Approx(f[static_cast<std::size_t>(d)]));
    for (int d = 0; d < 8; ++d) CHECK(bank.at(0, 0)[static_cast<std::size_t>(d)] == before[static_cast<std::size_t>(d)]);
  }
  SUBCASE("results stay unit norm") {
    for (int i = 0; i < 200; ++i) {
      update_prototypes(bank, {feature(spl::testing::random_unit(8, rng), static_cast<int>(rng.below(2)), static_cast<int>(rng.below(3)))}, 0.9);
    }
    for (int c = 0; c < 2; ++c) {
      for (int k = 0; k < 3; ++k) CHECK(l2norm(bank.at(c, k)) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("k-means") {
  Rng rng(45);
  const int D = 16, K = 4;
  std::vector<std::vector<double>> centers, data;
  for (int k = 0; k < K; ++k) centers.push_back(basis(D, 3 * k));
  for (int i = 0; i < 200; ++i) {
    auto v = centers[static_cast<std::size_t>(i % K)];
    for (auto& x : v) x += rng.normal(0.0, 0.01);
    data.push_back(v);
  }
  const auto r = kmeans(data, K, rng);
  for (const auto& c : centers) {
    double best = 1e9;
    for (const auto& got : r.centroids) {
      std::vector<double> n = got;
      normalize_in_place(n);
      double d = 0.0;
      for (int i = 0; i < D; ++i) d = std::max(d, std::abs(n[static_cast<std::size_t>(i)] - c[static_cast<std::size_t>(i)]));
      best = std::min(best, d);
    }
    CHECK(best < 1e-2);
  }
  for (std::size_t i = 1; i < r.wcss_history.size(); ++i) CHECK(r.wcss_history[i] <= r.wcss_history[i - 1] + 1e-12);

  MemoryBank same(1, 10, 4);
  for (int i = 0; i < 5; ++i) same.push(0, basis(4, 2));
  const auto bank = kmeans_init(same, 1, rng);
  CHECK(std::vector<double>(bank.at(0, 0).begin(), bank.at(0, 0).end()) == basis(4, 2));

  MemoryBank few(2, 10, 4);
  few.push(0, basis(4, 0));
  CHECK_THROWS_AS(kmeans_init(few, 5, rng), Error);
}

TEST_CASE("projection head backward") {
  Rng rng(46);
  FeatureMap raw(2, 2, 6);
  for (auto& v : raw.values) v = rng.normal();
  const auto head = ProjectionHead::random(6, 4, rng);
  const std::vector<double> zero(4 * 4, 0.0);
  const auto g0 = head_backward(raw, head, zero);
  for (double v : g0.weight) CHECK(v == 0.0);
  for (double v : g0.bias) CHECK(v == 0.0);

  // Identity head: upstream orthogonal to the output passes through scaled by
  // 1 / |x|.
  const auto id = ProjectionHead::identity(6);
  FeatureMap one(1, 1, 6);
  one.values = {3, 0, 0, 0, 0, 0};
  const std::vector<double> up = {0, 1, 0, 0, 0, 0};
  const auto gi = head_backward(one, id, up);
  CHECK(gi.raw[1] == doctest::Approx(1.0 / 3.0));
  CHECK(gi.raw[0] == doctest::Approx(0.0));
}

TEST_CASE("checkpoint files round trip") {
  Rng rng(47);
  const auto dir = std::filesystem::temp_directory_path() / "spl_test_proto";
  std::filesystem::create_directories(dir);
  const auto bank = PrototypeBank::random(3, 5, 8, rng);
  MemoryBank mem(3, 10, 8);
  for (int i = 0; i < 7; ++i) mem.push(i % 3, spl::testing::random_unit(8, rng));
  save_prototypes(dir / "p.bin", bank, &mem);
  MemoryBank back;
  const auto loaded = load_prototypes(dir / "p.bin", &back);
  CHECK(loaded.C == 3);
  CHECK(loaded.K == 5);
  CHECK(loaded.D == 8);
  for (std::size_t i = 0; i < bank.P.size(); ++i) CHECK(loaded.P[i] == doctest::Approx(bank.P[i]).epsilon(1e-6));
  for (int c = 0; c < 3; ++c) CHECK(back.size(c) == mem.size(c));

  const auto head = ProjectionHead::random(6, 8, rng);
  const std::vector<double> w(8 * 3, 0.25), b(3, -1.0);
  save_head(dir / "h.bin", head, w, b);
  std::vector<double> w2, b2;
  const auto h2 = load_head(dir / "h.bin", &w2, &b2);
  CHECK(h2.d_in == 6);
  CHECK(h2.d_out == 8);
  CHECK(w2 == w);
  CHECK(b2 == b);
  CHECK_THROWS_AS(load_prototypes(dir / "missing.bin"), Error);
}
