#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "hrp/errors.hpp"
#include "hrp/ram.hpp"
#include "oracles.hpp"

using namespace hrp;

namespace {

struct Draws {
  double mean = 0.0, var = 0.0;
};

Draws draw_many(double ri, double rj, const RamConfig& cfg, std::uint64_t seed, int n = 100000) {
  Rng rng(seed);
  double s = 0.0, ss = 0.0;
  for (int k = 0; k < n; ++k) {
    const double l = sample_lambda(ri, rj, cfg, rng);
    s += l;
    ss += l * l;
  }
  const double m = s / n;
  return {m, ss / n - m * m};
}

}  // namespace

TEST_CASE("total reliability clamps") {
  const RamConfig cfg;
  CHECK(total_reliability(0.0, 0.0, cfg) == 0.1);
  CHECK(total_reliability(0.4, 0.6, cfg) == 1.0);
  CHECK(total_reliability(2.5, 2.5, cfg) == 2.0);
}

TEST_CASE("equal reliabilities give a symmetric Beta(gamma/2, gamma/2)") {
  const RamConfig cfg;
  const auto d = draw_many(0.7, 0.7, cfg, 1);
  const auto exact = oracle::beta_moments(2.0, 2.0);
  const double se = std::sqrt(exact.var / 100000.0);
  CHECK(std::abs(d.mean - 0.5) < 3.0 * se);
  CHECK(std::abs(d.var - exact.var) < 0.02 * exact.var);
}

TEST_CASE("three-to-one reliabilities centre lambda at 0.75") {
  const RamConfig cfg;
  const auto d = draw_many(1.5, 0.5, cfg, 2);
  const double se = std::sqrt(oracle::beta_moments(3.0, 1.0).var / 100000.0);
  CHECK(std::abs(d.mean - 0.75) < 3.0 * se);
}

TEST_CASE("the more reliable endpoint dominates the mix") {
  const RamConfig cfg;
  const auto d = draw_many(1.2, 0.4, cfg, 3);
  CHECK(d.mean - 0.5 > 3.0 * std::sqrt(d.var / 100000.0));
}

TEST_CASE("draws stay strictly inside (0, 1) even for tiny shapes") {
  Rng rng(4);
  for (double a : {1e-3, 0.05, 0.19, 1.0, 3.8})
    for (double b : {1e-3, 0.05, 0.19, 1.0, 3.8})
      for (int k = 0; k < 2000; ++k) {
        const double l = sample_beta(a, b, rng);
        REQUIRE(std::isfinite(l));
        REQUIRE(l > 0.0);
        REQUIRE(l < 1.0);
      }
}

TEST_CASE("shape parameters sum below gamma") {
  const RamConfig cfg;
  for (double ri : {0.1, 0.5, 1.0, 2.0})
    for (double rj : {0.1, 0.5, 1.0, 2.0}) {
      const auto s = mix_shape(ri, rj, cfg);
      CHECK(s.a + s.b < cfg.gamma);
      CHECK(s.a + s.b == doctest::Approx(cfg.gamma * (ri + rj) / (ri + rj + cfg.delta)).epsilon(1e-15));
    }
}

TEST_CASE("symmetric mixing ignores reliabilities") {
  RamConfig cfg;
  cfg.symmetric = true;
  const auto d = draw_many(2.0, 0.1, cfg, 5);
  const auto exact = oracle::beta_moments(4.0, 4.0);
  CHECK(std::abs(d.mean - 0.5) < 4.0 * std::sqrt(exact.var / 100000.0));
  CHECK(std::abs(d.var - exact.var) < 0.02 * exact.var);
}

TEST_CASE("gating weight") {
  CHECK(grg_weight(0.4, 0.7) == 0.7);
  CHECK(grg_weight(0.7, 0.4) == 0.7);
  CHECK(grg_weight(0.1, 0.1) == 0.1);
  CHECK(grg_weight(0.3, 0.5) <= grg_weight(0.4, 0.5));
}

TEST_CASE("pairing") {
  Rng rng(6);
  SUBCASE("cyclic partners form a permutation without fixed points") {
    for (std::size_t n : {2u, 3u, 10u, 64u}) {
      auto p = cyclic_partners(n, rng);
      for (std::size_t i = 0; i < n; ++i) CHECK(p[i] != i);
      std::sort(p.begin(), p.end());
      for (std::size_t i = 0; i < n; ++i) CHECK(p[i] == i);
    }
  }
  SUBCASE("single sample pairs with itself") {
    const std::vector<std::vector<double>> x{{0.5, -1.0}}, y{{0.0, 1.0}};
    const std::vector<double> r{0.7};
    const auto pairs = build_pairs(x, r, y, RamConfig{}, rng);
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].i == 0);
    CHECK(pairs[0].j == 0);
    CHECK(pairs[0].x_mix == x[0]);
  }
  SUBCASE("pair contents") {
    const std::vector<std::vector<double>> x{{0.0, 1.0}, {2.0, -1.0}, {1.0, 1.0}, {-3.0, 0.5}};
    const std::vector<std::vector<double>> y{{1, 0, 0}, {0, 1, 0}, {0.2, 0.3, 0.5}, {0, 0, 1}};
    const std::vector<double> r{0.1, 2.0, 0.6, 1.1};
    const RamConfig cfg;
    const auto pairs = build_pairs(x, r, y, cfg, rng);
    CHECK(pairs.size() == 4);
    for (const auto& p : pairs) {
      CHECK(p.lambda > 0.0);
      CHECK(p.lambda < 1.0);
      CHECK(p.w_mix == std::max(r[p.i], r[p.j]));
      CHECK(p.w_mix >= cfg.r_min);
      CHECK(p.w_mix <= cfg.r_max);
      double sum = 0.0;
      for (std::size_t c = 0; c < 3; ++c) {
        CHECK(p.y_mix[c] == p.lambda * y[p.i][c] + (1.0 - p.lambda) * y[p.j][c]);
        sum += p.y_mix[c];
      }
      CHECK(std::abs(sum - 1.0) < 1e-9);
      for (std::size_t d = 0; d < 2; ++d) {
        CHECK(p.x_mix[d] == p.lambda * x[p.i][d] + (1.0 - p.lambda) * x[p.j][d]);
        CHECK(p.x_mix[d] >= std::min(x[p.i][d], x[p.j][d]));
        CHECK(p.x_mix[d] <= std::max(x[p.i][d], x[p.j][d]));
      }
    }
  }
  SUBCASE("lambda = 1 keeps the first endpoint's target") {
    const std::vector<std::vector<double>> x{{0.0}, {1.0}}, y{{0.3, 0.7}, {1.0, 0.0}};
    const auto p = make_pair(x, y, 0, 1, 1.0, 1.0);
    CHECK(p.y_mix == y[0]);
  }
  SUBCASE("disabling the gate sets every weight to one") {
    RamConfig cfg;
    cfg.gating = false;
    const std::vector<std::vector<double>> x{{0.0}, {1.0}, {2.0}}, y{{1, 0}, {0, 1}, {1, 0}};
    for (const auto& p : build_pairs(x, std::vector<double>{0.1, 0.2, 1.5}, y, cfg, rng)) CHECK(p.w_mix == 1.0);
  }
}

TEST_CASE("RAM loss") {
  const auto f = oracle::small_fixture(7, 6);
  Rng rng(8);
  const std::vector<double> r{0.1, 0.3, 1.0, 2.0, 0.6, 0.9};
  auto pairs = build_pairs(f.inputs, r, f.given, RamConfig{}, rng);
  SUBCASE("zero gates give zero loss") {
    for (auto& p : pairs) p.w_mix = 0.0;
    CHECK(ram_loss(f.params, pairs).value == 0.0);
  }
  SUBCASE("constant gate c scales the ungated loss") {
    auto ungated = pairs;
    for (auto& p : ungated) p.w_mix = 1.0;
    for (auto& p : pairs) p.w_mix = 0.37;
    CHECK(std::abs(ram_loss(f.params, pairs).value - 0.37 * ram_loss(f.params, ungated).value) < 1e-10);
  }
  SUBCASE("scaling all gates scales the loss") {
    auto scaled = pairs;
    for (auto& p : scaled) p.w_mix *= 3.0;
    CHECK(ram_loss(f.params, scaled).value == doctest::Approx(3.0 * ram_loss(f.params, pairs).value).epsilon(1e-14));
  }
  SUBCASE("finite differences") {
    const auto gc = oracle::check_gradient(
        f.params, [&](const ModelParams& q) { return ram_loss(q, pairs).value; }, ram_loss(f.params, pairs).grad);
    CHECK(gc.max_rel_error < 1e-5);
  }
}

TEST_CASE("RAM config validation") {
  RamConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.r_min = 3.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = RamConfig{};
  cfg.gamma = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = RamConfig{};
  cfg.delta = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
