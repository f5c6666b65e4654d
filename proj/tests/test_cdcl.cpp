#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hrp/cdcl.hpp"
#include "hrp/rng.hpp"
#include "oracles.hpp"

using namespace hrp;

namespace {

std::vector<std::vector<double>> random_unit_rows(std::size_t n, std::size_t dim, Rng& rng) {
  std::vector<std::vector<double>> z(n);
  for (auto& row : z) {
    std::vector<double> v(dim);
    for (double& x : v) x = rng.normal();
    row = l2_normalize(v).unit;
  }
  return z;
}

}  // namespace

TEST_CASE("beta normalization") {
  const CdclConfig cfg;
  const std::vector<double> beta{0.2, 0.9, 0.5, 0.2};
  const auto n = normalize_beta(beta, cfg);
  CHECK(n[1] == doctest::Approx(0.7 / (0.7 + 1e-8)).epsilon(1e-15));
  CHECK(n[0] == 0.0);
  CHECK(n[3] == 0.0);
  CHECK(n == normalize_beta_literal(beta));

  const std::vector<double> flat(5, 0.4);
  for (double v : normalize_beta(flat, cfg)) CHECK(v == 1.0);
  for (double v : normalize_beta_literal(flat)) CHECK(v == 0.0);
}

TEST_CASE("positive sets") {
  SUBCASE("distinct pseudo-classes leave only the other view") {
    const std::vector<int> cls{0, 1, 2, 0, 1, 2};
    const auto p = positive_sets(cls);
    for (std::size_t i = 0; i < 6; ++i) {
      REQUIRE(p[i].size() == 1);
      CHECK(p[i][0] == (i + 3) % 6);
    }
  }
  SUBCASE("one shared class") {
    const auto p = positive_sets(std::vector<int>(8, 3));
    for (std::size_t i = 0; i < 8; ++i) {
      CHECK(p[i].size() == 7);
      CHECK(std::find(p[i].begin(), p[i].end(), i) == p[i].end());
    }
  }
  SUBCASE("N = 2 with classes a, b") {
    const auto p = positive_sets(std::vector<int>{0, 1, 0, 1});
    CHECK(p[0] == std::vector<std::size_t>{2});
    CHECK(p[1] == std::vector<std::size_t>{3});
  }
}

TEST_CASE("consensus weights") {
  const auto sets = positive_sets(std::vector<int>{0, 0, 1});
  const auto w = consensus_weights(std::vector<double>{1.0, 0.5, 0.3}, sets);
  CHECK(w[0][0] == 0.5);
  CHECK(w[1][0] == 0.5);
  CHECK(w[2].empty());
  const auto z = consensus_weights(std::vector<double>{0.0, 0.8, 0.3}, sets);
  CHECK(z[0][0] == 0.0);
  CHECK(z[1][0] == 0.0);
}

TEST_CASE("uniform similarities give log 3") {
  const std::vector<std::vector<double>> z(4, std::vector<double>{0.0, 1.0});
  const auto sets = positive_sets(std::vector<int>{0, 1, 0, 1});
  const std::vector<std::vector<double>> ones(4, std::vector<double>{1.0});
  CHECK(std::abs(gated_infonce(z, sets, ones, 0.2).value - std::log(3.0)) < 1e-9);
  const std::vector<std::vector<double>> zeros(4, std::vector<double>{0.0});
  CHECK(gated_infonce(z, sets, zeros, 0.2).value == 0.0);
}

TEST_CASE("no valid anchor gives zero") {
  const auto r = gated_infonce(std::vector<std::vector<double>>{{1.0, 0.0}, {0.0, 1.0}},
                               positive_sets(std::vector<int>{0, 1}), {{}, {}}, 0.2);
  CHECK(r.value == 0.0);
  CHECK(r.anchors == 0);
}

TEST_CASE("matches the naive double loop on a random 2N = 8 bank") {
  Rng rng(1);
  const CdclConfig cfg;
  for (int trial = 0; trial < 20; ++trial) {
    const auto z = random_unit_rows(8, 4, rng);
    std::vector<int> cls(8);
    std::vector<double> beta(8);
    for (int i = 0; i < 4; ++i) {
      cls[i] = cls[i + 4] = static_cast<int>(rng.index(3));
      beta[i] = beta[i + 4] = rng.uniform_open();
    }
    const auto bn = normalize_beta(beta, cfg);
    const auto sets = positive_sets(cls);
    CHECK(std::abs(gated_infonce(z, sets, consensus_weights(bn, sets), cfg.tau).value -
                   oracle::naive_cdcl(z, cls, bn, cfg.tau)) < 1e-10);
  }
}

TEST_CASE("bank layout") {
  const std::vector<std::vector<double>> weak{{3.0, 4.0}, {0.0, 0.0}}, strong{{1.0, 0.0}, {0.0, 2.0}};
  const auto bank = make_bank(weak, strong, std::vector<int>{1, 0}, std::vector<double>{0.3, 0.6});
  REQUIRE(bank.rows() == 4);
  CHECK(bank.z[0][0] == doctest::Approx(0.6));
  CHECK(bank.z[2][0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(bank.z[2][1] == 0.0);
  CHECK(bank.pseudo_class == std::vector<int>{1, 0, 1, 0});
  CHECK(bank.beta == std::vector<double>{0.3, 0.6, 0.3, 0.6});
  CHECK(bank.degenerate[1]);
  CHECK_FALSE(bank.degenerate[0]);
  for (std::size_t i : {0u, 2u, 3u}) {
    double n = 0.0;
    for (double v : bank.z[i]) n += v * v;
    CHECK(std::abs(std::sqrt(n) - 1.0) < 1e-9);
  }
}

TEST_CASE("simultaneous row permutation leaves the loss unchanged") {
  Rng rng(2);
  const CdclConfig cfg;
  FeatureBank bank;
  bank.z = random_unit_rows(12, 5, rng);
  for (int i = 0; i < 12; ++i) {
    bank.pseudo_class.push_back(static_cast<int>(rng.index(3)));
    bank.beta.push_back(rng.uniform_open());
    bank.degenerate.push_back(false);
  }
  std::vector<std::size_t> perm(12);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  FeatureBank shuffled;
  for (std::size_t k : perm) {
    shuffled.z.push_back(bank.z[k]);
    shuffled.pseudo_class.push_back(bank.pseudo_class[k]);
    shuffled.beta.push_back(bank.beta[k]);
    shuffled.degenerate.push_back(false);
  }
  CHECK(std::abs(cdcl_loss(bank, cfg).value - cdcl_loss(shuffled, cfg).value) < 1e-10);
}

TEST_CASE("each positive-pair term is linear in its gate") {
  Rng rng(3);
  const auto z = random_unit_rows(6, 3, rng);
  const auto sets = positive_sets(std::vector<int>{0, 0, 1, 0, 0, 1});
  std::vector<std::vector<double>> w;
  for (const auto& s : sets) {
    std::vector<double> row;
    for (std::size_t k = 0; k < s.size(); ++k) row.push_back(rng.uniform_open());
    w.push_back(row);
  }
  auto with_gate = [&](double g) {
    auto v = w;
    v[0][0] = g;
    return gated_infonce(z, sets, v, 0.2).value;
  };
  const double l0 = with_gate(0.0), l1 = with_gate(0.5), l2 = with_gate(1.0);
  CHECK(std::abs((l2 - l1) - (l1 - l0)) < 1e-10);
}

TEST_CASE("large temperature flattens the softmax") {
  Rng rng(4);
  const auto z = random_unit_rows(8, 4, rng);
  const std::vector<int> cls{0, 1, 0, 2, 0, 1, 0, 2};
  std::vector<double> bn(8);
  for (double& v : bn) v = rng.uniform_open();
  const auto sets = positive_sets(cls);
  const auto w = consensus_weights(bn, sets);
  double expect = 0.0;
  std::size_t anchors = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    if (sets[i].empty()) continue;
    ++anchors;
    double s = 0.0;
    for (double v : w[i]) s += v * std::log(7.0);
    expect += s / static_cast<double>(sets[i].size());
  }
  expect /= static_cast<double>(anchors);
  CHECK(std::abs(gated_infonce(z, sets, w, 1e4).value - expect) < 1e-3);
}

TEST_CASE("loss gradient through the projection head") {
  const auto f = oracle::small_fixture(5, 4, 4, 3);
  Rng rng(6);
  std::vector<std::vector<double>> strong = f.inputs;
  for (auto& x : strong)
    for (double& v : x) v += 0.3 * rng.normal();
  const std::vector<int> pseudo{0, 1, 1, 0};
  const std::vector<double> beta{0.2, 0.9, 0.4, 0.7};
  const CdclConfig cfg;
  FeatureBank bank;
  const auto eval = cdcl_network_loss(f.params, f.inputs, strong, pseudo, beta, cfg, &bank);
  CHECK(bank.rows() == 8);
  for (std::size_t r = 0; r < bank.rows(); ++r) REQUIRE_FALSE(bank.degenerate[r]);
  CHECK(eval.value == doctest::Approx(cdcl_loss(bank, cfg).value).epsilon(1e-14));
  const auto gc = oracle::check_gradient(
      f.params, [&](const ModelParams& q) { return cdcl_network_loss(q, f.inputs, strong, pseudo, beta, cfg).value; },
      eval.grad);
  CHECK(gc.max_rel_error < 1e-5);
}
