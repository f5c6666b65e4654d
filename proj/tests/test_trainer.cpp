#include <doctest.h>

#include <cmath>
#include <numeric>

#include "hrp/errors.hpp"
#include "hrp/metrics.hpp"
#include "hrp/trainer.hpp"
#include "oracles.hpp"

using namespace hrp;

namespace {

TrainData tiny_data(std::uint64_t seed, int per_class = 60) {
  const Dataset clean = make_blobs(4, per_class, 2, 0.5, seed);
  auto [train, meta] = split_meta(clean, 16, seed + 1);
  return {inject_symmetric_noise(train, 0.4, seed + 2), meta, make_blobs(4, 25, 2, 0.5, seed + 3),
          make_ood_blobs(4, 40, 2, 0.5, seed + 4)};
}

TrainConfig tiny_config(int epochs = 4) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = 32;
  cfg.t_start = 1;
  cfg.t_full = 3;
  cfg.arch = Arch{2, 16, 4, 6};
  cfg.augment = AugmentConfig::for_spread(0.5);
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("warm-up ramp") {
  TrainConfig cfg;
  cfg.t_start = 4;
  cfg.t_full = 8;
  CHECK(warmup(0, cfg) == 0.0);
  CHECK(warmup(3, cfg) == 0.0);
  CHECK(warmup(6, cfg) == 0.5);
  CHECK(warmup(8, cfg) == 1.0);
  CHECK(warmup(20, cfg) == 1.0);
  cfg.t_full = 4;
  CHECK(warmup(3, cfg) == 0.0);
  CHECK(warmup(4, cfg) == 1.0);
}

TEST_CASE("refined targets") {
  TrainConfig cfg;
  const std::vector<std::vector<double>> probs{{0.0, 1.0, 0.0}, {0.5, 0.3, 0.2}, {1.0 / 3, 1.0 / 3, 1.0 / 3}, {0.95, 0.03, 0.02}};
  const std::vector<int> given{0, 2, 1, 1};
  const auto t = refined_targets(probs, given, cfg, 1);
  CHECK(t[0].source == TargetSource::co_prediction);
  CHECK(t[0].dist == probs[0]);
  CHECK(t[1].source == TargetSource::given_label);
  CHECK(t[1].dist == one_hot(2, 3));
  CHECK(t[2].dist == one_hot(1, 3));
  CHECK(t[3].source == TargetSource::co_prediction);
  CHECK(t[3].dist[0] > 0.95);
  CHECK(t[3].confidence == 0.95);
  for (const auto& r : t) {
    CHECK(r.provider == 1);
    CHECK(std::abs(std::accumulate(r.dist.begin(), r.dist.end(), 0.0) - 1.0) < 1e-9);
  }
  for (double v : sharpen(probs[2], 0.5)) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("confidence filter") {
  TrainConfig cfg;
  const std::vector<std::vector<double>> probs{{0.92, 0.08}, {0.6, 0.4}, {0.1, 0.9}, {0.89, 0.11}};
  CHECK(confidence_filter(probs, cfg, 0.5) == std::vector<std::size_t>{0, 2});
  CHECK(confidence_filter(probs, cfg, 0.0) == std::vector<std::size_t>{0, 1, 2, 3});
  cfg.conf_threshold = 0.0;
  CHECK(confidence_filter(probs, cfg, 1.0).size() == 4);
  cfg.conf_threshold = 0.9;
  const std::vector<std::vector<double>> uniform(3, std::vector<double>{0.5, 0.5});
  CHECK(confidence_filter(uniform, cfg, 1.0).empty());
}

TEST_CASE("reweighted and consistency losses") {
  const auto f = oracle::small_fixture(2, 5);
  TrainConfig cfg;
  const std::vector<std::size_t> all{0, 1, 2, 3, 4}, some{1, 3};
  const std::vector<double> ones(5, 1.0), r{0.1, 0.7, 1.4, 2.0, 0.5};
  const double mean_ce = loss_batch(f.params, f.inputs, f.given, ones);

  SUBCASE("equal reliabilities scale the mean loss by 1 + eta_w") {
    const std::vector<double> same(5, 0.8);
    CHECK(reweighted_ce(f.params, f.inputs, f.given, same, all, cfg).value ==
          doctest::Approx((1.0 + cfg.eta_w) * mean_ce).epsilon(1e-8));
  }
  SUBCASE("eta_w = 0 is the plain mean") {
    cfg.eta_w = 0.0;
    CHECK(reweighted_ce(f.params, f.inputs, f.given, r, all, cfg).value == doctest::Approx(mean_ce).epsilon(1e-14));
  }
  SUBCASE("empty confident set") {
    CHECK(reweighted_ce(f.params, f.inputs, f.given, r, {}, cfg).value == 0.0);
    CHECK(consistency_loss(f.params, f.inputs, f.given, {}).value == 0.0);
  }
  SUBCASE("identical views reduce consistency to the unweighted term") {
    cfg.eta_w = 0.0;
    CHECK(consistency_loss(f.params, f.inputs, f.given, some).value ==
          doctest::Approx(reweighted_ce(f.params, f.inputs, f.given, r, some, cfg).value).epsilon(1e-14));
  }
  SUBCASE("own softmax as target gives the entropy") {
    std::vector<std::vector<double>> own;
    double entropy = 0.0;
    for (const auto& x : f.inputs) {
      own.push_back(softmax(forward(f.params, x).logits));
      for (double p : own.back()) entropy -= p * std::log(p) / 5.0;
    }
    CHECK(consistency_loss(f.params, f.inputs, own, all).value == doctest::Approx(entropy).epsilon(1e-12));
  }
  SUBCASE("finite differences") {
    CHECK(oracle::check_gradient(
              f.params, [&](const ModelParams& q) { return reweighted_ce(q, f.inputs, f.given, r, some, cfg).value; },
              reweighted_ce(f.params, f.inputs, f.given, r, some, cfg).grad)
              .max_rel_error < 1e-5);
    CHECK(oracle::check_gradient(
              f.params, [&](const ModelParams& q) { return consistency_loss(q, f.inputs, f.pseudo, all).value; },
              consistency_loss(f.params, f.inputs, f.pseudo, all).grad)
              .max_rel_error < 1e-5);
  }
}

TEST_CASE("joint objective") {
  TrainConfig cfg;
  const LossComponents c{1.5, 0.4, 0.3, 0.8};
  CHECK(total_loss(c, 0.0, cfg) == 1.5);
  cfg.lambda_cdcl = 0.0;
  CHECK(total_loss(c, 1.0, cfg) == doctest::Approx(1.5 + 0.4 + 0.3));
  const double w = 0.6, h = 1e-3;
  cfg.lambda_cdcl = 0.5;
  const double base = total_loss(c, w, cfg);
  cfg.lambda_cdcl = 0.5 + h;
  CHECK((total_loss(c, w, cfg) - base) / h == doctest::Approx(w * c.cdcl).epsilon(1e-9));
}

TEST_CASE("configuration checks") {
  TrainConfig cfg = tiny_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.t_start = 3;
  cfg.t_full = 2;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.conf_threshold = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.lambda_cdcl = NAN;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  TrainData data = tiny_data(1);
  data.meta = MetaSet{};
  CHECK_THROWS_AS(co_train(data, tiny_config()), ConfigError);
  TrainConfig base = tiny_config();
  base.method = Method::baseline;
  CHECK_NOTHROW(co_train(data, base));
}

TEST_CASE("zero epochs reports only the initial evaluation") {
  const auto r = co_train(tiny_data(1), tiny_config(0));
  CHECK(r.report.epochs.empty());
  CHECK(r.report.summary.best_epoch == -1);
  CHECK(r.report.summary.last_acc == r.report.initial.acc_ensemble);
}

TEST_CASE("training is deterministic") {
  const auto data = tiny_data(2);
  const auto a = co_train(data, tiny_config());
  const auto b = co_train(data, tiny_config());
  CHECK(report_to_json(a.report) == report_to_json(b.report));
  CHECK(a.net1.params.values == b.net1.params.values);
}

TEST_CASE("swapping network seeds swaps the per-network traces") {
  const auto data = tiny_data(3);
  TrainConfig cfg = tiny_config();
  const auto a = co_train(data, cfg);
  std::swap(cfg.seed_net1, cfg.seed_net2);
  const auto b = co_train(data, cfg);
  CHECK(a.net1.params.values == b.net2.params.values);
  CHECK(a.net2.params.values == b.net1.params.values);
  CHECK(a.report.initial.acc_net1 == b.report.initial.acc_net2);
  for (std::size_t e = 0; e < a.report.epochs.size(); ++e) {
    const auto &x = a.report.epochs[e], &y = b.report.epochs[e];
    CHECK(x.eval.acc_net1 == y.eval.acc_net2);
    CHECK(x.eval.acc_net2 == y.eval.acc_net1);
    CHECK(x.eval.acc_ensemble == y.eval.acc_ensemble);
    CHECK(x.loss_net1.total == y.loss_net2.total);
    CHECK(x.loss_net2.ram == y.loss_net1.ram);
    CHECK(x.mean_w_mix == y.mean_w_mix);
  }
}

TEST_CASE("warm-up updates do not depend on the auxiliary losses") {
  const auto data = tiny_data(4);
  TrainConfig cfg = tiny_config(3);
  cfg.t_start = 3;
  cfg.t_full = 3;
  const auto full = co_train(data, cfg);
  cfg.use_ram = cfg.use_cdcl = cfg.use_cr = false;
  const auto stubbed = co_train(data, cfg);
  CHECK(full.net1.params.values == stubbed.net1.params.values);
  CHECK(full.net2.params.values == stubbed.net2.params.values);
}

TEST_CASE("per-batch invariants and target provenance") {
  const auto data = tiny_data(5);
  const TrainConfig cfg = tiny_config();
  std::size_t batches = 0;
  bool provenance = true, mass_ok = true, nonneg = true, warmup_full = true;
  co_train(data, cfg, [&](const BatchTrace& t) {
    ++batches;
    for (const auto& r : t.targets) provenance = provenance && r.provider == 1 - t.net;
    const auto& rb = *t.reliability;
    double m = 0.0;
    for (std::size_t i = 0; i < rb.size(); ++i) {
      m += rb.alpha[i] + rb.beta[i];
      nonneg = nonneg && rb.alpha[i] >= 0.0 && rb.beta[i] >= 0.0;
    }
    const double n = static_cast<double>(rb.size());
    mass_ok = mass_ok && std::abs(m - n * rb.raw_mass / (rb.raw_mass + cfg.meta.xi)) < 1e-9;
    if (t.warmup == 0.0) warmup_full = warmup_full && t.losses.cr == 0.0 && t.losses.ram == 0.0;
    for (double r : t.total_reliability) mass_ok = mass_ok && r >= cfg.ram.r_min && r <= cfg.ram.r_max;
    CHECK(t.pairs.size() == t.ids.size());
  });
  CHECK(batches == 2 * 4 * 7);
  CHECK(provenance);
  CHECK(mass_ok);
  CHECK(nonneg);
  CHECK(warmup_full);
}

TEST_CASE("reliability stride reuses the last estimate") {
  const auto data = tiny_data(6);
  TrainConfig cfg = tiny_config(2);
  cfg.t_full = 2;
  cfg.reliability_stride = 3;
  CHECK_NOTHROW(co_train(data, cfg));
}

TEST_CASE("baseline runs plain cross-entropy") {
  TrainConfig cfg = tiny_config();
  cfg.method = Method::baseline;
  bool saw_reliability = false;
  const auto r = co_train(tiny_data(7), cfg, [&](const BatchTrace& t) { saw_reliability |= t.reliability != nullptr; });
  CHECK_FALSE(saw_reliability);
  CHECK(r.report.method == "baseline");
  for (const auto& e : r.report.epochs) {
    CHECK(e.loss_net1.ram == 0.0);
    CHECK(e.loss_net1.total == e.loss_net1.ce_re);
  }
}

TEST_CASE("non-finite loss aborts with a snapshot") {
  TrainConfig cfg = tiny_config();
  cfg.schedule.base_lr = 1e200;
  try {
    co_train(tiny_data(8), cfg);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK_FALSE(e.snapshot().empty());
  }
}

TEST_CASE("OOD summary is filled when OOD data is present") {
  const auto r = co_train(tiny_data(9), tiny_config());
  REQUIRE(r.report.summary.ood_auroc.has_value());
  CHECK(*r.report.summary.ood_auroc >= 0.0);
  CHECK(*r.report.summary.ood_auroc <= 1.0);
  REQUIRE(r.report.summary.ood_fpr95.has_value());
}
