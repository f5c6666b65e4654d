#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "hrp/errors.hpp"
#include "hrp/ram.hpp"
#include "hrp/rng.hpp"
#include "hrp/trainer.hpp"

namespace hrp::oracle {

NaiveOutput naive_forward(const ModelParams& params, std::span<const double> x) {
  const Arch& a = params.arch;
  const auto& p = params.values;
  std::vector<double> h1(a.hidden), h2(a.hidden);
  for (int r = 0; r < a.hidden; ++r) {
    double s = p[a.b1() + r];
    for (int c = 0; c < a.input; ++c) s += p[a.w1() + r * a.input + c] * x[c];
    h1[r] = std::max(s, 0.0);
  }
  for (int r = 0; r < a.hidden; ++r) {
    double s = p[a.b2() + r];
    for (int c = 0; c < a.hidden; ++c) s += p[a.w2() + r * a.hidden + c] * h1[c];
    h2[r] = std::max(s, 0.0);
  }
  NaiveOutput out;
  for (int r = 0; r < a.classes; ++r) {
    double s = p[a.bc() + r];
    for (int c = 0; c < a.hidden; ++c) s += p[a.wc() + r * a.hidden + c] * h2[c];
    out.logits.push_back(s);
  }
  for (int r = 0; r < a.proj; ++r) {
    double s = p[a.bp() + r];
    for (int c = 0; c < a.hidden; ++c) s += p[a.wp() + r * a.hidden + c] * h2[c];
    out.embedding.push_back(s);
  }
  return out;
}

double naive_ce(std::span<const double> logits, std::span<const double> target) {
  double z = 0.0;
  for (double l : logits) z += std::exp(l);
  double loss = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) loss -= target[c] * std::log(std::exp(logits[c]) / z);
  return loss;
}

double rel_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

GradCheck check_gradient(const ModelParams& params, const std::function<double(const ModelParams&)>& loss,
                         const GradientVector& analytic, double step, double floor) {
  GradCheck gc;
  ModelParams probe = params;
  for (std::size_t k = 0; k < params.values.size(); ++k) {
    const double orig = probe.values[k];
    probe.values[k] = orig + step;
    const double up = loss(probe);
    probe.values[k] = orig - step;
    const double down = loss(probe);
    probe.values[k] = orig;
    const double numeric = (up - down) / (2.0 * step);
    const double e = rel_error(analytic.values[k], numeric, floor);
    if (e > gc.max_rel_error) {
      gc.max_rel_error = e;
      gc.worst_index = k;
    }
    ++gc.checked;
  }
  return gc;
}

double naive_meta_loss(const ModelParams& params, const MetaSet& meta) {
  double acc = 0.0;
  for (const auto& s : meta.samples) {
    std::vector<double> t(params.arch.classes, 0.0);
    t[s.y_true] = 1.0;
    acc += naive_ce(naive_forward(params, s.x).logits, t);
  }
  return acc / static_cast<double>(meta.size());
}

MetaGradients meta_gradients_fd(const ModelParams& params, const MetaBatch& batch, const MetaSet& meta,
                                const MetaConfig& cfg) {
  if (meta.size() == 0) throw ConfigError("meta set is empty");
  const std::size_t n = batch.inputs.size();
  auto perturbed_meta_loss = [&](std::size_t i, int which, double eps) {
    std::vector<double> e1(n, 0.0), e2(n, 0.0);
    (which == 0 ? e1 : e2)[i] = eps;
    // grad of (1/|B|) sum_i (e1_i CE(y_i) + e2_i CE(pseudo_i))
    GradientVector g = grad_batch(params, batch.inputs, batch.given_targets, e1);
    g += grad_batch(params, batch.inputs, batch.pseudo_targets, e2);
    const ModelParams virtual_step = params.moved(g, cfg.eta_inner);
    return naive_meta_loss(virtual_step, meta);
  };
  MetaGradients out;
  out.given.resize(n);
  out.pseudo.resize(n);
  const double h = cfg.fd_step;
  for (std::size_t i = 0; i < n; ++i) {
    out.given[i] = (perturbed_meta_loss(i, 0, h) - perturbed_meta_loss(i, 0, -h)) / (2.0 * h);
    out.pseudo[i] = (perturbed_meta_loss(i, 1, h) - perturbed_meta_loss(i, 1, -h)) / (2.0 * h);
  }
  return out;
}

double meta_discrepancy(const MetaGradients& a, const MetaGradients& b, double floor) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.given.size(); ++i) {
    worst = std::max(worst, rel_error(a.given[i], b.given[i], floor));
    worst = std::max(worst, rel_error(a.pseudo[i], b.pseudo[i], floor));
  }
  return worst;
}

double naive_cdcl(std::span<const std::vector<double>> z, std::span<const int> pseudo_class,
                  std::span<const double> beta_norm, double tau) {
  const std::size_t n = z.size();
  auto dot = [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t d = 0; d < z[i].size(); ++d) s += z[i][d] * z[j][d];
    return s;
  };
  double total = 0.0;
  std::size_t anchors = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t positives = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && pseudo_class[j] == pseudo_class[i]) ++positives;
    if (positives == 0) continue;
    ++anchors;
    double denom = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      if (k != i) denom += std::exp(dot(i, k) / tau);
    double term = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || pseudo_class[j] != pseudo_class[i]) continue;
      term += beta_norm[i] * beta_norm[j] * std::log(std::exp(dot(i, j) / tau) / denom);
    }
    total += -term / static_cast<double>(positives);
  }
  return anchors ? total / static_cast<double>(anchors) : 0.0;
}

BetaMoments beta_moments(double a, double b) {
  const double s = a + b;
  return {a / s, a * b / (s * s * (s + 1.0))};
}

double auroc_bruteforce(const OodScoreSet& scores) {
  double wins = 0.0;
  for (double i : scores.id_scores)
    for (double o : scores.ood_scores) wins += i > o ? 1.0 : (i == o ? 0.5 : 0.0);
  return wins / (static_cast<double>(scores.id_scores.size()) * static_cast<double>(scores.ood_scores.size()));
}

double fpr95_sweep(const OodScoreSet& scores) {
  std::vector<double> thresholds = scores.id_scores;
  thresholds.insert(thresholds.end(), scores.ood_scores.begin(), scores.ood_scores.end());
  double best = 1.0;
  for (double t : thresholds) {
    double tp = 0.0, fp = 0.0;
    for (double s : scores.id_scores) tp += s >= t;
    for (double s : scores.ood_scores) fp += s >= t;
    if (tp / static_cast<double>(scores.id_scores.size()) >= 0.95)
      best = std::min(best, fp / static_cast<double>(scores.ood_scores.size()));
  }
  return best;
}

double nearest_center_accuracy(const Dataset& ds, const std::vector<std::vector<double>>& centers) {
  std::size_t hits = 0;
  for (const auto& s : ds.samples) {
    int best = 0;
    double best_d = INFINITY;
    for (std::size_t c = 0; c < centers.size(); ++c) {
      double d = 0.0;
      for (std::size_t k = 0; k < s.x.size(); ++k) d += (s.x[k] - centers[c][k]) * (s.x[k] - centers[c][k]);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    hits += best == s.y_true;
  }
  return static_cast<double>(hits) / static_cast<double>(ds.size());
}

Fixture small_fixture(std::uint64_t seed, std::size_t batch, std::size_t meta, int proj) {
  Fixture f;
  const Arch arch{3, 4, 2, proj};
  f.params = init_params(arch, seed);
  Rng rng(derive_seed(seed, 0xf1));
  // nonzero biases keep the rectifiers away from symmetric configurations
  for (std::size_t k = 0; k < static_cast<std::size_t>(arch.hidden); ++k) {
    f.params.values[arch.b1() + k] = 0.3 * rng.normal();
    f.params.values[arch.b2() + k] = 0.3 * rng.normal();
  }
  for (int c = 0; c < arch.classes; ++c) f.params.values[arch.bc() + c] = 0.3 * rng.normal();
  for (int c = 0; c < arch.proj; ++c) f.params.values[arch.bp() + c] = 0.3 * rng.normal();
  auto sample = [&] {
    std::vector<double> x(arch.input);
    for (double& v : x) v = rng.normal();
    return x;
  };
  for (std::size_t i = 0; i < batch; ++i) {
    f.inputs.push_back(sample());
    f.given.push_back(one_hot(static_cast<int>(rng.index(2)), 2));
    f.pseudo.push_back(one_hot(argmax(forward(f.params, f.inputs.back()).logits), 2));
  }
  for (std::size_t j = 0; j < meta; ++j) {
    LabeledSample s;
    s.id = static_cast<int>(1000 + j);
    s.x = sample();
    s.y_true = s.y_obs = static_cast<int>(j % 2);
    f.meta.samples.push_back(std::move(s));
  }
  return f;
}

namespace {

struct Reporter {
  std::ostream& out;
  SuiteResult result;

  void check(const std::string& name, double observed, double tolerance, bool pass) {
    out << (pass ? "PASS " : "FAIL ") << std::left << std::setw(52) << name << " observed=" << std::scientific
        << std::setprecision(3) << observed << " tol=" << tolerance << std::defaultfloat << '\n';
    (pass ? result.passed : result.failed) += 1;
  }
  void below(const std::string& name, double observed, double tolerance) {
    check(name, observed, tolerance, observed < tolerance);
  }
};

void suite_meta(Reporter& r) {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  const int seeds = 100;
  for (int s = 0; s < seeds; ++s) {
    const auto f = small_fixture(static_cast<std::uint64_t>(s));
    MetaConfig cfg;
    cfg.eta_inner = 0.05;
    const MetaBatch mb{f.inputs, f.given, f.pseudo};
    const auto closed = meta_gradients_closed(f.params, mb, f.meta, cfg);
    const auto fd = meta_gradients_fd(f.params, mb, f.meta, cfg);
    worst = std::max(worst, meta_discrepancy(closed, fd));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.below("meta: closed vs virtual-step FD, 100 fixtures", worst, 1e-3);
  r.below("meta: runtime seconds", secs, 60.0);
}

void suite_losses(Reporter& r) {
  const double tol = 1e-5;
  double worst_ce = 0, worst_wce = 0, worst_ram = 0, worst_cr = 0, worst_re = 0, worst_cdcl = 0, worst_total = 0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto f = small_fixture(s, 6, 4, 3);
    const auto& p = f.params;
    Rng rng(derive_seed(s, 0x1055));
    std::vector<double> ones(f.inputs.size(), 1.0), w(f.inputs.size());
    for (double& v : w) v = rng.uniform_open() * 2.0;

    worst_ce = std::max(worst_ce, check_gradient(p, [&](const ModelParams& q) { return loss_batch(q, f.inputs, f.given, ones); },
                                                 grad_batch(p, f.inputs, f.given, ones)).max_rel_error);
    worst_wce = std::max(worst_wce, check_gradient(p, [&](const ModelParams& q) { return loss_batch(q, f.inputs, f.given, w); },
                                                   grad_batch(p, f.inputs, f.given, w)).max_rel_error);

    RamConfig rc;
    std::vector<double> rel(f.inputs.size());
    for (double& v : rel) v = 0.1 + 1.9 * rng.uniform_open();
    const auto pairs = build_pairs(f.inputs, rel, f.given, rc, rng);
    worst_ram = std::max(worst_ram, check_gradient(p, [&](const ModelParams& q) { return ram_loss(q, pairs).value; },
                                                   ram_loss(p, pairs).grad).max_rel_error);

    std::vector<std::vector<double>> strong = f.inputs;
    for (auto& x : strong)
      for (double& v : x) v += 0.2 * rng.normal();
    const std::vector<std::size_t> confident{0, 2, 3, 5};
    worst_cr = std::max(worst_cr, check_gradient(p, [&](const ModelParams& q) { return consistency_loss(q, strong, f.given, confident).value; },
                                                 consistency_loss(p, strong, f.given, confident).grad).max_rel_error);
    TrainConfig tc;
    worst_re = std::max(worst_re, check_gradient(p, [&](const ModelParams& q) { return reweighted_ce(q, f.inputs, f.given, rel, confident, tc).value; },
                                                 reweighted_ce(p, f.inputs, f.given, rel, confident, tc).grad).max_rel_error);

    std::vector<int> pseudo{0, 1, 0, 1, 1, 0};
    std::vector<double> beta(f.inputs.size());
    for (double& v : beta) v = rng.uniform_open();
    CdclConfig cc;
    worst_cdcl = std::max(worst_cdcl, check_gradient(p, [&](const ModelParams& q) { return cdcl_network_loss(q, f.inputs, strong, pseudo, beta, cc).value; },
                                                     cdcl_network_loss(p, f.inputs, strong, pseudo, beta, cc).grad).max_rel_error);

    const double wt = 0.7;
    auto total = [&](const ModelParams& q) {
      LossComponents c{reweighted_ce(q, f.inputs, f.given, rel, confident, tc).value,
                       consistency_loss(q, strong, f.given, confident).value, ram_loss(q, pairs).value,
                       cdcl_network_loss(q, f.inputs, strong, pseudo, beta, cc).value};
      return total_loss(c, wt, tc);
    };
    GradientVector g = reweighted_ce(p, f.inputs, f.given, rel, confident, tc).grad;
    g += wt * consistency_loss(p, strong, f.given, confident).grad;
    g += wt * ram_loss(p, pairs).grad;
    g += (wt * tc.lambda_cdcl) * cdcl_network_loss(p, f.inputs, strong, pseudo, beta, cc).grad;
    worst_total = std::max(worst_total, check_gradient(p, total, g).max_rel_error);
  }
  r.below("losses: plain CE gradient vs FD", worst_ce, tol);
  r.below("losses: weighted CE gradient vs FD", worst_wce, tol);
  r.below("losses: RAM (gated Mixup) gradient vs FD", worst_ram, tol);
  r.below("losses: consistency gradient vs FD", worst_cr, tol);
  r.below("losses: reweighted CE gradient vs FD", worst_re, tol);
  r.below("losses: CDCL gradient vs FD", worst_cdcl, tol);
  r.below("losses: joint objective gradient vs FD", worst_total, tol);
}

void suite_beta(Reporter& r) {
  RamConfig cfg;
  cfg.gamma = 4.0;
  const int n = 100000;
  const std::pair<double, double> cases[] = {{1.0, 1.0}, {3.0, 1.0}, {0.1, 2.0}};
  for (const auto& [ri, rj] : cases) {
    Rng rng(derive_seed(0xbe7a, static_cast<std::uint64_t>(ri * 1000), static_cast<std::uint64_t>(rj * 1000)));
    std::vector<double> draws(n);
    for (double& v : draws) v = sample_lambda(ri, rj, cfg, rng);
    double mean = 0.0;
    for (double v : draws) mean += v;
    mean /= n;
    double m2 = 0.0, m4 = 0.0;
    for (double v : draws) {
      const double d = v - mean;
      m2 += d * d;
      m4 += d * d * d * d;
    }
    m2 /= n;
    m4 /= n;
    const double denom = ri + rj + cfg.delta;
    const auto exact = beta_moments(cfg.gamma * ri / denom, cfg.gamma * rj / denom);
    const double se_mean = std::sqrt(m2 / n);
    const double se_var = std::sqrt((m4 - m2 * m2) / n);
    std::ostringstream label;
    label << "beta: (r_i, r_j) = (" << ri << ", " << rj << ")";
    r.below(label.str() + " mean, in std errors", std::abs(mean - exact.mean) / se_mean, 4.0);
    r.below(label.str() + " variance, in std errors", std::abs(m2 - exact.var) / se_var, 4.0);
    if (ri == rj) {
      const auto limit = beta_moments(cfg.gamma / 2.0, cfg.gamma / 2.0);
      r.below("beta: equal reliabilities match Beta(gamma/2, gamma/2) mean", std::abs(mean - limit.mean) / se_mean, 4.0);
      r.below("beta: equal reliabilities match Beta(gamma/2, gamma/2) var", std::abs(m2 - limit.var) / se_var, 4.0);
    }
  }
}

void suite_cdcl(Reporter& r) {
  double worst = 0.0;
  CdclConfig cfg;
  for (std::uint64_t s = 0; s < 40; ++s) {
    Rng rng(derive_seed(s, 0xcdc1));
    const std::size_t rows = 2 * (1 + s % 16);
    const std::size_t dim = 3 + s % 5;
    std::vector<std::vector<double>> z(rows);
    std::vector<int> cls(rows);
    std::vector<double> beta(rows);
    for (std::size_t i = 0; i < rows; ++i) {
      std::vector<double> v(dim);
      for (double& x : v) x = rng.normal();
      z[i] = l2_normalize(v).unit;
      cls[i] = static_cast<int>(rng.index(3));
      beta[i] = rng.uniform_open();
    }
    const auto bn = normalize_beta(beta, cfg);
    const auto sets = positive_sets(cls);
    const double fast = gated_infonce(z, sets, consensus_weights(bn, sets), cfg.tau).value;
    const double slow = naive_cdcl(z, cls, bn, cfg.tau);
    worst = std::max(worst, std::abs(fast - slow));
  }
  r.below("cdcl: stabilized vs naive double loop (2N <= 32)", worst, 1e-10);

  const std::vector<std::vector<double>> same(4, std::vector<double>{1.0, 0.0});
  const std::vector<int> cls{0, 1, 0, 1};
  const PositiveSets sets = positive_sets(cls);
  const std::vector<std::vector<double>> ones(4, std::vector<double>{1.0});
  r.below("cdcl: uniform-similarity case equals log 3", std::abs(gated_infonce(same, sets, ones, cfg.tau).value - std::log(3.0)), 1e-9);
}

void suite_auroc(Reporter& r) {
  double worst_auc = 0.0, worst_fpr = 0.0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    Rng rng(derive_seed(s, 0xa0c));
    OodScoreSet sc;
    const std::size_t ni = 5 + s % 30, no = 3 + (s * 7) % 40;
    for (std::size_t k = 0; k < ni; ++k) sc.id_scores.push_back(std::round(10.0 * (0.5 + 0.3 * rng.normal())) / 10.0);
    for (std::size_t k = 0; k < no; ++k) sc.ood_scores.push_back(std::round(10.0 * (0.3 + 0.3 * rng.normal())) / 10.0);
    worst_auc = std::max(worst_auc, std::abs(auroc(sc) - auroc_bruteforce(sc)));
    worst_fpr = std::max(worst_fpr, std::abs(fpr_at_95_tpr(sc) - fpr95_sweep(sc)));
  }
  r.below("auroc: rank formula vs pairwise count (with ties)", worst_auc, 1e-12);
  r.below("fpr95: production vs exhaustive threshold sweep", worst_fpr, 1e-12);
}

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"meta", "losses", "beta", "cdcl", "auroc", "all"};
  return names;
}

SuiteResult run_suite(const std::string& name, std::ostream& out) {
  Reporter r{out, {}};
  const bool all = name == "all";
  bool known = all;
  if (all || name == "meta") suite_meta(r), known = true;
  if (all || name == "losses") suite_losses(r), known = true;
  if (all || name == "beta") suite_beta(r), known = true;
  if (all || name == "cdcl") suite_cdcl(r), known = true;
  if (all || name == "auroc") suite_auroc(r), known = true;
  if (!known) throw std::invalid_argument("unknown oracle suite '" + name + "'");
  return r.result;
}

}  // namespace hrp::oracle
