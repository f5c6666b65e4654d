#include "hrp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "hrp/errors.hpp"
#include "hrp/format.hpp"
#include "hrp/kernels.hpp"
#include "hrp/metrics.hpp"
#include "hrp/rng.hpp"
#include "hrp/version.hpp"

namespace hrp {

std::string to_string(Method m) { return m == Method::hrp ? "hrp" : "baseline"; }

Method parse_method(const std::string& text) {
  if (text == "hrp") return Method::hrp;
  if (text == "baseline") return Method::baseline;
  throw ConfigError("unknown method '" + text + "'");
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("trainer.epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("trainer.batch_size must be >= 1");
  if (!(0 <= t_start && t_start <= t_full)) throw ConfigError("trainer requires 0 <= t_start <= t_full");
  if (t_full > epochs && epochs > 0) throw ConfigError("trainer requires t_full <= epochs");
  if (!(conf_threshold >= 0.0 && conf_threshold <= 1.0)) throw ConfigError("trainer.conf_threshold must lie in [0, 1]");
  if (!(sharpen_T > 0.0)) throw ConfigError("trainer.sharpen_T must be positive");
  if (reliability_stride < 1) throw ConfigError("trainer.reliability_stride must be >= 1");
  if (!std::isfinite(eta_w) || !std::isfinite(lambda_cdcl)) throw ConfigError("trainer coefficients must be finite");
  if (hist_bins < 1) throw ConfigError("metrics.hist_bins must be >= 1");
  if (!arch.valid()) throw ConfigError("invalid network architecture");
  if (!(schedule.base_lr > 0.0)) throw ConfigError("optim.lr must be positive");
  ram.validate();
  cdcl.validate();
  MetaConfig m = meta;
  m.eta_inner = schedule.base_lr;
  m.validate();
}

Schedule TrainConfig::effective_schedule() const {
  Schedule s = schedule;
  if (s.decay_epochs.empty()) {
    s.decay_epochs = {static_cast<int>(std::lround(0.6 * epochs)), static_cast<int>(std::lround(0.85 * epochs))};
  }
  return s;
}

double warmup(int epoch, const TrainConfig& cfg) {
  if (epoch < cfg.t_start) return 0.0;
  if (epoch >= cfg.t_full) return 1.0;
  return static_cast<double>(epoch - cfg.t_start) / static_cast<double>(cfg.t_full - cfg.t_start);
}

std::vector<double> sharpen(std::span<const double> probs, double temperature) {
  std::vector<double> out(probs.size());
  double z = 0.0;
  for (std::size_t c = 0; c < probs.size(); ++c) {
    out[c] = std::pow(probs[c], 1.0 / temperature);
    z += out[c];
  }
  for (double& v : out) v /= z;
  return out;
}

std::vector<RefinedTarget> refined_targets(std::span<const std::vector<double>> co_probs,
                                           std::span<const int> given_labels, const TrainConfig& cfg,
                                           int provider) {
  if (co_probs.size() != given_labels.size()) throw ContractError("refined_targets: length mismatch");
  std::vector<RefinedTarget> out(co_probs.size());
  for (std::size_t i = 0; i < co_probs.size(); ++i) {
    const double conf = msp(co_probs[i]);
    out[i].confidence = conf;
    out[i].provider = provider;
    if (conf >= cfg.conf_threshold) {
      out[i].dist = sharpen(co_probs[i], cfg.sharpen_T);
      out[i].source = TargetSource::co_prediction;
    } else {
      out[i].dist = one_hot(given_labels[i], static_cast<int>(co_probs[i].size()));
      out[i].source = TargetSource::given_label;
    }
  }
  return out;
}

std::vector<std::size_t> confidence_filter(std::span<const std::vector<double>> co_probs,
                                           const TrainConfig& cfg, double warmup_weight) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < co_probs.size(); ++i)
    if (warmup_weight == 0.0 || msp(co_probs[i]) >= cfg.conf_threshold) out.push_back(i);
  return out;
}

namespace {

template <class T>
std::vector<T> gather(std::span<const T> v, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(v[i]);
  return out;
}

}  // namespace

LossEval reweighted_ce(const ModelParams& params, std::span<const std::vector<double>> weak,
                       std::span<const std::vector<double>> targets, std::span<const double> reliability,
                       std::span<const std::size_t> confident, const TrainConfig& cfg) {
  if (confident.empty()) return {0.0, GradientVector(params.values.size())};
  double mean_r = 0.0;
  for (std::size_t i : confident) mean_r += reliability[i];
  mean_r /= static_cast<double>(confident.size());
  std::vector<double> weights;
  weights.reserve(confident.size());
  for (std::size_t i : confident) weights.push_back(1.0 + cfg.eta_w * reliability[i] / (mean_r + cfg.ram.delta));
  const auto xs = gather(weak, confident);
  const auto ys = gather(targets, confident);
  return weighted_ce(params, xs, ys, weights, static_cast<double>(confident.size()));
}

LossEval consistency_loss(const ModelParams& params, std::span<const std::vector<double>> strong,
                          std::span<const std::vector<double>> targets,
                          std::span<const std::size_t> confident) {
  if (confident.empty()) return {0.0, GradientVector(params.values.size())};
  const auto xs = gather(strong, confident);
  const auto ys = gather(targets, confident);
  const std::vector<double> ones(confident.size(), 1.0);
  return weighted_ce(params, xs, ys, ones, static_cast<double>(confident.size()));
}

double total_loss(const LossComponents& c, double warmup_weight, const TrainConfig& cfg) {
  return c.ce_re + warmup_weight * (c.cr + c.ram + cfg.lambda_cdcl * c.cdcl);
}

namespace {

// Per-network accumulators for one epoch.
struct EpochAccum {
  LossRecord loss;
  int batches = 0;
  Moments alpha_clean, alpha_noisy, beta_clean, beta_noisy;
  Purity purity;
  std::array<std::vector<std::int64_t>, 3> lambda_counts;
  std::array<Moments, 3> lambda_moments;
  Moments w_mix;
  double confident_fraction = 0.0;

  explicit EpochAccum(int bins) {
    for (auto& c : lambda_counts) c.assign(bins, 0);
  }
};

LossRecord average(const LossRecord& sum, int batches) {
  if (batches == 0) return {};
  const double inv = 1.0 / batches;
  return {sum.ce_re * inv, sum.cr * inv, sum.ram * inv, sum.cdcl * inv, sum.total * inv};
}

StatRecord combine(const Moments& a, const Moments& b) {
  Moments m = a;
  m += b;
  return {m.mean(), m.stddev()};
}

EvalRecord evaluate(const NetState& a, const NetState& b, const Dataset& test) {
  EvalRecord r;
  if (test.size() == 0) return r;
  std::vector<std::vector<double>> xs;
  std::vector<int> labels;
  for (const auto& s : test.samples) {
    xs.push_back(s.x);
    labels.push_back(s.y_true);
  }
  const auto pa = predict_probs(a.params, xs);
  const auto pb = predict_probs(b.params, xs);
  std::vector<int> ha, hb, he;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    ha.push_back(argmax(pa[i]));
    hb.push_back(argmax(pb[i]));
    std::vector<double> e(pa[i].size());
    for (std::size_t c = 0; c < e.size(); ++c) e[c] = 0.5 * (pa[i][c] + pb[i][c]);
    he.push_back(argmax(e));
  }
  r.acc_net1 = accuracy(ha, labels);
  r.acc_net2 = accuracy(hb, labels);
  r.acc_ensemble = accuracy(he, labels);
  return r;
}

std::string snapshot(int epoch, int batch, int net, const LossComponents& c, double w) {
  std::ostringstream s;
  s << "epoch=" << epoch << " batch=" << batch << " net=" << net + 1 << " ce_re=" << format_real(c.ce_re)
    << " cr=" << format_real(c.cr) << " ram=" << format_real(c.ram) << " cdcl=" << format_real(c.cdcl)
    << " warmup=" << format_real(w);
  return s.str();
}

struct BatchViews {
  std::vector<int> ids;
  std::vector<int> given;
  std::vector<bool> clean;
  std::vector<int> y_true;
  std::vector<std::vector<double>> weak, strong, given_onehot;
};

}  // namespace

TrainResult co_train(const TrainData& data, const TrainConfig& cfg_in, const BatchObserver& observer) {
  cfg_in.validate();
  TrainConfig cfg = cfg_in;
  cfg.schedule = cfg_in.effective_schedule();
  const bool hrp_mode = cfg.method == Method::hrp;
  if (hrp_mode && data.meta.size() == 0) throw ConfigError("reliability estimation needs a nonempty meta set");
  if (data.train.size() == 0) throw ConfigError("training set is empty");
  if (data.train.dim != cfg.arch.input || data.train.num_classes != cfg.arch.classes)
    throw ConfigError("dataset shape does not match the network architecture");

  const int C = cfg.arch.classes;
  std::array<NetState, 2> nets;
  const std::array<std::uint64_t, 2> seeds{cfg.seed_net1, cfg.seed_net2};
  for (int k = 0; k < 2; ++k)
    nets[k] = {init_params(cfg.arch, seeds[k]), OptState::fresh(cfg.arch, cfg.schedule), seeds[k]};

  RunReport report;
  report.artifact_version = kArtifactVersion;
  report.method = to_string(cfg.method);
  report.seed = cfg.seed;
  report.seed_net1 = cfg.seed_net1;
  report.seed_net2 = cfg.seed_net2;
  report.hist_bins = cfg.hist_bins;
  report.initial = evaluate(nets[0], nets[1], data.test);
  report.summary.best_acc = report.initial.acc_ensemble;
  report.summary.best_epoch = -1;
  report.summary.last_acc = report.initial.acc_ensemble;

  // last known (alpha, beta) per sample id, per network, for stride > 1
  int max_id = 0;
  for (const auto& s : data.train.samples) max_id = std::max(max_id, s.id);
  std::array<std::vector<std::pair<double, double>>, 2> rel_cache;
  for (auto& c : rel_cache) c.assign(static_cast<std::size_t>(max_id) + 1, {0.5, 0.5});

  const std::size_t n_train = data.train.size();
  const std::size_t B = static_cast<std::size_t>(cfg.batch_size);
  std::uint64_t batch_counter = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double w = warmup(epoch, cfg);
    const double lr = cfg.schedule.lr_at(epoch);
    MetaConfig meta_cfg = cfg.meta;
    meta_cfg.eta_inner = lr;

    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seed, 0x5bf1e, epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());

    std::array<EpochAccum, 2> acc{EpochAccum(cfg.hist_bins), EpochAccum(cfg.hist_bins)};
    int batch_index = 0;
    for (std::size_t start = 0; start < n_train; start += B, ++batch_index, ++batch_counter) {
      const std::size_t n = std::min(B, n_train - start);
      BatchViews bv;
      for (std::size_t q = 0; q < n; ++q) {
        const auto& s = data.train.samples[order[start + q]];
        auto views = make_views(s, cfg.augment, derive_seed(cfg.seed, 0x71e5, epoch, s.id));
        bv.ids.push_back(s.id);
        bv.given.push_back(s.y_obs);
        bv.clean.push_back(s.label_clean());
        bv.y_true.push_back(s.y_true);
        bv.weak.push_back(std::move(views.weak));
        bv.strong.push_back(std::move(views.strong));
        bv.given_onehot.push_back(one_hot(s.y_obs, C));
      }

      // frozen pre-update outputs of both networks
      std::array<std::vector<std::vector<double>>, 2> probs;
      if (hrp_mode)
        for (int k = 0; k < 2; ++k) probs[k] = predict_probs(nets[k].params, bv.weak);

      std::array<GradientVector, 2> grads;
      for (int k = 0; k < 2; ++k) {
        const NetState& self = nets[k];
        EpochAccum& ea = acc[k];
        LossComponents comp;
        BatchTrace trace;
        trace.epoch = epoch;
        trace.batch = batch_index;
        trace.net = k;
        trace.ids = bv.ids;
        trace.warmup = w;

        if (!hrp_mode) {
          const std::vector<double> ones(n, 1.0);
          auto ce = weighted_ce(self.params, bv.weak, bv.given_onehot, ones, static_cast<double>(n));
          comp.ce_re = ce.value;
          grads[k] = std::move(ce.grad);
          ea.confident_fraction += 1.0;
        } else {
          const int co = 1 - k;
          const auto& co_probs = probs[co];
          std::vector<int> pseudo(n);
          std::vector<std::vector<double>> pseudo_onehot(n);
          for (std::size_t i = 0; i < n; ++i) {
            pseudo[i] = argmax(co_probs[i]);
            pseudo_onehot[i] = one_hot(pseudo[i], C);
          }
          const auto targets = refined_targets(co_probs, bv.given, cfg, co);
          std::vector<std::vector<double>> dists(n);
          for (std::size_t i = 0; i < n; ++i) dists[i] = targets[i].dist;
          const auto confident = confidence_filter(co_probs, cfg, w);
          ea.confident_fraction += static_cast<double>(confident.size()) / static_cast<double>(n);

          ReliabilityBatch rb;
          if (batch_counter % static_cast<std::uint64_t>(cfg.reliability_stride) == 0) {
            const MetaBatch mb{bv.weak, bv.given_onehot, pseudo_onehot};
            const auto mg = meta_gradients_closed(self.params, mb, data.meta, meta_cfg);
            rb = cfg.couple_meta ? disentangle_coupled(meta_gradients_coupled(mg), meta_cfg, n)
                                 : disentangle(mg.given, mg.pseudo, meta_cfg, n);
            for (std::size_t i = 0; i < n; ++i) rel_cache[k][bv.ids[i]] = {rb.alpha[i], rb.beta[i]};
          } else {
            for (std::size_t i = 0; i < n; ++i) {
              rb.alpha.push_back(rel_cache[k][bv.ids[i]].first);
              rb.beta.push_back(rel_cache[k][bv.ids[i]].second);
            }
            rb.raw_given = rb.alpha;
            rb.raw_pseudo = rb.beta;
            rb.raw_mass = std::accumulate(rb.alpha.begin(), rb.alpha.end(), 0.0) +
                          std::accumulate(rb.beta.begin(), rb.beta.end(), 0.0);
          }
          rb.ids = bv.ids;
          for (std::size_t i = 0; i < n; ++i)
            if (!std::isfinite(rb.alpha[i]) || !std::isfinite(rb.beta[i]))
              throw DivergenceError("non-finite reliability", snapshot(epoch, batch_index, k, comp, w));

          std::vector<double> r(n);
          for (std::size_t i = 0; i < n; ++i) {
            r[i] = total_reliability(rb.alpha[i], rb.beta[i], cfg.ram);
            (bv.clean[i] ? ea.alpha_clean : ea.alpha_noisy).add(rb.alpha[i]);
            (bv.clean[i] ? ea.beta_clean : ea.beta_noisy).add(rb.beta[i]);
          }

          // pairs come from the network's own stream, so building them never
          // perturbs anything else; they also feed the lambda / w_mix traces
          Rng ram_rng(derive_seed(self.seed, 0x7a3, epoch, batch_index));
          const auto pairs = build_pairs(bv.weak, r, dists, cfg.ram, ram_rng);
          for (const auto& p : pairs) {
            const int type = bv.clean[p.i] && bv.clean[p.j]    ? clean_clean
                             : !bv.clean[p.i] && !bv.clean[p.j] ? noisy_noisy
                                                                : clean_noisy;
            const int bin = std::min(cfg.hist_bins - 1, static_cast<int>(p.lambda * cfg.hist_bins));
            ++ea.lambda_counts[type][bin];
            ea.lambda_moments[type].add(p.lambda);
            ea.w_mix.add(p.w_mix);
          }

          // positive-pair purity on the 2N bank (both views share class and beta)
          {
            std::vector<int> bank_class(2 * n), bank_truth(2 * n);
            std::vector<double> bank_beta(2 * n);
            for (std::size_t i = 0; i < n; ++i) {
              bank_class[i] = bank_class[n + i] = pseudo[i];
              bank_truth[i] = bank_truth[n + i] = bv.y_true[i];
              bank_beta[i] = bank_beta[n + i] = rb.beta[i];
            }
            const auto sets = positive_sets(bank_class);
            const auto weights = consensus_weights(normalize_beta(bank_beta, cfg.cdcl), sets);
            const auto pur = pair_purity(sets, weights, bank_truth);
            ea.purity.pairs += pur.pairs;
            ea.purity.matches += pur.matches;
            ea.purity.weight += pur.weight;
            ea.purity.weighted_matches += pur.weighted_matches;
          }

          auto ce = reweighted_ce(self.params, bv.weak, dists, r, confident, cfg);
          comp.ce_re = ce.value;
          GradientVector g = std::move(ce.grad);
          if (w > 0.0) {
            if (cfg.use_cr) {
              auto cr = consistency_loss(self.params, bv.strong, dists, confident);
              comp.cr = cr.value;
              g += w * std::move(cr.grad);
            }
            if (cfg.use_ram) {
              auto rl = ram_loss(self.params, pairs);
              comp.ram = rl.value;
              g += w * std::move(rl.grad);
            }
            if (cfg.use_cdcl) {
              auto cd = cdcl_network_loss(self.params, bv.weak, bv.strong, pseudo, rb.beta, cfg.cdcl);
              comp.cdcl = cd.value;
              g += (w * cfg.lambda_cdcl) * std::move(cd.grad);
            }
          }
          grads[k] = std::move(g);

          trace.targets = targets;
          trace.reliability = &rb;
          trace.total_reliability = r;
          trace.pairs = pairs;
          trace.pseudo_class = pseudo;
          trace.losses = comp;
          trace.total = total_loss(comp, w, cfg);
          if (!std::isfinite(trace.total))
            throw DivergenceError("non-finite training loss", snapshot(epoch, batch_index, k, comp, w));
          ea.loss.ce_re += comp.ce_re;
          ea.loss.cr += comp.cr;
          ea.loss.ram += comp.ram;
          ea.loss.cdcl += comp.cdcl;
          ea.loss.total += trace.total;
          ++ea.batches;
          if (observer) observer(trace);
          continue;
        }

        trace.losses = comp;
        trace.total = total_loss(comp, w, cfg);
        if (!std::isfinite(trace.total))
          throw DivergenceError("non-finite training loss", snapshot(epoch, batch_index, k, comp, w));
        ea.loss.ce_re += comp.ce_re;
        ea.loss.total += trace.total;
        ++ea.batches;
        if (observer) observer(trace);
      }

      for (int k = 0; k < 2; ++k) {
        auto [p, o] = sgd_step(nets[k].params, grads[k], nets[k].opt, epoch);
        nets[k].params = std::move(p);
        nets[k].opt = std::move(o);
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.warmup = w;
    rec.loss_net1 = average(acc[0].loss, acc[0].batches);
    rec.loss_net2 = average(acc[1].loss, acc[1].batches);
    rec.eval = evaluate(nets[0], nets[1], data.test);
    rec.confident_fraction = (acc[0].confident_fraction + acc[1].confident_fraction) /
                             (acc[0].batches + acc[1].batches > 0 ? acc[0].batches + acc[1].batches : 1);
    if (hrp_mode) {
      rec.alpha_clean = combine(acc[0].alpha_clean, acc[1].alpha_clean);
      rec.alpha_noisy = combine(acc[0].alpha_noisy, acc[1].alpha_noisy);
      rec.beta_clean = combine(acc[0].beta_clean, acc[1].beta_clean);
      rec.beta_noisy = combine(acc[0].beta_noisy, acc[1].beta_noisy);
      const double pairs = acc[0].purity.pairs + acc[1].purity.pairs;
      const double weight = acc[0].purity.weight + acc[1].purity.weight;
      if (pairs > 0.0) rec.purity_raw = (acc[0].purity.matches + acc[1].purity.matches) / pairs;
      if (weight > 0.0)
        rec.purity_gated = (acc[0].purity.weighted_matches + acc[1].purity.weighted_matches) / weight;
      for (int t = 0; t < 3; ++t) {
        rec.lambda.counts[t].assign(cfg.hist_bins, 0);
        for (int b = 0; b < cfg.hist_bins; ++b)
          rec.lambda.counts[t][b] = acc[0].lambda_counts[t][b] + acc[1].lambda_counts[t][b];
        Moments m = acc[0].lambda_moments[t];
        m += acc[1].lambda_moments[t];
        rec.lambda.mean[t] = m.mean();
      }
      Moments wm = acc[0].w_mix;
      wm += acc[1].w_mix;
      rec.mean_w_mix = wm.mean();
    } else {
      for (int t = 0; t < 3; ++t) rec.lambda.counts[t].assign(cfg.hist_bins, 0);
    }
    if (rec.eval.acc_ensemble > report.summary.best_acc) {
      report.summary.best_acc = rec.eval.acc_ensemble;
      report.summary.best_epoch = epoch;
    }
    report.summary.last_acc = rec.eval.acc_ensemble;
    report.epochs.push_back(std::move(rec));
  }

  if (cfg.evaluate_ood && !data.ood.empty() && data.test.size() > 0) {
    std::vector<std::vector<double>> id_inputs;
    for (const auto& s : data.test.samples) id_inputs.push_back(s.x);
    OodScoreSet scores;
    for (const auto& p : ensemble_probs(nets[0].params, nets[1].params, id_inputs)) scores.id_scores.push_back(msp(p));
    for (const auto& p : ensemble_probs(nets[0].params, nets[1].params, data.ood)) scores.ood_scores.push_back(msp(p));
    report.summary.ood_auroc = auroc(scores);
    report.summary.ood_fpr95 = fpr_at_95_tpr(scores);
  }

  return {std::move(report), std::move(nets[0]), std::move(nets[1])};
}

}  // namespace hrp
