#include "hrp/cdcl.hpp"

#include <algorithm>
#include <cmath>

#include "hrp/errors.hpp"
#include "hrp/kernels.hpp"

namespace hrp {

void CdclConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("cdcl.tau must be positive");
  if (!(range_eps >= 0.0)) throw ConfigError("cdcl.range_eps must be nonnegative");
}

FeatureBank make_bank(std::span<const std::vector<double>> weak_emb,
                      std::span<const std::vector<double>> strong_emb,
                      std::span<const int> pseudo_class, std::span<const double> beta) {
  const std::size_t n = weak_emb.size();
  if (strong_emb.size() != n || pseudo_class.size() != n || beta.size() != n)
    throw ContractError("make_bank: mismatched lengths");
  FeatureBank bank;
  bank.z.reserve(2 * n);
  for (int half = 0; half < 2; ++half) {
    const auto& src = half == 0 ? weak_emb : strong_emb;
    for (std::size_t i = 0; i < n; ++i) {
      auto nz = l2_normalize(src[i]);
      bank.z.push_back(std::move(nz.unit));
      bank.degenerate.push_back(nz.degenerate);
      bank.pseudo_class.push_back(pseudo_class[i]);
      bank.beta.push_back(beta[i]);
    }
  }
  return bank;
}

std::vector<double> normalize_beta_literal(std::span<const double> beta) {
  if (beta.empty()) return {};
  const auto [lo, hi] = std::minmax_element(beta.begin(), beta.end());
  const double bmin = *lo, range = *hi - *lo;
  std::vector<double> out(beta.size());
  for (std::size_t i = 0; i < beta.size(); ++i) out[i] = (beta[i] - bmin) / (range + 1e-8);
  return out;
}

std::vector<double> normalize_beta(std::span<const double> beta, const CdclConfig& cfg) {
  if (beta.empty()) return {};
  const auto [lo, hi] = std::minmax_element(beta.begin(), beta.end());
  if (*hi - *lo < cfg.range_eps) return std::vector<double>(beta.size(), 1.0);
  return normalize_beta_literal(beta);
}

PositiveSets positive_sets(std::span<const int> pseudo_class) {
  const std::size_t n = pseudo_class.size();
  PositiveSets sets(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && pseudo_class[j] == pseudo_class[i]) sets[i].push_back(j);
  return sets;
}

std::vector<std::vector<double>> consensus_weights(std::span<const double> beta_norm,
                                                   const PositiveSets& sets) {
  std::vector<std::vector<double>> w(sets.size());
  for (std::size_t i = 0; i < sets.size(); ++i) {
    w[i].reserve(sets[i].size());
    for (std::size_t j : sets[i]) w[i].push_back(beta_norm[i] * beta_norm[j]);
  }
  return w;
}

CdclEval gated_infonce(std::span<const std::vector<double>> z, const PositiveSets& sets,
                       const std::vector<std::vector<double>>& weights, double tau) {
  const std::size_t n = z.size();
  const std::size_t dim = n ? z[0].size() : 0;
  CdclEval out;
  out.grad_z.assign(n, std::vector<double>(dim, 0.0));
  for (const auto& p : sets) out.anchors += p.empty() ? 0 : 1;
  if (out.anchors == 0 || n < 2) return out;

  const auto sim = kernels::gram(z);
  // dL/dS_ik, row-major
  std::vector<double> g(n * n, 0.0);
  const double inv_v = 1.0 / static_cast<double>(out.anchors);
  std::vector<double> logits(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (sets[i].empty()) continue;
    std::size_t m = 0;
    for (std::size_t k = 0; k < n; ++k)
      if (k != i) logits[m++] = sim[i * n + k] / tau;
    const double lse = log_sum_exp(logits);
    const double c = inv_v / static_cast<double>(sets[i].size());
    double term = 0.0, wsum = 0.0;
    for (std::size_t q = 0; q < sets[i].size(); ++q) {
      const std::size_t j = sets[i][q];
      const double w = weights[i][q];
      term += w * (sim[i * n + j] / tau - lse);
      wsum += w;
      g[i * n + j] -= c * w / tau;
    }
    out.value -= c * term;
    for (std::size_t k = 0; k < n; ++k)
      if (k != i) g[i * n + k] += c * wsum * std::exp(sim[i * n + k] / tau - lse) / tau;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      const double gik = g[i * n + k];
      if (gik == 0.0) continue;
      for (std::size_t d = 0; d < dim; ++d) {
        out.grad_z[i][d] += gik * z[k][d];
        out.grad_z[k][d] += gik * z[i][d];
      }
    }
  return out;
}

CdclEval cdcl_loss(const FeatureBank& bank, const CdclConfig& cfg) {
  const auto sets = positive_sets(bank.pseudo_class);
  const auto weights = consensus_weights(normalize_beta(bank.beta, cfg), sets);
  return gated_infonce(bank.z, sets, weights, cfg.tau);
}

LossEval cdcl_network_loss(const ModelParams& params, std::span<const std::vector<double>> weak,
                           std::span<const std::vector<double>> strong, std::span<const int> pseudo_class,
                           std::span<const double> beta, const CdclConfig& cfg, FeatureBank* bank_out) {
  const std::size_t n = weak.size();
  if (strong.size() != n) throw ContractError("cdcl: view counts differ");
  std::vector<std::vector<double>> inputs;
  inputs.reserve(2 * n);
  inputs.insert(inputs.end(), weak.begin(), weak.end());
  inputs.insert(inputs.end(), strong.begin(), strong.end());
  const auto fwd = kernels::forward_batch(params, inputs);
  std::vector<std::vector<double>> we(n), se(n);
  for (std::size_t i = 0; i < n; ++i) {
    we[i] = fwd[i].embedding;
    se[i] = fwd[n + i].embedding;
  }
  FeatureBank bank = make_bank(we, se, pseudo_class, beta);
  const auto eval = cdcl_loss(bank, cfg);

  std::vector<kernels::BackwardItem> items(2 * n);
  for (std::size_t r = 0; r < 2 * n; ++r) {
    items[r].x = inputs[r];
    items[r].fwd = &fwd[r];
    items[r].demb = l2_normalize_backward(fwd[r].embedding, eval.grad_z[r]);
  }
  LossEval out{eval.value, kernels::backward_sum(params, items)};
  if (bank_out) *bank_out = std::move(bank);
  return out;
}

}  // namespace hrp
