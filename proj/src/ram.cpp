#include "hrp/ram.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hrp/errors.hpp"

namespace hrp {

void RamConfig::validate() const {
  if (!(gamma > 0.0)) throw ConfigError("ram.gamma must be positive");
  if (!(delta > 0.0)) throw ConfigError("ram.delta must be positive");
  if (!(r_min > 0.0 && r_min < r_max)) throw ConfigError("ram requires 0 < r_min < r_max");
}

double total_reliability(double alpha, double beta, const RamConfig& cfg) {
  return std::clamp(alpha + beta, cfg.r_min, cfg.r_max);
}

double sample_log_gamma(double shape, Rng& rng) {
  if (!(shape > 0.0)) throw ContractError("gamma shape must be positive");
  if (shape < 1.0) {
    const double boosted = sample_log_gamma(shape + 1.0, rng);
    return boosted + std::log(rng.uniform_open()) / shape;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform_open();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2 || std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v)))
      return std::log(d) + std::log(v);
  }
}

double sample_beta(double a, double b, Rng& rng) {
  const double la = sample_log_gamma(a, rng);
  const double lb = sample_log_gamma(b, rng);
  // a / (a + b) = logistic(la - lb)
  const double t = la - lb;
  double lambda = t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = 1.0 - 0x1.0p-53;
  return std::clamp(lambda, lo, hi);
}

BetaShape mix_shape(double r_i, double r_j, const RamConfig& cfg) {
  const double denom = r_i + r_j + cfg.delta;
  return {cfg.gamma * r_i / denom, cfg.gamma * r_j / denom};
}

double sample_lambda(double r_i, double r_j, const RamConfig& cfg, Rng& rng) {
  if (cfg.symmetric) return sample_beta(cfg.gamma, cfg.gamma, rng);
  const auto shape = mix_shape(r_i, r_j, cfg);
  return sample_beta(shape.a, shape.b, rng);
}

std::vector<std::size_t> cyclic_partners(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i-- > 1;) std::swap(p[i], p[rng.index(i)]);
  return p;
}

MixPair make_pair(std::span<const std::vector<double>> inputs,
                  std::span<const std::vector<double>> refined_targets, std::size_t i,
                  std::size_t j, double lambda, double w_mix) {
  MixPair mp;
  mp.i = i;
  mp.j = j;
  mp.lambda = lambda;
  mp.w_mix = w_mix;
  const auto& xi = inputs[i];
  const auto& xj = inputs[j];
  mp.x_mix.resize(xi.size());
  for (std::size_t d = 0; d < xi.size(); ++d) mp.x_mix[d] = lambda * xi[d] + (1.0 - lambda) * xj[d];
  const auto& yi = refined_targets[i];
  const auto& yj = refined_targets[j];
  mp.y_mix.resize(yi.size());
  for (std::size_t c = 0; c < yi.size(); ++c) mp.y_mix[c] = lambda * yi[c] + (1.0 - lambda) * yj[c];
  return mp;
}

std::vector<MixPair> build_pairs(std::span<const std::vector<double>> inputs,
                                 std::span<const double> reliabilities,
                                 std::span<const std::vector<double>> refined_targets,
                                 const RamConfig& cfg, Rng& rng) {
  const std::size_t n = inputs.size();
  if (n == 0) throw ContractError("build_pairs: empty batch");
  if (reliabilities.size() != n || refined_targets.size() != n)
    throw ContractError("build_pairs: mismatched lengths");
  const auto partner = cyclic_partners(n, rng);
  std::vector<MixPair> pairs;
  pairs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = partner[i];
    const double lambda = sample_lambda(reliabilities[i], reliabilities[j], cfg, rng);
    const double w = cfg.gating ? grg_weight(reliabilities[i], reliabilities[j]) : 1.0;
    pairs.push_back(make_pair(inputs, refined_targets, i, j, lambda, w));
  }
  return pairs;
}

LossEval ram_loss(const ModelParams& params, std::span<const MixPair> pairs) {
  std::vector<std::vector<double>> xs, ys;
  std::vector<double> ws;
  xs.reserve(pairs.size());
  ys.reserve(pairs.size());
  for (const auto& p : pairs) {
    xs.push_back(p.x_mix);
    ys.push_back(p.y_mix);
    ws.push_back(p.w_mix);
  }
  if (pairs.empty()) return {0.0, GradientVector(params.values.size())};
  return weighted_ce(params, xs, ys, ws, static_cast<double>(pairs.size()));
}

}  // namespace hrp
