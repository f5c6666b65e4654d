#include "hrp/reliability.hpp"

#include <algorithm>

#include "hrp/errors.hpp"
#include "hrp/kernels.hpp"

namespace hrp {

void MetaConfig::validate() const {
  if (!(eta_inner > 0.0)) throw ConfigError("eta_inner must be positive");
  if (!(xi > 0.0)) throw ConfigError("xi must be positive");
  if (!(fd_step > 0.0)) throw ConfigError("fd_step must be positive");
}

namespace {

void split_meta_set(const MetaSet& meta, int classes, std::vector<std::vector<double>>& inputs,
                    std::vector<std::vector<double>>& targets) {
  inputs.reserve(meta.size());
  targets.reserve(meta.size());
  for (const auto& s : meta.samples) {
    inputs.push_back(s.x);
    targets.push_back(one_hot(s.y_true, classes));
  }
}

}  // namespace

double meta_loss(const ModelParams& params, const MetaSet& meta) {
  if (meta.size() == 0) throw ConfigError("meta set is empty");
  double acc = 0.0;
  for (const auto& s : meta.samples) {
    const auto out = forward(params, s.x, Mode::eval);
    acc += ce_loss(out.logits, one_hot(s.y_true, params.arch.classes));
  }
  return acc / static_cast<double>(meta.size());
}

GradientVector meta_loss_grad(const ModelParams& params, const MetaSet& meta) {
  if (meta.size() == 0) throw ConfigError("meta set is empty");
  std::vector<std::vector<double>> inputs, targets;
  split_meta_set(meta, params.arch.classes, inputs, targets);
  const std::vector<double> weights(meta.size(), 1.0);
  return grad_batch(params, inputs, targets, weights);
}

MetaGradients meta_gradients_closed(const ModelParams& params, const MetaBatch& batch,
                                    const MetaSet& meta, const MetaConfig& cfg) {
  if (meta.size() == 0) throw ConfigError("meta set is empty");
  const auto g_meta = meta_loss_grad(params, meta);
  const auto per = per_sample_grads(params, batch.inputs, batch.given_targets, batch.pseudo_targets);
  MetaGradients out;
  out.given = kernels::dots(g_meta, per.given);
  out.pseudo = kernels::dots(g_meta, per.pseudo);
  for (double& v : out.given) v *= -cfg.eta_inner;
  for (double& v : out.pseudo) v *= -cfg.eta_inner;
  return out;
}

std::vector<double> meta_gradients_coupled(const MetaGradients& g) {
  std::vector<double> out(g.given.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = g.given[i] + g.pseudo[i];
  return out;
}

ReliabilityBatch disentangle(std::span<const double> given_grads, std::span<const double> pseudo_grads,
                             const MetaConfig& cfg, std::size_t batch_size) {
  if (given_grads.size() != pseudo_grads.size() || given_grads.size() != batch_size)
    throw ContractError("disentangle: sequences must have length |B|");
  ReliabilityBatch rb;
  rb.raw_given.resize(batch_size);
  rb.raw_pseudo.resize(batch_size);
  double mass = 0.0;
  for (std::size_t i = 0; i < batch_size; ++i) {
    rb.raw_given[i] = std::max(-given_grads[i], 0.0);
    rb.raw_pseudo[i] = std::max(-pseudo_grads[i], 0.0);
    mass += rb.raw_given[i] + rb.raw_pseudo[i];
  }
  rb.raw_mass = mass;
  const double scale = static_cast<double>(batch_size) / (mass + cfg.xi);
  rb.alpha.resize(batch_size);
  rb.beta.resize(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    rb.alpha[i] = rb.raw_given[i] * scale;
    rb.beta[i] = rb.raw_pseudo[i] * scale;
  }
  return rb;
}

ReliabilityBatch disentangle_coupled(std::span<const double> coupled_grads, const MetaConfig& cfg,
                                     std::size_t batch_size) {
  std::vector<double> half(coupled_grads.begin(), coupled_grads.end());
  for (double& v : half) v *= 0.5;
  return disentangle(half, half, cfg, batch_size);
}

}  // namespace hrp
