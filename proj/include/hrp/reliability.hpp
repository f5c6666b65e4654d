#pragma once

#include <span>
#include <vector>

#include "hrp/dataset.hpp"
#include "hrp/net.hpp"

namespace hrp {

struct MetaConfig {
  double eta_inner = 0.05;  // learning rate of the virtual step
  double xi = 1e-10;
  double fd_step = 1e-4;

  void validate() const;
};

// A training mini-batch as seen by the meta step.
struct MetaBatch {
  std::span<const std::vector<double>> inputs;
  std::span<const std::vector<double>> given_targets;
  std::span<const std::vector<double>> pseudo_targets;
};

// d L_meta / d eps_{k,i} at eps = 0, for k = given (1) and pseudo (2).
struct MetaGradients {
  std::vector<double> given;
  std::vector<double> pseudo;
};

struct ReliabilityBatch {
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<double> raw_given;   // clamped negative meta-gradients
  std::vector<double> raw_pseudo;
  std::vector<int> ids;
  double raw_mass = 0.0;  // S = sum of both raw sequences

  std::size_t size() const { return alpha.size(); }
};

// Mean clean-label CE over the meta set, and its parameter gradient.
double meta_loss(const ModelParams& params, const MetaSet& meta);
GradientVector meta_loss_grad(const ModelParams& params, const MetaSet& meta);

// Exact path: dL_meta/deps_{k,i} = -eta_inner * <grad L_meta(theta), g_{k,i}>,
// where g_{k,i} are the per-sample training gradients.
MetaGradients meta_gradients_closed(const ModelParams& params, const MetaBatch& batch,
                                    const MetaSet& meta, const MetaConfig& cfg);

// Coupled variant: one shared eps_i scales both losses of sample i.
std::vector<double> meta_gradients_coupled(const MetaGradients& g);

// Clamp (max(-g, 0)) and batch-mass normalization.
ReliabilityBatch disentangle(std::span<const double> given_grads, std::span<const double> pseudo_grads,
                             const MetaConfig& cfg, std::size_t batch_size);

// Shared-weight ablation: raw_i = max(-(g1_i + g2_i), 0) split evenly into alpha and beta.
ReliabilityBatch disentangle_coupled(std::span<const double> coupled_grads, const MetaConfig& cfg,
                                     std::size_t batch_size);

}  // namespace hrp
