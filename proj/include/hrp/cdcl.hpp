#pragma once

#include <span>
#include <vector>

#include "hrp/net.hpp"

namespace hrp {

struct CdclConfig {
  double tau = 0.2;
  double range_eps = 1e-6;

  void validate() const;
};

// 2N L2-normalized rows: weak views first, strong views second, both halves
// aligned by source. Labels given by annotators never enter the bank.
struct FeatureBank {
  std::vector<std::vector<double>> z;
  std::vector<int> pseudo_class;
  std::vector<double> beta;
  std::vector<bool> degenerate;

  std::size_t rows() const { return z.size(); }
};

// Builds a bank from raw weak/strong embeddings plus per-source pseudo-class and beta.
FeatureBank make_bank(std::span<const std::vector<double>> weak_emb,
                      std::span<const std::vector<double>> strong_emb,
                      std::span<const int> pseudo_class, std::span<const double> beta);

// Min-max normalization to [0, 1]; a batch whose range is below range_eps
// maps to all ones.
std::vector<double> normalize_beta(std::span<const double> beta, const CdclConfig& cfg);
// The bare formula (beta - min) / (max - min + 1e-8), without the fallback.
std::vector<double> normalize_beta_literal(std::span<const double> beta);

using PositiveSets = std::vector<std::vector<std::size_t>>;

// P(i) = { j != i : c_j == c_i }.
PositiveSets positive_sets(std::span<const int> pseudo_class);

// w_ij = beta_norm_i * beta_norm_j, laid out like `sets`.
std::vector<std::vector<double>> consensus_weights(std::span<const double> beta_norm,
                                                   const PositiveSets& sets);

struct CdclEval {
  double value = 0.0;
  std::vector<std::vector<double>> grad_z;  // d loss / d z_i
  std::size_t anchors = 0;                  // |V|
};

// Gated InfoNCE over unit rows `z` with explicit positives and weights.
CdclEval gated_infonce(std::span<const std::vector<double>> z, const PositiveSets& sets,
                       const std::vector<std::vector<double>>& weights, double tau);

CdclEval cdcl_loss(const FeatureBank& bank, const CdclConfig& cfg);

// Embeds both views with `params`, evaluates the loss, and pulls the
// gradient back through normalization into the network parameters.
LossEval cdcl_network_loss(const ModelParams& params, std::span<const std::vector<double>> weak,
                           std::span<const std::vector<double>> strong, std::span<const int> pseudo_class,
                           std::span<const double> beta, const CdclConfig& cfg,
                           FeatureBank* bank_out = nullptr);

}  // namespace hrp
