#pragma once

#include <span>
#include <vector>

#include "hrp/net.hpp"
#include "hrp/rng.hpp"

namespace hrp {

struct RamConfig {
  double gamma = 4.0;
  double delta = 1e-8;
  double r_min = 0.1;
  double r_max = 2.0;
  bool gating = true;     // GRG on; off means w_mix = 1
  bool symmetric = false; // classic Beta(gamma, gamma) mixing

  void validate() const;
};

struct MixPair {
  std::size_t i = 0;
  std::size_t j = 0;
  double lambda = 0.5;
  double w_mix = 1.0;
  std::vector<double> x_mix;
  std::vector<double> y_mix;
};

// Clamp(alpha + beta, r_min, r_max).
double total_reliability(double alpha, double beta, const RamConfig& cfg);

// Gamma(shape, 1) via Marsaglia-Tsang; shapes below one use the
// Gamma(shape + 1) * U^(1/shape) boost. Returned in log space so that tiny
// shapes never underflow.
double sample_log_gamma(double shape, Rng& rng);

// Beta(a, b) as Ga / (Ga + Gb); strictly inside (0, 1).
double sample_beta(double a, double b, Rng& rng);

struct BetaShape {
  double a = 1.0;
  double b = 1.0;
};

// (gamma r_i / (r_i + r_j + delta), gamma r_j / (r_i + r_j + delta)).
BetaShape mix_shape(double r_i, double r_j, const RamConfig& cfg);

double sample_lambda(double r_i, double r_j, const RamConfig& cfg, Rng& rng);

// max(r_i, r_j).
inline double grg_weight(double r_i, double r_j) { return r_i > r_j ? r_i : r_j; }

// Uniform cyclic permutation (Sattolo): partner[i] != i whenever n > 1.
std::vector<std::size_t> cyclic_partners(std::size_t n, Rng& rng);

// One pair per batch element, partner taken from a cyclic permutation.
std::vector<MixPair> build_pairs(std::span<const std::vector<double>> inputs,
                                 std::span<const double> reliabilities,
                                 std::span<const std::vector<double>> refined_targets,
                                 const RamConfig& cfg, Rng& rng);

// Builds the pair for fixed (i, j, lambda, w_mix).
MixPair make_pair(std::span<const std::vector<double>> inputs,
                  std::span<const std::vector<double>> refined_targets, std::size_t i,
                  std::size_t j, double lambda, double w_mix);

// (1/|B|) sum_pairs w_mix * CE(f(x_mix), y_mix), |B| = number of pairs.
LossEval ram_loss(const ModelParams& params, std::span<const MixPair> pairs);

}  // namespace hrp
