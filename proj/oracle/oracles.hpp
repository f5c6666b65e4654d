#pragma once

// Independent reference computations used by the test suites and by
// `hrp oracle`. Nothing in the training path depends on this library.

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hrp/cdcl.hpp"
#include "hrp/dataset.hpp"
#include "hrp/metrics.hpp"
#include "hrp/net.hpp"
#include "hrp/reliability.hpp"

namespace hrp::oracle {

// Straight-line forward pass written from the layer definitions.
struct NaiveOutput {
  std::vector<double> logits;
  std::vector<double> embedding;
};
NaiveOutput naive_forward(const ModelParams& params, std::span<const double> x);

// -sum t_c log(exp(l_c) / sum exp(l)), no stabilization.
double naive_ce(std::span<const double> logits, std::span<const double> target);

// Relative error guarded by an absolute floor.
double rel_error(double a, double b, double floor);

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

// Central differences of `loss` over every parameter coordinate.
GradCheck check_gradient(const ModelParams& params, const std::function<double(const ModelParams&)>& loss,
                         const GradientVector& analytic, double step = 1e-5, double floor = 1e-6);

// Mean meta-loss with the naive forward.
double naive_meta_loss(const ModelParams& params, const MetaSet& meta);

// Literal bilevel route: perturb eps_{k,i} by +-fd_step, take one plain SGD
// step on the perturbed training loss, evaluate the meta loss, difference.
MetaGradients meta_gradients_fd(const ModelParams& params, const MetaBatch& batch, const MetaSet& meta,
                                const MetaConfig& cfg);

// Max componentwise relative discrepancy between two meta-gradient sets.
double meta_discrepancy(const MetaGradients& a, const MetaGradients& b, double floor = 1e-9);

// Double loop over anchors, positives and denominators; no log-sum-exp.
double naive_cdcl(std::span<const std::vector<double>> z, std::span<const int> pseudo_class,
                  std::span<const double> beta_norm, double tau);

struct BetaMoments {
  double mean = 0.0;
  double var = 0.0;
};
BetaMoments beta_moments(double a, double b);

// Counts wins over all (ID, OOD) pairs, ties as one half.
double auroc_bruteforce(const OodScoreSet& scores);
// Sweeps every observed score as a threshold and keeps the lowest FPR with TPR >= 0.95.
double fpr95_sweep(const OodScoreSet& scores);

// Accuracy of assigning each sample to the nearest true class center.
double nearest_center_accuracy(const Dataset& ds, const std::vector<std::vector<double>>& centers);

// Small fixtures.
struct Fixture {
  ModelParams params;
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> given;
  std::vector<std::vector<double>> pseudo;
  MetaSet meta;
};
// 2-class, D=3, H=4 network with |B| = batch and M = meta samples.
Fixture small_fixture(std::uint64_t seed, std::size_t batch = 4, std::size_t meta = 8, int proj = 3);

struct SuiteResult {
  std::size_t passed = 0;
  std::size_t failed = 0;
  bool ok() const { return failed == 0; }
};

// Runs a named suite (meta, losses, beta, cdcl, auroc, all), printing one
// line per check. Throws std::invalid_argument for unknown names.
SuiteResult run_suite(const std::string& name, std::ostream& out);
const std::vector<std::string>& suite_names();

}  // namespace hrp::oracle
