#pragma once

#include <optional>
#include <span>
#include <vector>

#include "hrp/cdcl.hpp"
#include "hrp/net.hpp"

namespace hrp {

double accuracy(std::span<const int> predictions, std::span<const int> labels);

int argmax(std::span<const double> v);

struct Purity {
  std::optional<double> raw;    // absent when there are no pairs
  std::optional<double> gated;  // absent when the weight mass is zero
  double pairs = 0.0;
  double matches = 0.0;
  double weight = 0.0;
  double weighted_matches = 0.0;
};

// Purity of positive pairs: `labels[i]` is the true class behind bank row i.
Purity pair_purity(const PositiveSets& sets, const std::vector<std::vector<double>>& weights,
                   std::span<const int> labels);

struct OodScoreSet {
  std::vector<double> id_scores;
  std::vector<double> ood_scores;
};

// P(id > ood) + 0.5 P(id == ood), rank formulation.
double auroc(const OodScoreSet& scores);

// FPR at the largest threshold that keeps TPR >= 0.95 (score >= t counts as ID).
double fpr_at_95_tpr(const OodScoreSet& scores);

// Maximum softmax probability per input.
std::vector<double> msp_scores(const ModelParams& params, std::span<const std::vector<double>> inputs);
double msp(std::span<const double> probs);

// Mean of the two networks' softmax outputs.
std::vector<std::vector<double>> ensemble_probs(const ModelParams& a, const ModelParams& b,
                                                std::span<const std::vector<double>> inputs);

std::vector<std::vector<double>> predict_probs(const ModelParams& params,
                                               std::span<const std::vector<double>> inputs);

// Running mean / standard deviation.
struct Moments {
  double n = 0.0, sum = 0.0, sumsq = 0.0;
  void add(double v) {
    n += 1.0;
    sum += v;
    sumsq += v * v;
  }
  Moments& operator+=(const Moments& o) {
    n += o.n;
    sum += o.sum;
    sumsq += o.sumsq;
    return *this;
  }
  std::optional<double> mean() const;
  std::optional<double> stddev() const;
};

}  // namespace hrp
