#include "hrp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hrp/errors.hpp"
#include "hrp/kernels.hpp"

namespace hrp {

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.empty()) throw std::invalid_argument("accuracy of an empty set is undefined");
  if (predictions.size() != labels.size()) throw ContractError("accuracy: length mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

int argmax(std::span<const double> v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

Purity pair_purity(const PositiveSets& sets, const std::vector<std::vector<double>>& weights,
                   std::span<const int> labels) {
  Purity p;
  for (std::size_t i = 0; i < sets.size(); ++i)
    for (std::size_t q = 0; q < sets[i].size(); ++q) {
      const bool match = labels[i] == labels[sets[i][q]];
      const double w = weights[i][q];
      p.pairs += 1.0;
      p.matches += match ? 1.0 : 0.0;
      p.weight += w;
      p.weighted_matches += match ? w : 0.0;
    }
  if (p.pairs > 0.0) p.raw = p.matches / p.pairs;
  if (p.weight > 0.0) p.gated = p.weighted_matches / p.weight;
  return p;
}

double auroc(const OodScoreSet& scores) {
  const auto& id = scores.id_scores;
  const auto& ood = scores.ood_scores;
  if (id.empty() || ood.empty()) throw std::invalid_argument("auroc needs both ID and OOD scores");
  // Sum of midranks of ID scores in the pooled sample (Mann-Whitney U).
  struct Item {
    double score;
    bool is_id;
  };
  std::vector<Item> pooled;
  pooled.reserve(id.size() + ood.size());
  for (double s : id) pooled.push_back({s, true});
  for (double s : ood) pooled.push_back({s, false});
  std::sort(pooled.begin(), pooled.end(), [](const Item& a, const Item& b) { return a.score < b.score; });
  double rank_sum = 0.0;
  for (std::size_t lo = 0; lo < pooled.size();) {
    std::size_t hi = lo;
    while (hi < pooled.size() && pooled[hi].score == pooled[lo].score) ++hi;
    const double midrank = 0.5 * static_cast<double>(lo + 1 + hi);
    for (std::size_t k = lo; k < hi; ++k)
      if (pooled[k].is_id) rank_sum += midrank;
    lo = hi;
  }
  const double n_id = static_cast<double>(id.size());
  const double n_ood = static_cast<double>(ood.size());
  const double u = rank_sum - n_id * (n_id + 1.0) / 2.0;
  return u / (n_id * n_ood);
}

double fpr_at_95_tpr(const OodScoreSet& scores) {
  if (scores.id_scores.empty() || scores.ood_scores.empty())
    throw std::invalid_argument("fpr95 needs both ID and OOD scores");
  std::vector<double> id = scores.id_scores;
  std::sort(id.begin(), id.end(), std::greater<>());
  const std::size_t need = (95 * id.size() + 99) / 100;
  const double threshold = id[need - 1];
  std::size_t fp = 0;
  for (double s : scores.ood_scores) fp += s >= threshold;
  return static_cast<double>(fp) / static_cast<double>(scores.ood_scores.size());
}

double msp(std::span<const double> probs) { return *std::max_element(probs.begin(), probs.end()); }

std::vector<std::vector<double>> predict_probs(const ModelParams& params,
                                               std::span<const std::vector<double>> inputs) {
  const auto fwd = kernels::forward_batch(params, inputs);
  std::vector<std::vector<double>> out;
  out.reserve(fwd.size());
  for (const auto& f : fwd) out.push_back(softmax(f.logits));
  return out;
}

std::vector<double> msp_scores(const ModelParams& params, std::span<const std::vector<double>> inputs) {
  std::vector<double> out;
  for (const auto& p : predict_probs(params, inputs)) out.push_back(msp(p));
  return out;
}

std::vector<std::vector<double>> ensemble_probs(const ModelParams& a, const ModelParams& b,
                                                std::span<const std::vector<double>> inputs) {
  auto pa = predict_probs(a, inputs);
  const auto pb = predict_probs(b, inputs);
  for (std::size_t i = 0; i < pa.size(); ++i)
    for (std::size_t c = 0; c < pa[i].size(); ++c) pa[i][c] = 0.5 * (pa[i][c] + pb[i][c]);
  return pa;
}

std::optional<double> Moments::mean() const {
  if (n == 0.0) return std::nullopt;
  return sum / n;
}

std::optional<double> Moments::stddev() const {
  if (n == 0.0) return std::nullopt;
  const double m = sum / n;
  return std::sqrt(std::max(sumsq / n - m * m, 0.0));
}

}  // namespace hrp
