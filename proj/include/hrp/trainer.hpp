#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hrp/cdcl.hpp"
#include "hrp/dataset.hpp"
#include "hrp/net.hpp"
#include "hrp/ram.hpp"
#include "hrp/reliability.hpp"
#include "hrp/report.hpp"

namespace hrp {

enum class Method { hrp, baseline };

std::string to_string(Method m);
Method parse_method(const std::string& text);

struct TrainConfig {
  Method method = Method::hrp;
  int epochs = 30;
  int batch_size = 64;
  int t_start = 5;
  int t_full = 15;
  double eta_w = 1.0;          // reweighting intensity of the reweighted CE
  double lambda_cdcl = 0.5;
  double conf_threshold = 0.9; // rho
  double sharpen_T = 0.5;
  int reliability_stride = 1;

  bool use_ram = true;
  bool use_cdcl = true;
  bool use_cr = true;
  bool couple_meta = false;

  Arch arch;
  Schedule schedule;  // empty decay_epochs = decay at 60% and 85% of the run
  MetaConfig meta;
  RamConfig ram;
  CdclConfig cdcl;
  AugmentConfig augment;

  std::uint64_t seed = 0;  // shuffling and augmentation
  std::uint64_t seed_net1 = 1;
  std::uint64_t seed_net2 = 2;
  int hist_bins = 10;
  bool evaluate_ood = true;

  void validate() const;
  Schedule effective_schedule() const;
};

struct TrainData {
  Dataset train;
  MetaSet meta;
  Dataset test;
  std::vector<std::vector<double>> ood;
};

// Linear ramp: 0 before t_start, 1 from t_full on.
double warmup(int epoch, const TrainConfig& cfg);

enum class TargetSource { co_prediction, given_label };

struct RefinedTarget {
  std::vector<double> dist;
  TargetSource source = TargetSource::given_label;
  double confidence = 0.0;
  int provider = -1;  // index of the network whose outputs produced the target
};

std::vector<double> sharpen(std::span<const double> probs, double temperature);

std::vector<RefinedTarget> refined_targets(std::span<const std::vector<double>> co_probs,
                                           std::span<const int> given_labels, const TrainConfig& cfg,
                                           int provider = -1);

// { i : max(co_probs_i) >= rho }; the whole batch while warm-up is zero.
std::vector<std::size_t> confidence_filter(std::span<const std::vector<double>> co_probs,
                                           const TrainConfig& cfg, double warmup_weight);

// (1/|B_c|) sum_{B_c} (1 + eta_w r~_i) CE(f(x^w_i), y~_i), r~_i = r_i / (mean_{B_c} r + delta).
LossEval reweighted_ce(const ModelParams& params, std::span<const std::vector<double>> weak,
                       std::span<const std::vector<double>> targets, std::span<const double> reliability,
                       std::span<const std::size_t> confident, const TrainConfig& cfg);

// (1/|B_c|) sum_{B_c} CE(f(x^s_i), y~_i).
LossEval consistency_loss(const ModelParams& params, std::span<const std::vector<double>> strong,
                          std::span<const std::vector<double>> targets,
                          std::span<const std::size_t> confident);

struct LossComponents {
  double ce_re = 0.0;
  double cr = 0.0;
  double ram = 0.0;
  double cdcl = 0.0;
};

// ce_re + w(t) (cr + ram + lambda_cdcl cdcl).
double total_loss(const LossComponents& c, double warmup_weight, const TrainConfig& cfg);

struct NetState {
  ModelParams params;
  OptState opt;
  std::uint64_t seed = 0;
};

// Everything one network saw while updating on one batch.
struct BatchTrace {
  int epoch = 0;
  int batch = 0;
  int net = 0;  // 0 = net1, 1 = net2
  std::span<const int> ids;
  std::span<const RefinedTarget> targets;
  const ReliabilityBatch* reliability = nullptr;  // null for the baseline
  std::span<const double> total_reliability;
  std::span<const MixPair> pairs;
  std::span<const int> pseudo_class;
  LossComponents losses;
  double total = 0.0;
  double warmup = 0.0;
};

using BatchObserver = std::function<void(const BatchTrace&)>;

struct TrainResult {
  RunReport report;
  NetState net1;
  NetState net2;
};

TrainResult co_train(const TrainData& data, const TrainConfig& cfg, const BatchObserver& observer = {});

}  // namespace hrp
