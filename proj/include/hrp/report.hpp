#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hrp {

struct LossRecord {
  double ce_re = 0.0;
  double cr = 0.0;
  double ram = 0.0;
  double cdcl = 0.0;
  double total = 0.0;
};

struct EvalRecord {
  double acc_net1 = 0.0;
  double acc_net2 = 0.0;
  double acc_ensemble = 0.0;
};

struct StatRecord {
  std::optional<double> mean;
  std::optional<double> std;
};

enum PairType { clean_clean = 0, clean_noisy = 1, noisy_noisy = 2 };
inline constexpr std::array<const char*, 3> kPairTypeNames{"clean_clean", "clean_noisy", "noisy_noisy"};

struct LambdaSummary {
  std::array<std::vector<std::int64_t>, 3> counts;  // per pair type, per bin
  std::array<std::optional<double>, 3> mean;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double warmup = 0.0;
  LossRecord loss_net1;
  LossRecord loss_net2;
  EvalRecord eval;
  StatRecord alpha_clean, alpha_noisy, beta_clean, beta_noisy;
  std::optional<double> purity_raw;
  std::optional<double> purity_gated;
  LambdaSummary lambda;
  std::optional<double> mean_w_mix;
  double confident_fraction = 0.0;  // |B_c| / |B| averaged over batches and networks
};

struct RunSummary {
  double best_acc = 0.0;
  int best_epoch = -1;  // -1 = initial evaluation
  double last_acc = 0.0;
  std::optional<double> ood_auroc;
  std::optional<double> ood_fpr95;
};

struct RunReport {
  std::string artifact_version;
  std::string method;
  std::map<std::string, std::string> config;
  std::uint64_t seed = 0;
  std::uint64_t seed_net1 = 0;
  std::uint64_t seed_net2 = 0;
  int hist_bins = 10;
  EvalRecord initial;
  std::vector<EpochRecord> epochs;
  RunSummary summary;
};

std::string report_to_json(const RunReport& report);
RunReport report_from_json(const std::string& text);

// One row per epoch.
std::string metrics_csv(const RunReport& report);

// Human-readable multi-line summary.
std::string describe(const RunReport& report);

}  // namespace hrp
