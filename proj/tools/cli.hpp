#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hrp/experiment.hpp"
#include "hrp/report.hpp"

namespace hrp::cli {

enum ExitCode { kOk = 0, kRuntimeFailure = 1, kConfigError = 2 };

// Loads the config file (empty path = defaults), applies `key=value`
// overrides and the optional seed override, then validates.
RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides,
                      std::optional<std::uint64_t> seed);

// train/meta/test CSV + sidecars and ood.csv.
void cmd_generate(const RunConfig& cfg, const std::filesystem::path& out);

struct TrainOptions {
  std::filesystem::path out;
  bool diagnostics = false;
  bool checkpoints = true;
};

// report.json, metrics.csv, manifest.json, config.ini, net{1,2}.ckpt and,
// with diagnostics, reliability_net{1,2}.csv, lambda_hist.csv, purity.csv.
RunReport cmd_train(const RunConfig& cfg, const TrainOptions& opts);

// Returns the exit code.
int cmd_oracle(const std::string& suite, std::ostream& out);

std::string cmd_report(const std::filesystem::path& report_json);

// ablation.csv with one row per variant.
AblationGrid cmd_ablate(const RunConfig& cfg, const std::vector<std::uint64_t>& seeds,
                        const std::filesystem::path& out);

std::string manifest_json(const RunConfig& cfg, const TrainData& data, const std::string& started,
                          const std::string& finished, double wall_seconds);

int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace hrp::cli
