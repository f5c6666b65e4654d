#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hrp/trainer.hpp"

namespace hrp {

// Flat sectioned key-value configuration ("section.key" = value). Every key
// has a default; unknown keys are rejected with ConfigError naming the key.
class RunConfig {
 public:
  RunConfig();

  static RunConfig from_file(const std::filesystem::path& path);
  static RunConfig from_string(const std::string& text);

  // Throws ConfigError for unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;

  double real(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  std::uint64_t seed(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<int> int_list(const std::string& key) const;

  // Sorted `key=value` lines with normalized numbers; used for hashing and echo.
  std::string canonical() const;
  std::map<std::string, std::string> canonical_map() const;
  std::string hash() const;

  // Checks every value and cross-field constraint.
  void validate() const;

  TrainConfig train_config() const;
  std::uint64_t run_seed() const { return seed("run.seed"); }
  std::filesystem::path out_dir() const { return get("run.out_dir"); }

  static const std::vector<std::string>& keys();

 private:
  std::map<std::string, std::string> values_;
};

// Generates (or loads, when dataset.dir is set) train/meta/test/OOD data.
TrainData build_data(const RunConfig& cfg);

// 64-bit FNV-1a as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

std::string dataset_fingerprint(const Dataset& ds);

// Writes train/meta/test CSVs with sidecars and ood.csv into `dir`.
void write_data(const TrainData& data, const std::filesystem::path& dir);

struct AblationRow {
  std::string variant;
  std::vector<double> final_acc;  // one per seed
  double mean_acc = 0.0;
};

struct AblationGrid {
  std::vector<AblationRow> rows;  // first row is full HRP
  std::string to_csv() const;
  const AblationRow& row(const std::string& variant) const;
};

// Variant names: hrp, no_ram, no_cdcl, no_grg, sym_ram, coupled_meta, baseline.
const std::vector<std::string>& ablation_variants();
RunConfig apply_variant(const RunConfig& base, const std::string& variant);
AblationGrid run_ablation(const RunConfig& base, std::span<const std::uint64_t> seeds);

}  // namespace hrp
