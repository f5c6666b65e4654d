#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace hrp {

struct LabeledSample {
  int id = 0;
  std::vector<double> x;
  int y_true = 0;
  int y_obs = 0;

  bool label_clean() const { return y_true == y_obs; }
};

enum class NoiseMode { none, symmetric, asymmetric };

std::string to_string(NoiseMode mode);
NoiseMode parse_noise_mode(const std::string& text);

struct NoiseSpec {
  NoiseMode mode = NoiseMode::none;
  double rate = 0.0;
  std::vector<int> pair_map;  // only for asymmetric
  std::uint64_t seed = 0;
};

struct Dataset {
  std::vector<LabeledSample> samples;
  int num_classes = 0;
  int dim = 0;
  NoiseSpec noise;
  std::uint64_t seed = 0;

  std::size_t size() const { return samples.size(); }
  // Throws ContractError when an invariant is broken.
  void validate() const;
};

struct MetaSet {
  std::vector<LabeledSample> samples;
  std::size_t size() const { return samples.size(); }
};

// Per-class blob centers: the first two coordinates lie on a circle of
// `radius`, remaining coordinates are zero.
std::vector<std::vector<double>> blob_centers(int num_classes, int dim, double radius);

Dataset make_blobs(int num_classes, int per_class, int dim, double spread, std::uint64_t seed,
                   double radius = 2.0);

// Out-of-distribution inputs: blobs around centers placed between adjacent
// class directions and pushed outward by `displacement` x radius.
std::vector<std::vector<double>> make_ood_blobs(int num_classes, int count, int dim,
                                                double spread, std::uint64_t seed,
                                                double radius = 2.0, double displacement = 1.75);

Dataset inject_symmetric_noise(const Dataset& ds, double rate, std::uint64_t seed);
Dataset inject_asymmetric_noise(const Dataset& ds, double rate, std::span<const int> pair_map,
                                std::uint64_t seed);

// Splits off a class-balanced clean meta set of size `meta_size` (round-robin over classes).
std::pair<Dataset, MetaSet> split_meta(const Dataset& ds, std::size_t meta_size,
                                       std::uint64_t seed);

enum class AugmentStrength { weak, strong };

struct AugmentConfig {
  double sigma_weak = 0.025;
  double sigma_strong = 0.075;
  double drop_prob = 0.1;

  static AugmentConfig for_spread(double spread) {
    return {0.05 * spread, 0.15 * spread, 0.1};
  }
};

std::vector<double> augment(std::span<const double> x, AugmentStrength strength,
                            const AugmentConfig& cfg, std::uint64_t seed);

struct ViewPair {
  std::vector<double> weak;
  std::vector<double> strong;
  int source_id = 0;
};

ViewPair make_views(const LabeledSample& s, const AugmentConfig& cfg, std::uint64_t seed);

// CSV (`id,y_true,y_obs,x0..`) plus a JSON sidecar with C, D, noise spec, seed.
void write_dataset_csv(const Dataset& ds, const std::filesystem::path& csv_path);
void write_dataset_sidecar(const Dataset& ds, const std::filesystem::path& json_path);
Dataset read_dataset(const std::filesystem::path& csv_path, const std::filesystem::path& json_path);

}  // namespace hrp
