#include "hrp/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hrp/errors.hpp"
#include "hrp/format.hpp"
#include "hrp/rng.hpp"

namespace hrp {

std::string to_string(NoiseMode mode) {
  switch (mode) {
    case NoiseMode::none: return "none";
    case NoiseMode::symmetric: return "symmetric";
    case NoiseMode::asymmetric: return "asymmetric";
  }
  return "none";
}

NoiseMode parse_noise_mode(const std::string& text) {
  if (text == "none") return NoiseMode::none;
  if (text == "symmetric") return NoiseMode::symmetric;
  if (text == "asymmetric") return NoiseMode::asymmetric;
  throw ConfigError("unknown noise mode '" + text + "'");
}

void Dataset::validate() const {
  std::set<int> ids;
  for (const auto& s : samples) {
    if (s.y_true < 0 || s.y_true >= num_classes || s.y_obs < 0 || s.y_obs >= num_classes)
      throw ContractError("class index out of range for sample " + std::to_string(s.id));
    if (static_cast<int>(s.x.size()) != dim)
      throw ContractError("dimension mismatch for sample " + std::to_string(s.id));
    for (double v : s.x)
      if (!std::isfinite(v)) throw ContractError("non-finite feature in sample " + std::to_string(s.id));
    if (!ids.insert(s.id).second) throw ContractError("duplicate id " + std::to_string(s.id));
  }
}

std::vector<std::vector<double>> blob_centers(int num_classes, int dim, double radius) {
  std::vector<std::vector<double>> centers(num_classes, std::vector<double>(dim, 0.0));
  for (int c = 0; c < num_classes; ++c) {
    const double angle = 2.0 * std::numbers::pi * c / num_classes;
    centers[c][0] = radius * std::cos(angle);
    centers[c][1] = radius * std::sin(angle);
  }
  return centers;
}

Dataset make_blobs(int num_classes, int per_class, int dim, double spread, std::uint64_t seed,
                   double radius) {
  if (num_classes < 2) throw ConfigError("make_blobs: num_classes must be >= 2");
  if (per_class < 1) throw ConfigError("make_blobs: per_class must be >= 1");
  if (dim < 2) throw ConfigError("make_blobs: dim must be >= 2");
  if (!(spread >= 0.0) || !std::isfinite(spread))
    throw ConfigError("make_blobs: spread must be finite and nonnegative");

  Dataset ds;
  ds.num_classes = num_classes;
  ds.dim = dim;
  ds.seed = seed;
  ds.samples.reserve(static_cast<std::size_t>(num_classes) * per_class);
  const auto centers = blob_centers(num_classes, dim, radius);
  Rng rng(derive_seed(seed, 0xb10b5));
  int id = 0;
  for (int c = 0; c < num_classes; ++c) {
    for (int k = 0; k < per_class; ++k) {
      LabeledSample s;
      s.id = id++;
      s.y_true = s.y_obs = c;
      s.x.resize(dim);
      for (int d = 0; d < dim; ++d) s.x[d] = centers[c][d] + spread * rng.normal();
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

std::vector<std::vector<double>> make_ood_blobs(int num_classes, int count, int dim,
                                                double spread, std::uint64_t seed, double radius,
                                                double displacement) {
  if (num_classes < 2 || dim < 2 || count < 0) throw ConfigError("make_ood_blobs: invalid sizes");
  std::vector<std::vector<double>> centers(num_classes, std::vector<double>(dim, 0.0));
  for (int c = 0; c < num_classes; ++c) {
    const double angle = 2.0 * std::numbers::pi * (c + 0.5) / num_classes;
    centers[c][0] = displacement * radius * std::cos(angle);
    centers[c][1] = displacement * radius * std::sin(angle);
  }
  Rng rng(derive_seed(seed, 0x00d));
  std::vector<std::vector<double>> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    const auto& center = centers[k % num_classes];
    std::vector<double> x(dim);
    for (int d = 0; d < dim; ++d) x[d] = center[d] + spread * rng.normal();
    out.push_back(std::move(x));
  }
  return out;
}

Dataset inject_symmetric_noise(const Dataset& ds, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("noise rate must lie in [0, 1]");
  Dataset out = ds;
  out.noise = {NoiseMode::symmetric, rate, {}, seed};
  Rng rng(derive_seed(seed, 0x5e17));
  const int others = ds.num_classes - 1;
  for (auto& s : out.samples) {
    s.y_obs = s.y_true;
    if (rng.bernoulli(rate)) {
      const int k = static_cast<int>(rng.index(static_cast<std::size_t>(others)));
      s.y_obs = k < s.y_true ? k : k + 1;
    }
  }
  return out;
}

Dataset inject_asymmetric_noise(const Dataset& ds, double rate, std::span<const int> pair_map,
                                std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("noise rate must lie in [0, 1]");
  if (static_cast<int>(pair_map.size()) != ds.num_classes)
    throw ConfigError("pair_map must have one entry per class");
  for (int c = 0; c < ds.num_classes; ++c) {
    if (pair_map[c] == c) throw ConfigError("pair_map maps class " + std::to_string(c) + " to itself");
    if (pair_map[c] < 0 || pair_map[c] >= ds.num_classes)
      throw ConfigError("pair_map target out of range for class " + std::to_string(c));
  }
  Dataset out = ds;
  out.noise = {NoiseMode::asymmetric, rate, {pair_map.begin(), pair_map.end()}, seed};
  Rng rng(derive_seed(seed, 0xa5e7));
  for (auto& s : out.samples) s.y_obs = rng.bernoulli(rate) ? pair_map[s.y_true] : s.y_true;
  return out;
}

std::pair<Dataset, MetaSet> split_meta(const Dataset& ds, std::size_t meta_size,
                                       std::uint64_t seed) {
  if (meta_size > ds.size()) throw ConfigError("meta set size exceeds dataset size");
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.samples[i].y_true].push_back(i);
  Rng rng(derive_seed(seed, 0x3e7a));
  for (auto& idx : by_class) std::shuffle(idx.begin(), idx.end(), rng.engine());

  std::vector<bool> taken(ds.size(), false);
  std::vector<std::size_t> cursor(ds.num_classes, 0);
  MetaSet meta;
  for (int c = 0; meta.size() < meta_size; c = (c + 1) % ds.num_classes) {
    if (cursor[c] >= by_class[c].size()) continue;
    const std::size_t i = by_class[c][cursor[c]++];
    taken[i] = true;
    LabeledSample s = ds.samples[i];
    s.y_obs = s.y_true;
    meta.samples.push_back(std::move(s));
  }

  Dataset train = ds;
  train.samples.clear();
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (!taken[i]) train.samples.push_back(ds.samples[i]);
  return {std::move(train), std::move(meta)};
}

std::vector<double> augment(std::span<const double> x, AugmentStrength strength,
                            const AugmentConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> out(x.begin(), x.end());
  if (strength == AugmentStrength::weak) {
    for (double& v : out) v += cfg.sigma_weak * rng.normal();
  } else {
    for (double& v : out) {
      const double jittered = v + cfg.sigma_strong * rng.normal();
      v = rng.bernoulli(cfg.drop_prob) ? 0.0 : jittered;
    }
  }
  return out;
}

ViewPair make_views(const LabeledSample& s, const AugmentConfig& cfg, std::uint64_t seed) {
  return {augment(s.x, AugmentStrength::weak, cfg, derive_seed(seed, 1)),
          augment(s.x, AugmentStrength::strong, cfg, derive_seed(seed, 2)), s.id};
}

void write_dataset_csv(const Dataset& ds, const std::filesystem::path& csv_path) {
  std::ofstream out(csv_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + csv_path.string());
  out << "id,y_true,y_obs";
  for (int d = 0; d < ds.dim; ++d) out << ",x" << d;
  out << '\n';
  for (const auto& s : ds.samples) {
    out << s.id << ',' << s.y_true << ',' << s.y_obs;
    for (double v : s.x) out << ',' << format_real(v);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + csv_path.string());
}

void write_dataset_sidecar(const Dataset& ds, const std::filesystem::path& json_path) {
  nlohmann::ordered_json j;
  j["num_classes"] = ds.num_classes;
  j["dim"] = ds.dim;
  j["seed"] = ds.seed;
  j["size"] = ds.size();
  nlohmann::ordered_json noise;
  noise["mode"] = to_string(ds.noise.mode);
  noise["rate"] = ds.noise.rate;
  noise["pair_map"] = ds.noise.pair_map;
  noise["seed"] = ds.noise.seed;
  j["noise_spec"] = noise;
  std::ofstream out(json_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + json_path.string());
  out << j.dump(2) << '\n';
}

Dataset read_dataset(const std::filesystem::path& csv_path, const std::filesystem::path& json_path) {
  std::ifstream js(json_path);
  if (!js) throw ConfigError("cannot read " + json_path.string());
  const auto j = nlohmann::json::parse(js);
  Dataset ds;
  ds.num_classes = j.at("num_classes").get<int>();
  ds.dim = j.at("dim").get<int>();
  ds.seed = j.at("seed").get<std::uint64_t>();
  const auto& noise = j.at("noise_spec");
  ds.noise.mode = parse_noise_mode(noise.at("mode").get<std::string>());
  ds.noise.rate = noise.at("rate").get<double>();
  ds.noise.pair_map = noise.at("pair_map").get<std::vector<int>>();
  ds.noise.seed = noise.at("seed").get<std::uint64_t>();

  std::ifstream in(csv_path);
  if (!in) throw ConfigError("cannot read " + csv_path.string());
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (static_cast<int>(cells.size()) != 3 + ds.dim)
      throw ConfigError("malformed row in " + csv_path.string());
    LabeledSample s;
    s.id = std::stoi(cells[0]);
    s.y_true = std::stoi(cells[1]);
    s.y_obs = std::stoi(cells[2]);
    for (int d = 0; d < ds.dim; ++d) s.x.push_back(std::stod(cells[3 + d]));
    ds.samples.push_back(std::move(s));
  }
  ds.validate();
  return ds;
}

}  // namespace hrp
