#include "hrp/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "hrp/errors.hpp"
#include "hrp/format.hpp"
#include "hrp/rng.hpp"

namespace hrp {

namespace {

enum class Kind { real, integer, seed, seed_or_auto, flag, int_list, text };

struct KeySpec {
  const char* key;
  const char* fallback;
  Kind kind;
};

// clang-format off
const std::vector<KeySpec>& schema() {
  static const std::vector<KeySpec> table = {
      {"run.seed", "0", Kind::seed},
      {"run.out_dir", "out", Kind::text},
      {"dataset.dir", "", Kind::text},
      {"dataset.classes", "4", Kind::integer},
      {"dataset.per_class", "500", Kind::integer},
      {"dataset.dim", "2", Kind::integer},
      {"dataset.spread", "0.5", Kind::real},
      {"dataset.radius", "2", Kind::real},
      {"dataset.noise", "symmetric", Kind::text},
      {"dataset.noise_rate", "0.4", Kind::real},
      {"dataset.pair_map", "", Kind::int_list},
      {"dataset.meta_size", "40", Kind::integer},
      {"dataset.test_per_class", "500", Kind::integer},
      {"dataset.ood_per_class", "250", Kind::integer},
      {"dataset.ood_displacement", "1.75", Kind::real},
      {"dataset.weak_scale", "0.05", Kind::real},
      {"dataset.strong_scale", "0.15", Kind::real},
      {"dataset.drop_prob", "0.1", Kind::real},
      {"net.hidden", "64", Kind::integer},
      {"net.proj", "16", Kind::integer},
      {"optim.lr", "0.05", Kind::real},
      {"optim.momentum", "0.9", Kind::real},
      {"optim.weight_decay", "0.0005", Kind::real},
      {"optim.decay_epochs", "", Kind::int_list},
      {"optim.decay_factor", "0.1", Kind::real},
      {"reliability.xi", "1e-10", Kind::real},
      {"reliability.fd_step", "0.0001", Kind::real},
      {"reliability.stride", "1", Kind::integer},
      {"reliability.couple_meta", "false", Kind::flag},
      {"ram.gamma", "4", Kind::real},
      {"ram.delta", "1e-08", Kind::real},
      {"ram.r_min", "0.1", Kind::real},
      {"ram.r_max", "2", Kind::real},
      {"ram.use_ram", "true", Kind::flag},
      {"ram.use_grg", "true", Kind::flag},
      {"ram.sym_ram", "false", Kind::flag},
      {"cdcl.tau", "0.2", Kind::real},
      {"cdcl.range_eps", "1e-06", Kind::real},
      {"cdcl.use_cdcl", "true", Kind::flag},
      {"trainer.method", "hrp", Kind::text},
      {"trainer.epochs", "30", Kind::integer},
      {"trainer.batch_size", "64", Kind::integer},
      {"trainer.t_start", "5", Kind::integer},
      {"trainer.t_full", "15", Kind::integer},
      {"trainer.eta_w", "1", Kind::real},
      {"trainer.lambda_cdcl", "0.5", Kind::real},
      {"trainer.conf_threshold", "0.9", Kind::real},
      {"trainer.sharpen_T", "0.5", Kind::real},
      {"trainer.use_cr", "true", Kind::flag},
      {"trainer.seed_net1", "auto", Kind::seed_or_auto},
      {"trainer.seed_net2", "auto", Kind::seed_or_auto},
      {"metrics.hist_bins", "10", Kind::integer},
      {"metrics.ood", "true", Kind::flag},
  };
  return table;
}
// clang-format on

const KeySpec* find_spec(const std::string& key) {
  for (const auto& s : schema())
    if (key == s.key) return &s;
  return nullptr;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end || !std::isfinite(out))
    throw ConfigError("config key '" + key + "': expected a real number, got '" + v + "'");
  return out;
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end)
    throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
  return out;
}

std::uint64_t parse_seed(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end)
    throw ConfigError("config key '" + key + "': expected a nonnegative integer seed, got '" + v + "'");
  return out;
}

bool parse_flag(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

std::vector<int> parse_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(static_cast<int>(parse_int(key, item)));
  }
  return out;
}

std::string normalize(const KeySpec& spec, const std::string& v) {
  switch (spec.kind) {
    case Kind::real: return format_real(parse_real(spec.key, v));
    case Kind::integer: return std::to_string(parse_int(spec.key, v));
    case Kind::seed: return std::to_string(parse_seed(spec.key, v));
    case Kind::seed_or_auto: return v == "auto" ? v : std::to_string(parse_seed(spec.key, v));
    case Kind::flag: return parse_flag(spec.key, v) ? "true" : "false";
    case Kind::int_list: {
      std::string out;
      for (int x : parse_list(spec.key, v)) out += (out.empty() ? "" : ",") + std::to_string(x);
      return out;
    }
    case Kind::text: return v;
  }
  return v;
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& s : schema()) values_[s.key] = s.fallback;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> out = [] {
    std::vector<std::string> k;
    for (const auto& s : schema()) k.emplace_back(s.key);
    return k;
  }();
  return out;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const KeySpec* spec = find_spec(key);
  if (!spec) throw ConfigError("unknown config key '" + key + "'");
  const std::string v = trim(value);
  normalize(*spec, v);  // type check only
  values_[key] = v;
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

double RunConfig::real(const std::string& key) const { return parse_real(key, get(key)); }
std::int64_t RunConfig::integer(const std::string& key) const { return parse_int(key, get(key)); }
std::uint64_t RunConfig::seed(const std::string& key) const { return parse_seed(key, get(key)); }
bool RunConfig::flag(const std::string& key) const { return parse_flag(key, get(key)); }
std::vector<int> RunConfig::int_list(const std::string& key) const { return parse_list(key, get(key)); }

RunConfig RunConfig::from_string(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  RunConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config key '" + section + "' must live inside a [section]");
    for (const auto& [key, value] : body) cfg.set(section + "." + key, value.get_value<std::string>());
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str());
}

std::map<std::string, std::string> RunConfig::canonical_map() const {
  std::map<std::string, std::string> out;
  for (const auto& s : schema()) out[s.key] = normalize(s, get(s.key));
  return out;
}

std::string RunConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : canonical_map()) out += k + "=" + v + "\n";
  return out;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string RunConfig::hash() const { return fnv1a_hex(canonical()); }

void RunConfig::validate() const {
  for (const auto& s : schema()) normalize(s, get(s.key));
  if (integer("dataset.classes") < 2) throw ConfigError("config key 'dataset.classes' must be >= 2");
  if (integer("dataset.per_class") < 1) throw ConfigError("config key 'dataset.per_class' must be >= 1");
  if (integer("dataset.dim") < 2) throw ConfigError("config key 'dataset.dim' must be >= 2");
  if (!(real("dataset.spread") >= 0.0)) throw ConfigError("config key 'dataset.spread' must be >= 0");
  const double rate = real("dataset.noise_rate");
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("config key 'dataset.noise_rate' must lie in [0, 1]");
  parse_noise_mode(get("dataset.noise"));
  if (integer("dataset.meta_size") < 0) throw ConfigError("config key 'dataset.meta_size' must be >= 0");
  if (integer("dataset.test_per_class") < 0 || integer("dataset.ood_per_class") < 0)
    throw ConfigError("test/ood sizes must be >= 0");
  const double drop = real("dataset.drop_prob");
  if (!(drop >= 0.0 && drop <= 1.0)) throw ConfigError("config key 'dataset.drop_prob' must lie in [0, 1]");
  if (integer("dataset.meta_size") > integer("dataset.classes") * integer("dataset.per_class"))
    throw ConfigError("config key 'dataset.meta_size' exceeds the dataset size");
  const auto pm = int_list("dataset.pair_map");
  if (!pm.empty() && static_cast<std::int64_t>(pm.size()) != integer("dataset.classes"))
    throw ConfigError("config key 'dataset.pair_map' needs one entry per class");
  train_config().validate();
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.method = parse_method(get("trainer.method"));
  t.epochs = static_cast<int>(integer("trainer.epochs"));
  t.batch_size = static_cast<int>(integer("trainer.batch_size"));
  t.t_start = static_cast<int>(integer("trainer.t_start"));
  t.t_full = static_cast<int>(integer("trainer.t_full"));
  t.eta_w = real("trainer.eta_w");
  t.lambda_cdcl = real("trainer.lambda_cdcl");
  t.conf_threshold = real("trainer.conf_threshold");
  t.sharpen_T = real("trainer.sharpen_T");
  t.use_cr = flag("trainer.use_cr");
  t.reliability_stride = static_cast<int>(integer("reliability.stride"));
  t.couple_meta = flag("reliability.couple_meta");
  t.use_ram = flag("ram.use_ram");
  t.use_cdcl = flag("cdcl.use_cdcl");

  t.arch = {static_cast<int>(integer("dataset.dim")), static_cast<int>(integer("net.hidden")),
            static_cast<int>(integer("dataset.classes")), static_cast<int>(integer("net.proj"))};
  t.schedule.base_lr = real("optim.lr");
  t.schedule.momentum = real("optim.momentum");
  t.schedule.weight_decay = real("optim.weight_decay");
  t.schedule.decay_epochs = int_list("optim.decay_epochs");
  t.schedule.decay_factor = real("optim.decay_factor");
  t.meta.xi = real("reliability.xi");
  t.meta.fd_step = real("reliability.fd_step");
  t.meta.eta_inner = t.schedule.base_lr;
  t.ram.gamma = real("ram.gamma");
  t.ram.delta = real("ram.delta");
  t.ram.r_min = real("ram.r_min");
  t.ram.r_max = real("ram.r_max");
  t.ram.gating = flag("ram.use_grg");
  t.ram.symmetric = flag("ram.sym_ram");
  t.cdcl.tau = real("cdcl.tau");
  t.cdcl.range_eps = real("cdcl.range_eps");
  const double spread = real("dataset.spread");
  t.augment = {real("dataset.weak_scale") * spread, real("dataset.strong_scale") * spread, real("dataset.drop_prob")};

  const std::uint64_t s = run_seed();
  t.seed = derive_seed(s, 0x7);
  t.seed_net1 = get("trainer.seed_net1") == "auto" ? derive_seed(s, 0x11) : seed("trainer.seed_net1");
  t.seed_net2 = get("trainer.seed_net2") == "auto" ? derive_seed(s, 0x12) : seed("trainer.seed_net2");
  t.hist_bins = static_cast<int>(integer("metrics.hist_bins"));
  t.evaluate_ood = flag("metrics.ood");
  return t;
}

namespace {

MetaSet to_meta(const Dataset& ds) {
  MetaSet m;
  m.samples = ds.samples;
  for (const auto& s : m.samples)
    if (!s.label_clean()) throw ConfigError("meta set contains a corrupted label (id " + std::to_string(s.id) + ")");
  return m;
}

Dataset from_meta(const MetaSet& meta, const Dataset& like) {
  Dataset ds;
  ds.num_classes = like.num_classes;
  ds.dim = like.dim;
  ds.seed = like.seed;
  ds.samples = meta.samples;
  return ds;
}

std::vector<std::vector<double>> read_ood(const std::filesystem::path& path, int dim) {
  std::vector<std::vector<double>> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');  // id
    std::vector<double> x;
    while (std::getline(ss, cell, ',')) x.push_back(std::stod(cell));
    if (static_cast<int>(x.size()) != dim) throw ConfigError("malformed row in " + path.string());
    out.push_back(std::move(x));
  }
  return out;
}

}  // namespace

TrainData build_data(const RunConfig& cfg) {
  cfg.validate();
  TrainData data;
  const std::filesystem::path dir = cfg.get("dataset.dir");
  if (!dir.empty()) {
    data.train = read_dataset(dir / "train.csv", dir / "train.json");
    data.meta = to_meta(read_dataset(dir / "meta.csv", dir / "meta.json"));
    data.test = read_dataset(dir / "test.csv", dir / "test.json");
    data.ood = read_ood(dir / "ood.csv", data.train.dim);
    return data;
  }

  const std::uint64_t s = cfg.run_seed();
  const int C = static_cast<int>(cfg.integer("dataset.classes"));
  const int D = static_cast<int>(cfg.integer("dataset.dim"));
  const double spread = cfg.real("dataset.spread");
  const double radius = cfg.real("dataset.radius");
  const Dataset clean = make_blobs(C, static_cast<int>(cfg.integer("dataset.per_class")), D, spread,
                                   derive_seed(s, 0xda7a), radius);
  const auto [train_clean, meta] =
      split_meta(clean, static_cast<std::size_t>(cfg.integer("dataset.meta_size")), derive_seed(s, 0x3e7a));
  const double rate = cfg.real("dataset.noise_rate");
  switch (parse_noise_mode(cfg.get("dataset.noise"))) {
    case NoiseMode::none: data.train = train_clean; break;
    case NoiseMode::symmetric: data.train = inject_symmetric_noise(train_clean, rate, derive_seed(s, 0x5e)); break;
    case NoiseMode::asymmetric: {
      auto pm = cfg.int_list("dataset.pair_map");
      if (pm.empty())
        for (int c = 0; c < C; ++c) pm.push_back((c + 1) % C);
      data.train = inject_asymmetric_noise(train_clean, rate, pm, derive_seed(s, 0xa5));
      break;
    }
  }
  data.meta = meta;
  data.test = make_blobs(C, static_cast<int>(cfg.integer("dataset.test_per_class")), D, spread,
                         derive_seed(s, 0x7e57), radius);
  data.ood = make_ood_blobs(C, static_cast<int>(cfg.integer("dataset.ood_per_class") * C), D, spread,
                            derive_seed(s, 0x00d), radius, cfg.real("dataset.ood_displacement"));
  return data;
}

std::string dataset_fingerprint(const Dataset& ds) {
  std::string bytes;
  for (const auto& s : ds.samples) {
    bytes += std::to_string(s.id) + "," + std::to_string(s.y_true) + "," + std::to_string(s.y_obs);
    for (double v : s.x) bytes += "," + format_real(v);
    bytes += "\n";
  }
  return fnv1a_hex(bytes);
}

void write_data(const TrainData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_dataset_csv(data.train, dir / "train.csv");
  write_dataset_sidecar(data.train, dir / "train.json");
  const Dataset meta = from_meta(data.meta, data.train);
  write_dataset_csv(meta, dir / "meta.csv");
  write_dataset_sidecar(meta, dir / "meta.json");
  write_dataset_csv(data.test, dir / "test.csv");
  write_dataset_sidecar(data.test, dir / "test.json");
  std::ofstream out(dir / "ood.csv", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + (dir / "ood.csv").string());
  out << "id";
  for (int d = 0; d < data.train.dim; ++d) out << ",x" << d;
  out << '\n';
  for (std::size_t i = 0; i < data.ood.size(); ++i) {
    out << i;
    for (double v : data.ood[i]) out << ',' << format_real(v);
    out << '\n';
  }
}

const std::vector<std::string>& ablation_variants() {
  static const std::vector<std::string> v = {"hrp",     "no_ram",       "no_cdcl", "no_grg",
                                             "sym_ram", "coupled_meta", "baseline"};
  return v;
}

RunConfig apply_variant(const RunConfig& base, const std::string& variant) {
  RunConfig c = base;
  if (variant == "hrp") return c;
  if (variant == "no_ram") c.set("ram.use_ram", "false");
  else if (variant == "no_cdcl") c.set("cdcl.use_cdcl", "false");
  else if (variant == "no_grg") c.set("ram.use_grg", "false");
  else if (variant == "sym_ram") c.set("ram.sym_ram", "true");
  else if (variant == "coupled_meta") c.set("reliability.couple_meta", "true");
  else if (variant == "baseline") c.set("trainer.method", "baseline");
  else throw ConfigError("unknown ablation variant '" + variant + "'");
  return c;
}

AblationGrid run_ablation(const RunConfig& base, std::span<const std::uint64_t> seeds) {
  AblationGrid grid;
  for (const auto& variant : ablation_variants()) {
    AblationRow row;
    row.variant = variant;
    for (std::uint64_t s : seeds) {
      RunConfig c = apply_variant(base, variant);
      c.set("run.seed", std::to_string(s));
      const TrainData data = build_data(c);
      const auto result = co_train(data, c.train_config());
      row.final_acc.push_back(result.report.summary.last_acc);
    }
    double sum = 0.0;
    for (double a : row.final_acc) sum += a;
    row.mean_acc = row.final_acc.empty() ? 0.0 : sum / static_cast<double>(row.final_acc.size());
    grid.rows.push_back(std::move(row));
  }
  return grid;
}

const AblationRow& AblationGrid::row(const std::string& variant) const {
  for (const auto& r : rows)
    if (r.variant == variant) return r;
  throw std::out_of_range("no ablation row '" + variant + "'");
}

std::string AblationGrid::to_csv() const {
  std::ostringstream out;
  out << "variant,mean_acc,margin_vs_hrp";
  const std::size_t n = rows.empty() ? 0 : rows.front().final_acc.size();
  for (std::size_t k = 0; k < n; ++k) out << ",acc_seed" << k;
  out << '\n';
  const double ref = rows.empty() ? 0.0 : rows.front().mean_acc;
  for (const auto& r : rows) {
    out << r.variant << ',' << format_real(r.mean_acc) << ',' << format_real(ref - r.mean_acc);
    for (double a : r.final_acc) out << ',' << format_real(a);
    out << '\n';
  }
  return out.str();
}

}  // namespace hrp
