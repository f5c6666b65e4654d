#include "cli.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <map>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hrp/checkpoint.hpp"
#include "hrp/errors.hpp"
#include "hrp/format.hpp"
#include "hrp/version.hpp"
#include "oracles.hpp"

namespace hrp::cli {

namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << bytes;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create directory " + dir.string());
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string ood_fingerprint(const std::vector<std::vector<double>>& ood) {
  std::string bytes;
  for (const auto& x : ood) {
    for (double v : x) bytes += format_real(v) + ",";
    bytes += "\n";
  }
  return fnv1a_hex(bytes);
}

struct Diagnostics {
  std::ostringstream reliability[2];
  explicit Diagnostics() {
    for (auto& r : reliability) r << "epoch,batch,id,alpha,beta,is_label_clean\n";
  }
};

std::string lambda_csv(const RunReport& r) {
  std::ostringstream out;
  out << "epoch,pair_type,bin_lo,bin_hi,count\n";
  const int bins = r.hist_bins;
  for (const auto& e : r.epochs)
    for (int t = 0; t < 3; ++t)
      for (int b = 0; b < bins && b < static_cast<int>(e.lambda.counts[t].size()); ++b)
        out << e.epoch << ',' << kPairTypeNames[t] << ',' << format_real(static_cast<double>(b) / bins) << ','
            << format_real(static_cast<double>(b + 1) / bins) << ',' << e.lambda.counts[t][b] << '\n';
  return out.str();
}

std::string purity_csv(const RunReport& r) {
  std::ostringstream out;
  out << "epoch,purity_raw,purity_gated\n";
  auto cell = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string(); };
  for (const auto& e : r.epochs) out << e.epoch << ',' << cell(e.purity_raw) << ',' << cell(e.purity_gated) << '\n';
  return out.str();
}

}  // namespace

RunConfig load_config(const fs::path& path, const std::vector<std::string>& overrides,
                      std::optional<std::uint64_t> seed) {
  RunConfig cfg = path.empty() ? RunConfig() : RunConfig::from_file(path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + kv + "' is not key=value");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (seed) cfg.set("run.seed", std::to_string(*seed));
  cfg.validate();
  return cfg;
}

void cmd_generate(const RunConfig& cfg, const fs::path& out) {
  const TrainData data = build_data(cfg);
  ensure_dir(out);
  write_data(data, out);
}

std::string manifest_json(const RunConfig& cfg, const TrainData& data, const std::string& started,
                          const std::string& finished, double wall_seconds) {
  nlohmann::ordered_json j;
  j["config_hash"] = cfg.hash();
  j["artifact_version"] = kArtifactVersion;
  j["dataset_fingerprints"] = {{"train", dataset_fingerprint(data.train)},
                               {"meta", dataset_fingerprint(Dataset{data.meta.samples, data.train.num_classes, data.train.dim})},
                               {"test", dataset_fingerprint(data.test)},
                               {"ood", ood_fingerprint(data.ood)}};
  j["started_at"] = started;
  j["finished_at"] = finished;
  j["wall_seconds"] = wall_seconds;
  j["provenance"] = "hrp-" + std::string(kArtifactVersion) + "+cfg." + cfg.hash() + ".seed." +
                    std::to_string(cfg.run_seed());
  j["canonical_config"] = cfg.canonical();
  return j.dump(2) + "\n";
}

RunReport cmd_train(const RunConfig& cfg, const TrainOptions& opts) {
  const std::string started = utc_now();
  const auto t0 = std::chrono::steady_clock::now();
  const TrainData data = build_data(cfg);
  const TrainConfig tc = cfg.train_config();
  ensure_dir(opts.out);

  Diagnostics diag;
  BatchObserver observer;
  std::map<int, bool> clean_by_id;
  for (const auto& s : data.train.samples) clean_by_id[s.id] = s.label_clean();
  if (opts.diagnostics) {
    observer = [&](const BatchTrace& t) {
      if (!t.reliability) return;
      auto& os = diag.reliability[t.net == 0 ? 0 : 1];
      const auto& rb = *t.reliability;
      for (std::size_t k = 0; k < t.ids.size(); ++k) {
        const int id = t.ids[k];
        const bool clean = clean_by_id.at(id);
        os << t.epoch << ',' << t.batch << ',' << id << ',' << format_real(rb.alpha[k]) << ','
           << format_real(rb.beta[k]) << ',' << (clean ? 1 : 0) << '\n';
      }
    };
  }

  TrainResult result;
  try {
    result = co_train(data, tc, observer);
  } catch (const DivergenceError& e) {
    write_file(opts.out / "divergence.txt", std::string(e.what()) + "\n" + e.snapshot());
    throw;
  }
  result.report.config = cfg.canonical_map();

  write_file(opts.out / "report.json", report_to_json(result.report));
  write_file(opts.out / "metrics.csv", metrics_csv(result.report));
  write_file(opts.out / "config.ini", cfg.canonical());
  if (opts.checkpoints) {
    save_checkpoint(result.net1.params, opts.out / "net1.ckpt");
    save_checkpoint(result.net2.params, opts.out / "net2.ckpt");
  }
  if (opts.diagnostics) {
    write_file(opts.out / "reliability_net1.csv", diag.reliability[0].str());
    write_file(opts.out / "reliability_net2.csv", diag.reliability[1].str());
    write_file(opts.out / "lambda_hist.csv", lambda_csv(result.report));
    write_file(opts.out / "purity.csv", purity_csv(result.report));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_file(opts.out / "manifest.json", manifest_json(cfg, data, started, utc_now(), secs));
  return result.report;
}

int cmd_oracle(const std::string& suite, std::ostream& out) {
  const auto& names = oracle::suite_names();
  if (std::find(names.begin(), names.end(), suite) == names.end())
    throw ConfigError("unknown oracle suite '" + suite + "'");
  const auto r = oracle::run_suite(suite, out);
  out << r.passed << " passed, " << r.failed << " failed\n";
  return r.ok() ? kOk : kRuntimeFailure;
}

std::string cmd_report(const fs::path& report_json) {
  return describe(report_from_json(read_file(report_json)));
}

AblationGrid cmd_ablate(const RunConfig& cfg, const std::vector<std::uint64_t>& seeds, const fs::path& out) {
  ensure_dir(out);
  const AblationGrid grid = run_ablation(cfg, seeds);
  write_file(out / "ablation.csv", grid.to_csv());
  return grid;
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"hrp: reliability-propagation training lab for noisy labels"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kArtifactVersion));

  std::string config_path, out_dir, suite = "all", report_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  bool diagnostics = false;
  std::vector<std::uint64_t> seeds{0, 1, 2};

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "config file (sectioned key = value)");
    sub->add_option("--set", overrides, "override one key, section.key=value");
    sub->add_option("--seed", seed, "overrides run.seed");
    sub->add_option("--out", out_dir, "output directory (defaults to run.out_dir)");
  };
  auto* gen = app.add_subcommand("generate", "write the synthetic datasets");
  add_common(gen);
  auto* train = app.add_subcommand("train", "co-train both networks and write the run report");
  add_common(train);
  train->add_flag("--diagnostics", diagnostics, "also write per-batch and per-epoch diagnostic CSVs");
  auto* orc = app.add_subcommand("oracle", "run reference-implementation checks");
  orc->add_option("suite", suite, "meta | losses | beta | cdcl | auroc | all");
  auto* rep = app.add_subcommand("report", "pretty-print a report.json");
  rep->add_option("path", report_path, "report.json or a run directory")->required();
  auto* abl = app.add_subcommand("ablate", "run every ablation variant over several seeds");
  add_common(abl);
  abl->add_option("--seeds", seeds, "run seeds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    auto resolve_out = [&](const RunConfig& cfg) { return out_dir.empty() ? cfg.out_dir() : fs::path(out_dir); };
    if (*gen) {
      const RunConfig cfg = load_config(config_path, overrides, seed);
      const fs::path dir = resolve_out(cfg);
      cmd_generate(cfg, dir);
      out << "wrote datasets to " << dir.string() << '\n';
    } else if (*train) {
      const RunConfig cfg = load_config(config_path, overrides, seed);
      const fs::path dir = resolve_out(cfg);
      const RunReport r = cmd_train(cfg, {dir, diagnostics, true});
      out << describe(r);
      out << "wrote run to " << dir.string() << '\n';
    } else if (*orc) {
      return cmd_oracle(suite, out);
    } else if (*rep) {
      fs::path p = report_path;
      if (fs::is_directory(p)) p /= "report.json";
      out << cmd_report(p);
    } else if (*abl) {
      const RunConfig cfg = load_config(config_path, overrides, seed);
      const fs::path dir = resolve_out(cfg);
      out << cmd_ablate(cfg, seeds, dir).to_csv();
    }
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  return kOk;
}

}  // namespace hrp::cli
