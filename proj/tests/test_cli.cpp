#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "hrp/errors.hpp"

using namespace hrp;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "hrp");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("hrp_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

const char* kSmall =
    "[dataset]\n"
    "per_class = 40\n"
    "meta_size = 8\n"
    "test_per_class = 20\n"
    "ood_per_class = 10\n"
    "[net]\n"
    "hidden = 12\n"
    "proj = 4\n"
    "[trainer]\n"
    "epochs = 3\n"
    "batch_size = 32\n"
    "t_start = 1\n"
    "t_full = 2\n";

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = RunConfig::from_string("[dataset]\nnoise_rate = 0.2\n[run]\nseed = 9\n");
  CHECK(cfg.real("dataset.noise_rate") == 0.2);
  CHECK(cfg.run_seed() == 9);
  CHECK(cfg.integer("trainer.epochs") == 30);
  try {
    RunConfig::from_string("[dataset]\nnoise_ratio = 0.2\n");
    FAIL("expected a configuration error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("dataset.noise_ratio") != std::string::npos);
  }
  CHECK_THROWS_AS(RunConfig::from_string("[trainer]\nepochs = many\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_string("[ram]\nuse_ram = perhaps\n"), ConfigError);
  RunConfig bad;
  bad.set("dataset.noise_rate", "1.5");
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("canonical form and hash") {
  auto a = RunConfig::from_string("[optim]\nlr = 0.050\n[run]\nseed = 3\n");
  auto b = RunConfig::from_string("[run]\nseed=3\n[optim]\nlr=5e-2\n");
  CHECK(a.canonical() == b.canonical());
  CHECK(a.hash() == b.hash());
  b.set("run.seed", "4");
  CHECK(a.hash() != b.hash());
  // the canonical text is itself a loadable description of the same run
  std::string ini;
  std::string section;
  for (const auto& [k, v] : a.canonical_map()) {
    const auto dot = k.find('.');
    if (k.substr(0, dot) != section) ini += "[" + (section = k.substr(0, dot)) + "]\n";
    ini += k.substr(dot + 1) + " = " + v + "\n";
  }
  CHECK(RunConfig::from_string(ini).hash() == a.hash());
}

TEST_CASE("ablation variants are single-flag changes") {
  const RunConfig base;
  for (const auto& v : ablation_variants()) {
    const auto c = apply_variant(base, v);
    int diffs = 0;
    for (const auto& k : RunConfig::keys()) diffs += c.get(k) != base.get(k);
    CHECK(diffs == (v == "hrp" ? 0 : 1));
  }
  CHECK_THROWS_AS(apply_variant(base, "no_such_thing"), ConfigError);
}

TEST_CASE("generate is byte-reproducible and echoes the noise spec") {
  const auto dir = scratch("generate");
  write(dir / "c.ini", "[dataset]\nper_class = 30\nmeta_size = 8\nnoise = symmetric\nnoise_rate = 0.4\n");
  REQUIRE(invoke({"generate", "--config", (dir / "c.ini").string(), "--out", (dir / "a").string()}).code == 0);
  REQUIRE(invoke({"generate", "--config", (dir / "c.ini").string(), "--out", (dir / "b").string()}).code == 0);
  for (const char* f : {"train.csv", "train.json", "meta.csv", "meta.json", "test.csv", "test.json", "ood.csv"}) {
    CHECK(fs::exists(dir / "a" / f));
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  const auto side = nlohmann::json::parse(slurp(dir / "a" / "train.json"));
  CHECK(side["noise_spec"]["mode"] == "symmetric");
  CHECK(side["noise_spec"]["rate"].get<double>() == 0.4);
  CHECK(invoke({"generate", "--config", (dir / "c.ini").string(), "--seed", "5", "--out", (dir / "c").string()}).code == 0);
  CHECK(slurp(dir / "a" / "train.csv") != slurp(dir / "c" / "train.csv"));
}

TEST_CASE("configuration errors exit with code 2 and name the key") {
  const auto dir = scratch("badkey");
  write(dir / "bad.ini", "[trainer]\nepochz = 3\n");
  const auto r = invoke({"generate", "--config", (dir / "bad.ini").string(), "--out", (dir / "o").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("trainer.epochz") != std::string::npos);
  CHECK(invoke({"train", "--set", "ram.r_min=5"}).code == 2);
  CHECK(invoke({"train", "--config", (dir / "missing.ini").string()}).code == 2);
  CHECK(invoke({"bogus"}).code == 2);
  CHECK(invoke({"oracle", "nonsense"}).code == 2);
}

TEST_CASE("missing meta set with reliability enabled is a configuration error") {
  const auto dir = scratch("nometa");
  write(dir / "c.ini", std::string(kSmall));
  const auto r = invoke({"train", "--config", (dir / "c.ini").string(), "--set", "dataset.meta_size=0", "--out",
                         (dir / "o").string()});
  CHECK(r.code == 2);
}

TEST_CASE("zero epochs gives a report with the initial evaluation only") {
  const auto dir = scratch("zero");
  write(dir / "c.ini", std::string(kSmall));
  const auto r = invoke({"train", "--config", (dir / "c.ini").string(), "--set", "trainer.epochs=0", "--set",
                         "trainer.t_start=0", "--set", "trainer.t_full=0", "--out", (dir / "o").string()});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "o" / "report.json"));
  CHECK(j["epochs"].empty());
  CHECK(j["initial"].contains("acc_ensemble"));
}

TEST_CASE("train writes every artifact and repeats byte for byte") {
  const auto dir = scratch("train");
  write(dir / "c.ini", std::string(kSmall));
  const auto cfg = cli::load_config(dir / "c.ini", {}, std::nullopt);
  const auto r1 = cli::cmd_train(cfg, {dir / "a", true, true});
  const auto r2 = cli::cmd_train(cfg, {dir / "b", false, true});
  CHECK(slurp(dir / "a" / "report.json") == slurp(dir / "b" / "report.json"));
  CHECK(slurp(dir / "a" / "metrics.csv") == slurp(dir / "b" / "metrics.csv"));
  for (const char* f : {"report.json", "metrics.csv", "manifest.json", "config.ini", "net1.ckpt", "net2.ckpt",
                        "reliability_net1.csv", "reliability_net2.csv", "lambda_hist.csv", "purity.csv"})
    CHECK(fs::exists(dir / "a" / f));
  CHECK_FALSE(fs::exists(dir / "b" / "purity.csv"));

  CHECK(slurp(dir / "a" / "reliability_net1.csv").rfind("epoch,batch,id,alpha,beta,is_label_clean\n", 0) == 0);
  CHECK(slurp(dir / "a" / "lambda_hist.csv").rfind("epoch,pair_type,bin_lo,bin_hi,count\n", 0) == 0);
  CHECK(slurp(dir / "a" / "purity.csv").rfind("epoch,purity_raw,purity_gated\n", 0) == 0);

  const auto manifest = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
  CHECK(manifest["config_hash"] == cfg.hash());
  CHECK(fnv1a_hex(manifest["canonical_config"].get<std::string>()) == manifest["config_hash"]);
  CHECK(manifest["artifact_version"] == "0.1.0");
  CHECK(manifest["dataset_fingerprints"].contains("train"));

  // the echoed config alone reproduces the run
  const auto report = report_from_json(slurp(dir / "a" / "report.json"));
  RunConfig echo;
  for (const auto& [k, v] : report.config) echo.set(k, v);
  CHECK(echo.hash() == cfg.hash());
  const auto r3 = cli::cmd_train(echo, {dir / "c", false, false});
  CHECK(slurp(dir / "c" / "report.json") == slurp(dir / "a" / "report.json"));

  const auto shown = invoke({"report", (dir / "a").string()});
  CHECK(shown.code == 0);
  CHECK(shown.out.find("best accuracy") != std::string::npos);
}

TEST_CASE("data can be generated once and trained from disk") {
  const auto dir = scratch("fromdisk");
  write(dir / "c.ini", std::string(kSmall));
  const auto cfg = cli::load_config(dir / "c.ini", {}, std::nullopt);
  cli::cmd_generate(cfg, dir / "data");
  const auto direct = cli::cmd_train(cfg, {dir / "direct", false, false});
  auto from_disk = cfg;
  from_disk.set("dataset.dir", (dir / "data").string());
  const auto loaded = cli::cmd_train(from_disk, {dir / "loaded", false, false});
  CHECK(direct.epochs.back().eval.acc_ensemble == loaded.epochs.back().eval.acc_ensemble);
  CHECK(direct.summary.ood_auroc == loaded.summary.ood_auroc);
}

TEST_CASE("oracle subcommand") {
  const auto r = invoke({"oracle", "auroc"});
  CHECK(r.code == 0);
  CHECK(r.out.find("PASS") != std::string::npos);
  CHECK(r.out.find("FAIL") == std::string::npos);
}

TEST_CASE("ablation grid has one row per variant") {
  const auto dir = scratch("ablate");
  write(dir / "c.ini", std::string(kSmall));
  const auto cfg = cli::load_config(dir / "c.ini", {}, std::nullopt);
  const auto grid = cli::cmd_ablate(cfg, {1, 2}, dir / "o");
  CHECK(grid.rows.size() == ablation_variants().size());
  CHECK(grid.rows.front().variant == "hrp");
  for (const auto& row : grid.rows) CHECK(row.final_acc.size() == 2);
  const std::string csv = slurp(dir / "o" / "ablation.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + static_cast<long>(ablation_variants().size()));
}
