#include "hrp/report.hpp"

#include <sstream>

#include <json.hpp>

#include "hrp/format.hpp"

namespace hrp {

using nlohmann::ordered_json;

namespace {

ordered_json opt(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

std::optional<double> opt_from(const ordered_json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

ordered_json to_json(const LossRecord& l) {
  return ordered_json{{"ce_re", l.ce_re}, {"cr", l.cr}, {"ram", l.ram}, {"cdcl", l.cdcl}, {"total", l.total}};
}

LossRecord loss_from(const ordered_json& j) {
  return {j.at("ce_re").get<double>(), j.at("cr").get<double>(), j.at("ram").get<double>(),
          j.at("cdcl").get<double>(), j.at("total").get<double>()};
}

ordered_json to_json(const EvalRecord& e) {
  return ordered_json{{"acc_net1", e.acc_net1}, {"acc_net2", e.acc_net2}, {"acc_ensemble", e.acc_ensemble}};
}

EvalRecord eval_from(const ordered_json& j) {
  return {j.at("acc_net1").get<double>(), j.at("acc_net2").get<double>(), j.at("acc_ensemble").get<double>()};
}

ordered_json to_json(const StatRecord& s) { return ordered_json{{"mean", opt(s.mean)}, {"std", opt(s.std)}}; }

StatRecord stat_from(const ordered_json& j) { return {opt_from(j.at("mean")), opt_from(j.at("std"))}; }

}  // namespace

std::string report_to_json(const RunReport& r) {
  ordered_json j;
  j["artifact_version"] = r.artifact_version;
  j["method"] = r.method;
  ordered_json cfg = ordered_json::object();
  for (const auto& [k, v] : r.config) cfg[k] = v;
  j["config"] = cfg;
  j["seeds"] = ordered_json{{"run", r.seed}, {"net1", r.seed_net1}, {"net2", r.seed_net2}};
  j["hist_bins"] = r.hist_bins;
  j["initial"] = to_json(r.initial);
  ordered_json epochs = ordered_json::array();
  for (const auto& e : r.epochs) {
    ordered_json ej;
    ej["epoch"] = e.epoch;
    ej["lr"] = e.lr;
    ej["warmup"] = e.warmup;
    ej["loss_net1"] = to_json(e.loss_net1);
    ej["loss_net2"] = to_json(e.loss_net2);
    ej["eval"] = to_json(e.eval);
    ej["alpha_clean"] = to_json(e.alpha_clean);
    ej["alpha_noisy"] = to_json(e.alpha_noisy);
    ej["beta_clean"] = to_json(e.beta_clean);
    ej["beta_noisy"] = to_json(e.beta_noisy);
    ej["purity_raw"] = opt(e.purity_raw);
    ej["purity_gated"] = opt(e.purity_gated);
    ordered_json lam;
    for (int t = 0; t < 3; ++t)
      lam[kPairTypeNames[t]] = ordered_json{{"counts", e.lambda.counts[t]}, {"mean", opt(e.lambda.mean[t])}};
    ej["lambda"] = lam;
    ej["mean_w_mix"] = opt(e.mean_w_mix);
    ej["confident_fraction"] = e.confident_fraction;
    epochs.push_back(std::move(ej));
  }
  j["epochs"] = epochs;
  ordered_json s;
  s["best_acc"] = r.summary.best_acc;
  s["best_epoch"] = r.summary.best_epoch;
  s["last_acc"] = r.summary.last_acc;
  s["ood_auroc"] = opt(r.summary.ood_auroc);
  s["ood_fpr95"] = opt(r.summary.ood_fpr95);
  j["summary"] = s;
  return j.dump(2) + "\n";
}

RunReport report_from_json(const std::string& text) {
  const auto j = ordered_json::parse(text);
  RunReport r;
  r.artifact_version = j.at("artifact_version").get<std::string>();
  r.method = j.at("method").get<std::string>();
  for (const auto& [k, v] : j.at("config").items()) r.config[k] = v.get<std::string>();
  r.seed = j.at("seeds").at("run").get<std::uint64_t>();
  r.seed_net1 = j.at("seeds").at("net1").get<std::uint64_t>();
  r.seed_net2 = j.at("seeds").at("net2").get<std::uint64_t>();
  r.hist_bins = j.at("hist_bins").get<int>();
  r.initial = eval_from(j.at("initial"));
  for (const auto& ej : j.at("epochs")) {
    EpochRecord e;
    e.epoch = ej.at("epoch").get<int>();
    e.lr = ej.at("lr").get<double>();
    e.warmup = ej.at("warmup").get<double>();
    e.loss_net1 = loss_from(ej.at("loss_net1"));
    e.loss_net2 = loss_from(ej.at("loss_net2"));
    e.eval = eval_from(ej.at("eval"));
    e.alpha_clean = stat_from(ej.at("alpha_clean"));
    e.alpha_noisy = stat_from(ej.at("alpha_noisy"));
    e.beta_clean = stat_from(ej.at("beta_clean"));
    e.beta_noisy = stat_from(ej.at("beta_noisy"));
    e.purity_raw = opt_from(ej.at("purity_raw"));
    e.purity_gated = opt_from(ej.at("purity_gated"));
    for (int t = 0; t < 3; ++t) {
      const auto& lt = ej.at("lambda").at(kPairTypeNames[t]);
      e.lambda.counts[t] = lt.at("counts").get<std::vector<std::int64_t>>();
      e.lambda.mean[t] = opt_from(lt.at("mean"));
    }
    e.mean_w_mix = opt_from(ej.at("mean_w_mix"));
    e.confident_fraction = ej.at("confident_fraction").get<double>();
    r.epochs.push_back(std::move(e));
  }
  const auto& s = j.at("summary");
  r.summary.best_acc = s.at("best_acc").get<double>();
  r.summary.best_epoch = s.at("best_epoch").get<int>();
  r.summary.last_acc = s.at("last_acc").get<double>();
  r.summary.ood_auroc = opt_from(s.at("ood_auroc"));
  r.summary.ood_fpr95 = opt_from(s.at("ood_fpr95"));
  return r;
}

namespace {

std::string cell(const std::optional<double>& v) { return v ? format_real(*v) : ""; }

}  // namespace

std::string metrics_csv(const RunReport& r) {
  std::ostringstream out;
  out << "epoch,lr,warmup,total_net1,total_net2,ce_re,cr,ram,cdcl,acc_net1,acc_net2,acc_ensemble,"
         "alpha_clean,alpha_noisy,beta_clean,beta_noisy,purity_raw,purity_gated,mean_w_mix,"
         "lambda_mean_cc,lambda_mean_cn,lambda_mean_nn,confident_fraction\n";
  for (const auto& e : r.epochs) {
    const auto avg = [](double a, double b) { return 0.5 * (a + b); };
    out << e.epoch << ',' << format_real(e.lr) << ',' << format_real(e.warmup) << ','
        << format_real(e.loss_net1.total) << ',' << format_real(e.loss_net2.total) << ','
        << format_real(avg(e.loss_net1.ce_re, e.loss_net2.ce_re)) << ','
        << format_real(avg(e.loss_net1.cr, e.loss_net2.cr)) << ','
        << format_real(avg(e.loss_net1.ram, e.loss_net2.ram)) << ','
        << format_real(avg(e.loss_net1.cdcl, e.loss_net2.cdcl)) << ',' << format_real(e.eval.acc_net1)
        << ',' << format_real(e.eval.acc_net2) << ',' << format_real(e.eval.acc_ensemble) << ','
        << cell(e.alpha_clean.mean) << ',' << cell(e.alpha_noisy.mean) << ',' << cell(e.beta_clean.mean)
        << ',' << cell(e.beta_noisy.mean) << ',' << cell(e.purity_raw) << ',' << cell(e.purity_gated)
        << ',' << cell(e.mean_w_mix) << ',' << cell(e.lambda.mean[0]) << ',' << cell(e.lambda.mean[1])
        << ',' << cell(e.lambda.mean[2]) << ',' << format_real(e.confident_fraction) << '\n';
  }
  return out.str();
}

std::string describe(const RunReport& r) {
  std::ostringstream out;
  auto pct = [](double v) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(2);
    s << 100.0 * v << '%';
    return s.str();
  };
  auto num = [](const std::optional<double>& v) {
    if (!v) return std::string("-");
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(4);
    s << *v;
    return s.str();
  };
  out << "method " << r.method << "  (artifact " << r.artifact_version << ", seed " << r.seed << ")\n";
  out << "initial accuracy: net1 " << pct(r.initial.acc_net1) << "  net2 " << pct(r.initial.acc_net2)
      << "  ensemble " << pct(r.initial.acc_ensemble) << '\n';
  out << "epoch      lr  w(t)   loss1   loss2   acc1    acc2    ens     a_cln   a_nsy   b_cln   b_nsy   pur_raw pur_gtd w_mix\n";
  for (const auto& e : r.epochs) {
    char line[512];
    std::snprintf(line, sizeof line,
                  "%5d %7.4f %5.2f %7.4f %7.4f %7.4f %7.4f %7.4f %7s %7s %7s %7s %7s %7s %7s\n", e.epoch,
                  e.lr, e.warmup, e.loss_net1.total, e.loss_net2.total, e.eval.acc_net1, e.eval.acc_net2,
                  e.eval.acc_ensemble, num(e.alpha_clean.mean).c_str(), num(e.alpha_noisy.mean).c_str(),
                  num(e.beta_clean.mean).c_str(), num(e.beta_noisy.mean).c_str(), num(e.purity_raw).c_str(),
                  num(e.purity_gated).c_str(), num(e.mean_w_mix).c_str());
    out << line;
  }
  out << "best accuracy " << pct(r.summary.best_acc) << " (epoch " << r.summary.best_epoch << "), last "
      << pct(r.summary.last_acc) << '\n';
  if (r.summary.ood_auroc)
    out << "OOD (MSP): AUROC " << num(r.summary.ood_auroc) << "  FPR95 " << num(r.summary.ood_fpr95) << '\n';
  return out.str();
}

}  // namespace hrp
