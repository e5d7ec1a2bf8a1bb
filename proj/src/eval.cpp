#include "stormvi/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "stormvi/errors.hpp"

namespace stormvi {

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("scores and labels differ in length");
  if (scores.empty()) throw std::invalid_argument("empty score list");
  int pos = 0, neg = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw std::invalid_argument("labels must be 0 or 1");
    (l ? pos : neg) += 1;
  }
  if (pos == 0 || neg == 0)
    throw DataError("labels contain a single class; ROC undefined");
}

}  // namespace

RocCurve roc_curve(std::span<const double> scores,
                   std::span<const int> labels) {
  check_inputs(scores, labels);
  const int n = static_cast<int>(scores.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return scores[a] > scores[b]; });

  int total_pos = 0;
  for (int l : labels) total_pos += l;
  const int total_neg = n - total_pos;

  RocCurve curve;
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  int tp = 0, fp = 0;
  int i = 0;
  while (i < n) {
    const double s = scores[order[i]];
    while (i < n && scores[order[i]] == s) {
      (labels[order[i]] ? tp : fp) += 1;
      ++i;
    }
    curve.points.push_back({s, static_cast<double>(fp) / total_neg,
                            static_cast<double>(tp) / total_pos});
  }
  double auc = 0.0;
  for (size_t k = 1; k < curve.points.size(); ++k) {
    const RocPoint& a = curve.points[k - 1];
    const RocPoint& b = curve.points[k];
    auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
  }
  curve.auc = auc;
  return curve;
}

std::pair<double, double> tpr_tnr_at(std::span<const double> scores,
                                     std::span<const int> labels,
                                     double threshold) {
  check_inputs(scores, labels);
  int tp = 0, fn = 0, tn = 0, fp = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (labels[i])
      (pred ? tp : fn) += 1;
    else
      (pred ? fp : tn) += 1;
  }
  return {static_cast<double>(tp) / (tp + fn),
          static_cast<double>(tn) / (tn + fp)};
}

double youden_threshold(const RocCurve& curve) {
  double best = -2.0;
  double threshold = 0.0;
  for (const RocPoint& p : curve.points) {
    const double j = p.tpr - p.fpr;
    if (j > best) {
      best = j;
      threshold = p.threshold;
    }
  }
  return threshold;
}

std::vector<double> dpm_baseline_scores(const LocationTable& table) {
  if (table.records.empty()) throw std::invalid_argument("empty table");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const LocationRecord& r : table.records) {
    lo = std::min(lo, r.dpm);
    hi = std::max(hi, r.dpm);
  }
  std::vector<double> out;
  out.reserve(table.records.size());
  for (const LocationRecord& r : table.records)
    out.push_back(hi > lo ? (r.dpm - lo) / (hi - lo) : 0.5);
  return out;
}

namespace {

struct LabeledScores {
  std::vector<double> scores;
  std::vector<int> labels;
};

// q_BD per labeled record, pulled out of the fitted posterior vector.
LabeledScores collect_scores(const LocationTable& table, const FitResult& fit) {
  std::vector<int> pos_of_record(table.records.size(), -1);
  for (int k = 0; k < fit.active.size(); ++k)
    pos_of_record[fit.active.index[k]] = k;
  LabeledScores out;
  for (size_t i = 0; i < table.records.size(); ++i) {
    const LocationRecord& rec = table.records[i];
    if (!rec.label) continue;
    const int pos = pos_of_record[i];
    if (pos < 0 || fit.active.variant[pos] != GraphVariant::Full) continue;
    out.scores.push_back(fit.posteriors[pos].damage_prob);
    out.labels.push_back(*rec.label);
  }
  return out;
}

AblationRow run_one(const SyntheticScenario& sc, const std::string& method,
                    bool pruned, const OptimizerConfig& config,
                    const McmcEmOptions& mcmc) {
  const ActiveSet active = pruned ? prune(sc.table) : all_active(sc.table);
  const FitResult fit =
      method.rfind("mcmc", 0) == 0
          ? run_mcmc_em(sc.table, active, config, mcmc)
          : run_em(sc.table, active, config);
  const LabeledScores ls = collect_scores(sc.table, fit);
  const RocCurve curve = roc_curve(ls.scores, ls.labels);
  const double theta = youden_threshold(curve);
  const auto [tpr, tnr] = tpr_tnr_at(ls.scores, ls.labels, theta);
  AblationRow row;
  row.method = method;
  row.batch_size = std::min<int>(config.batch_size, active.size());
  row.auc = curve.auc;
  row.vlb = fit.elbo_history.back().second / active.size();
  row.tpr = tpr;
  row.tnr = tnr;
  row.seconds = fit.wall_time_seconds;
  return row;
}

}  // namespace

std::vector<AblationRow> ablation_report(const SyntheticScenario& scenario,
                                         const AblationConfig& config) {
  OptimizerConfig base = config.base;
  base.elbo_rel_tol = 0.0;  // fixed epoch count keeps timings comparable
  std::vector<AblationRow> rows;
  for (int m : config.batch_sizes) {
    OptimizerConfig c = base;
    c.batch_size = m;
    rows.push_back(run_one(scenario, "vi-full", false, c, config.mcmc));
  }
  rows.push_back(run_one(scenario, "vi-local", true, base, config.mcmc));
  if (config.include_mcmc) {
    rows.push_back(run_one(scenario, "mcmc-full", false, base, config.mcmc));
    rows.push_back(run_one(scenario, "mcmc-local", true, base, config.mcmc));
  }
  return rows;
}

void write_report_csv(const std::string& path,
                      const std::vector<AblationRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError(path + ": cannot open for writing");
  out << "method,batch_size,auc,vlb,tpr,tnr,seconds\n";
  char line[256];
  for (const AblationRow& r : rows) {
    std::snprintf(line, sizeof line, "%s,%d,%.6f,%.6f,%.6f,%.6f,%.3f\n",
                  r.method.c_str(), r.batch_size, r.auc, r.vlb, r.tpr, r.tnr,
                  r.seconds);
    out << line;
  }
  if (!out.flush()) throw DataError(path + ": write failed");
}

void write_roc_csv(const std::string& path, const RocCurve& curve) {
  std::ofstream out(path);
  if (!out) throw DataError(path + ": cannot open for writing");
  out << "threshold,fpr,tpr\n";
  char line[128];
  for (const RocPoint& p : curve.points) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", p.threshold, p.fpr,
                  p.tpr);
    out << line;
  }
  if (!out.flush()) throw DataError(path + ": write failed");
}

}  // namespace stormvi
