#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stormvi/geodata.hpp"
#include "stormvi/inference.hpp"
#include "stormvi/oracle.hpp"

namespace stormvi {

struct RocPoint {
  double threshold;  // predict positive when score >= threshold
  double fpr;
  double tpr;
};

struct RocCurve {
  std::vector<RocPoint> points;  // (0,0) .. (1,1), fpr non-decreasing
  double auc = 0.0;
};

// Threshold sweep over distinct scores descending, ties grouped into a single
// step; AUC by the trapezoidal rule (equals the normalized Mann-Whitney U).
RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels);

std::pair<double, double> tpr_tnr_at(std::span<const double> scores,
                                     std::span<const int> labels,
                                     double threshold);

// Threshold maximizing tpr - fpr along the curve.
double youden_threshold(const RocCurve& curve);

// Min-max-normalized observation per record; constant input maps to 0.5.
std::vector<double> dpm_baseline_scores(const LocationTable& table);

struct AblationRow {
  std::string method;
  int batch_size = 0;
  double auc = 0.0;
  double vlb = 0.0;  // final full-data bound per active location
  double tpr = 0.0;
  double tnr = 0.0;
  double seconds = 0.0;
};

struct AblationConfig {
  OptimizerConfig base;
  std::vector<int> batch_sizes;  // vi-full timing sweep
  McmcEmOptions mcmc;
  bool include_mcmc = true;
};

// Rows: one vi-full per swept batch size, then vi-local, mcmc-full and
// mcmc-local at the base batch size. Convergence stopping is disabled so
// every row runs the same number of epochs and timings stay comparable.
std::vector<AblationRow> ablation_report(const SyntheticScenario& scenario,
                                         const AblationConfig& config);

void write_report_csv(const std::string& path,
                      const std::vector<AblationRow>& rows);
void write_roc_csv(const std::string& path, const RocCurve& curve);

}  // namespace stormvi
