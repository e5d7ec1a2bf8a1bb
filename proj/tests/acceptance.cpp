// Release gate: every criterion below prints exactly one PASS/FAIL line and
// the process exit code is the number of failures. Individual criteria can be
// selected by listing their numbers as arguments.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stormvi/elbo.hpp"
#include "stormvi/errors.hpp"
#include "stormvi/eval.hpp"
#include "stormvi/geodata.hpp"
#include "stormvi/inference.hpp"
#include "stormvi/model.hpp"
#include "stormvi/oracle.hpp"
#include "stormvi/rng.hpp"
#include "test_util.hpp"

using namespace stormvi;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmtd(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

double elapsed_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

// ------------------------------------------------------------------ shared

double instance_total(const testutil::Instance& inst) {
  return elbo_location(inst.rec, inst.post, inst.w, inst.variant).total;
}

EdgeWeights jittered_weights(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uni = [&](double a, double b) { return a + (b - a) * u01(rng); };
  EdgeWeights w = scenario_default_weights();
  w.flood_to_bd += uni(-0.15, 0.15);
  w.wind_to_bd += uni(-0.15, 0.15);
  w.leak_to_bd += uni(-0.3, 0.3);
  w.flood_to_obs += uni(-0.1, 0.1);
  w.bd_to_obs += uni(-0.1, 0.1);
  w.leak_to_obs += uni(-0.3, 0.3);
  w.noise_to_obs *= uni(0.8, 1.25);
  w.noise_to_wind *= uni(0.8, 1.25);
  w.noise_to_flood *= uni(0.8, 1.25);
  return w;
}

LocationRecord forward_record(const EdgeWeights& w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  LocationRecord rec;
  rec.wind_prior = u(rng);
  rec.flood_prior = u(rng);
  rec.has_footprint = true;
  rec.dpm = sample_forward(w, rec.wind_prior, rec.flood_prior, rng).y;
  return rec;
}

// Coordinate ascent on one location until the bound stops moving.
double vi_damage_prob(const LocationRecord& rec, const EdgeWeights& w) {
  LocationTable table;
  table.nrows = 1;
  table.ncols = 1;
  table.records = {rec};
  const ActiveSet active = all_active(table);
  std::vector<LocationPosterior> posts = init_posteriors(table, active, w);
  const std::vector<int> positions = {0};
  double prev = full_data_elbo(table, active, posts, w);
  for (int it = 0; it < 300; ++it) {
    e_step(table, active, positions, posts, w, 1);
    const double cur = full_data_elbo(table, active, posts, w);
    if (std::abs(cur - prev) < 1e-12) break;
    prev = cur;
  }
  return posts[0].damage_prob;
}

struct AucPair {
  double model = 0.0;
  double baseline = 0.0;
  int n = 0;
};

AucPair labeled_aucs(const LocationTable& table, const FitResult& fit) {
  std::vector<int> pos_of(table.records.size(), -1);
  for (int k = 0; k < fit.active.size(); ++k) pos_of[fit.active.index[k]] = k;
  const std::vector<double> base = dpm_baseline_scores(table);
  std::vector<double> model_scores, base_scores;
  std::vector<int> labels;
  for (size_t i = 0; i < table.records.size(); ++i) {
    const LocationRecord& rec = table.records[i];
    if (!rec.label) continue;
    const int k = pos_of[i];
    if (k < 0 || fit.active.variant[k] != GraphVariant::Full) continue;
    model_scores.push_back(fit.posteriors[k].damage_prob);
    base_scores.push_back(base[i]);
    labels.push_back(*rec.label);
  }
  AucPair out;
  out.model = roc_curve(model_scores, labels).auc;
  out.baseline = roc_curve(base_scores, labels).auc;
  out.n = static_cast<int>(model_scores.size());
  return out;
}

// ----------------------------------------------------------- criterion 1

Outcome crit_bound_validity() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen = substream(2024, 0, 1);
  double min_slack = 1e300;
  int violations = 0;
  for (int i = 0; i < 200; ++i) {
    const testutil::Instance inst = testutil::random_instance(gen);
    std::mt19937_64 mc_rng = substream(2024, i, 2);
    const testutil::McStats mc =
        testutil::mc_log_joint_gap(inst, 100000, mc_rng);
    const double slack = mc.mean + 3.0 * mc.se - instance_total(inst);
    min_slack = std::min(min_slack, slack);
    if (slack < 0.0) ++violations;
  }
  const double secs = elapsed_since(t0);
  const bool pass = violations == 0 && secs < 120.0;
  return {pass, "bound below sampled objective + 3se on " +
                    std::to_string(200 - violations) +
                    "/200 random instances at 1e5 samples; min slack " +
                    fmtd(min_slack) + " nats in " + fmtd(secs, 3) + "s"};
}

// ----------------------------------------------------------- criterion 2

Outcome crit_gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen = substream(2024, 0, 3);
  std::uniform_int_distribution<int> nbatch(1, 3);
  const double h = 1e-5;
  double max_rel = 0.0;
  for (int point = 0; point < 50; ++point) {
    std::vector<testutil::Instance> insts;
    const int m = nbatch(gen);
    for (int j = 0; j < m; ++j) insts.push_back(testutil::random_instance(gen));
    const EdgeWeights w = insts[0].w;
    std::vector<BatchItem> batch;
    for (const auto& inst : insts)
      batch.push_back({&inst.rec, &inst.post, inst.variant});

    const WeightGradient grad = elbo_gradient(batch, w);
    const auto value_at = [&](const EdgeWeights& wp) {
      double s = 0.0;
      for (const auto& inst : insts)
        s += elbo_location(inst.rec, inst.post, wp, inst.variant).total;
      return s;
    };
    for (int f = 0; f < EdgeWeights::count; ++f) {
      EdgeWeights wp = w, wm = w;
      wp[f] += h;
      wm[f] -= h;
      const double fd = (value_at(wp) - value_at(wm)) / (2.0 * h);
      const double rel = std::abs(grad[f] - fd) /
                         std::max({1.0, std::abs(grad[f]), std::abs(fd)});
      max_rel = std::max(max_rel, rel);
    }
  }
  const double secs = elapsed_since(t0);
  const bool pass = max_rel <= 1e-4 && secs < 60.0;
  return {pass, "analytic vs central-difference gradient at 50 points, all 14 "
                "weights: max rel err " +
                    fmtd(max_rel) + " (limit 1e-4) in " + fmtd(secs, 3) + "s"};
}

// ----------------------------------------------------------- criterion 3

Outcome crit_monotonicity() {
  // (a) every coordinate update improves the per-location bound
  std::mt19937_64 gen = substream(2024, 0, 4);
  double worst_step = 1e300;
  for (int i = 0; i < 100; ++i) {
    testutil::Instance inst = testutil::random_instance(gen, false);
    double before = instance_total(inst);
    const auto record_step = [&] {
      const double after = instance_total(inst);
      worst_step = std::min(worst_step, after - before);
      before = after;
    };
    const MomentPair flood =
        lognormal_moments(inst.post.flood_log_mean, inst.post.flood_log_sd);
    const MomentPair wind =
        lognormal_moments(inst.post.wind_log_mean, inst.post.wind_log_sd);
    inst.post.bound_gamma = update_gamma(flood, wind, inst.w);
    record_step();
    inst.post.damage_prob = update_q_bd(inst.rec, inst.post, inst.w);
    record_step();
    const ContinuousUpdate fu = update_continuous_posterior(
        HazardNode::Flood, inst.rec, inst.post, inst.w);
    inst.post.flood_log_mean = fu.mu;
    inst.post.flood_log_sd = fu.sigma;
    record_step();
    const ContinuousUpdate wu = update_continuous_posterior(
        HazardNode::Wind, inst.rec, inst.post, inst.w);
    inst.post.wind_log_mean = wu.mu;
    inst.post.wind_log_sd = wu.sigma;
    record_step();
  }
  if (worst_step < -1e-10)
    return {false, "a coordinate update lowered the bound by " +
                       fmtd(-worst_step)};

  // (b) full-batch EM keeps the full-data bound non-decreasing
  const SyntheticScenario sc =
      make_scenario(1000, 0.6, scenario_default_weights(), 11);
  OptimizerConfig cfg;
  cfg.rho = 5e-3;
  cfg.batch_size = 1000000;  // clamped to the active count: full batch
  cfg.max_epochs = 50;
  cfg.elbo_rel_tol = 0.0;
  cfg.seed = 11;
  cfg.sweeps = 3;
  cfg.threads = 1;
  const FitResult fit = run_em(sc.table, prune(sc.table), cfg);
  double worst_epoch = 1e300;
  for (size_t k = 1; k < fit.elbo_history.size(); ++k)
    worst_epoch = std::min(worst_epoch, fit.elbo_history[k].second -
                                            fit.elbo_history[k - 1].second);
  const bool pass = worst_epoch >= -1e-6;
  return {pass, "400 coordinate updates (worst step " + fmtd(worst_step) +
                    ") and 50 full-batch epochs on 1000 cells (worst epoch "
                    "delta " +
                    fmtd(worst_epoch) + ", slack 1e-6)"};
}

// ----------------------------------------------------------- criterion 4

Outcome crit_posterior_agreement() {
  std::mt19937_64 gen = substream(2024, 0, 5);
  double max_vi = 0.0, max_mcmc = 0.0;
  int done = 0;
  for (int i = 0; i < 20; ++i) {
    const EdgeWeights w = jittered_weights(gen);
    const LocationRecord rec = forward_record(w, gen);
    BruteForcePosterior bf;
    try {
      bf = brute_force_posterior(rec, w, 150);
    } catch (const NumericError&) {
      bf = brute_force_posterior(rec, w, 200);
    }
    const double q_vi = vi_damage_prob(rec, w);
    std::mt19937_64 chain_rng = substream(4242, i, 77);
    const McmcSummary mc = mcmc_posterior(rec, w, 600000, 30000, chain_rng);
    max_vi = std::max(max_vi, std::abs(q_vi - bf.q_bd));
    max_mcmc = std::max(max_mcmc, std::abs(mc.q_bd - bf.q_bd));
    ++done;
  }
  const bool pass = done == 20 && max_vi < 0.05 && max_mcmc < 0.01;
  return {pass, "damage posterior vs dense integration on 20 single-location "
                "problems: max |vi - exact| " +
                    fmtd(max_vi) + " (limit 0.05), max |mcmc - exact| " +
                    fmtd(max_mcmc) + " (limit 0.01)"};
}

// ----------------------------------------------------------- criterion 5

Outcome crit_detection_beats_baseline() {
  const auto t0 = std::chrono::steady_clock::now();
  const SyntheticScenario sc =
      make_scenario(10000, 0.6, scenario_default_weights(), 5);
  OptimizerConfig cfg;
  cfg.rho = 0.03;
  cfg.batch_size = 256;
  cfg.max_epochs = 120;
  cfg.elbo_rel_tol = 3e-6;
  cfg.seed = 5;
  cfg.sweeps = 3;
  cfg.threads = 1;
  const FitResult fit = run_em(sc.table, prune(sc.table), cfg);
  const AucPair auc = labeled_aucs(sc.table, fit);
  const double secs = elapsed_since(t0);
  const bool pass = auc.model > auc.baseline + 0.03 && auc.model > 0.5 &&
                    secs < 600.0;
  return {pass, "10k cells, 60% footprints: damage AUC " + fmtd(auc.model) +
                    " vs observation baseline " + fmtd(auc.baseline) + " on " +
                    std::to_string(auc.n) + " labeled cells in " +
                    fmtd(secs, 3) + "s"};
}

// ----------------------------------------------------------- criterion 6

Outcome crit_batch_sweep() {
  const auto t0 = std::chrono::steady_clock::now();
  const SyntheticScenario sc =
      make_scenario(50000, 0.6, scenario_default_weights(), 7);
  AblationConfig ac;
  ac.base.rho = 0.03;
  ac.base.batch_size = 256;
  ac.base.max_epochs = 3;
  ac.base.sweeps = 3;
  ac.base.seed = 7;
  ac.base.threads = 1;
  ac.batch_sizes = {128, 256, 512, 1024};
  ac.mcmc.samples = 300;
  ac.mcmc.burn_in = 150;
  const std::vector<AblationRow> rows = ablation_report(sc, ac);

  bool decreasing = true;
  double auc_lo = 1.0, auc_hi = 0.0;
  for (size_t k = 0; k < 4; ++k) {
    if (k > 0 && rows[k].seconds >= rows[k - 1].seconds) decreasing = false;
    auc_lo = std::min(auc_lo, rows[k].auc);
    auc_hi = std::max(auc_hi, rows[k].auc);
  }
  const AblationRow& vi_full = rows[1];    // the base batch size, 256
  const AblationRow& vi_local = rows[4];
  const AblationRow& mcmc_full = rows[5];
  const AblationRow& mcmc_local = rows[6];
  const double secs = elapsed_since(t0);
  const bool pass = decreasing && (auc_hi - auc_lo) <= 0.05 &&
                    vi_full.vlb > mcmc_full.vlb &&
                    vi_local.vlb > mcmc_local.vlb && secs < 1800.0;
  std::string times;
  for (size_t k = 0; k < 4; ++k)
    times += (k ? "/" : "") + fmtd(rows[k].seconds, 3);
  return {pass, "50k cells: epoch-matched times " + times +
                    "s over batches 128/256/512/1024 (strictly "
                    "decreasing: " +
                    (decreasing ? std::string("yes") : std::string("no")) +
                    "), AUC spread " + fmtd(auc_hi - auc_lo) +
                    " (limit 0.05), bound per location vi " +
                    fmtd(vi_full.vlb) + " > mcmc " + fmtd(mcmc_full.vlb) +
                    " and local vi " + fmtd(vi_local.vlb) + " > mcmc " +
                    fmtd(mcmc_local.vlb) + "; total " + fmtd(secs, 3) + "s"};
}

// ----------------------------------------------------------- criterion 7

Outcome crit_pruning_speedup() {
  const SyntheticScenario sc =
      make_scenario(10000, 0.30, scenario_default_weights(), 13);
  OptimizerConfig cfg;
  cfg.rho = 0.03;
  cfg.batch_size = 256;
  cfg.max_epochs = 3;
  cfg.elbo_rel_tol = 0.0;
  cfg.seed = 13;
  cfg.sweeps = 3;
  cfg.threads = 1;
  const FitResult local = run_em(sc.table, prune(sc.table), cfg);
  const FitResult full = run_em(sc.table, all_active(sc.table), cfg);
  const auto per_epoch = [](const FitResult& f) {
    return f.wall_time_seconds /
           static_cast<double>(f.elbo_history.size() - 1);
  };
  const double t_local = per_epoch(local);
  const double t_full = per_epoch(full);
  const AucPair a_local = labeled_aucs(sc.table, local);
  const AucPair a_full = labeled_aucs(sc.table, full);
  const double auc_gap = std::abs(a_local.model - a_full.model);
  const bool pass = t_local * 2.0 <= t_full && auc_gap <= 0.05;
  return {pass, "30% footprints: pruned epochs " + fmtd(t_local, 3) +
                    "s vs full-graph " + fmtd(t_full, 3) + "s (" +
                    fmtd(t_full / t_local, 3) + "x, need >= 2x), AUC " +
                    fmtd(a_local.model) + " vs " + fmtd(a_full.model) +
                    " (gap limit 0.05)"};
}

// ----------------------------------------------------------- criterion 8

Outcome crit_numeric_identities() {
  // lognormal moment identity
  double max_rel = 0.0;
  for (double sigma = 0.05; sigma <= 1.5; sigma += 0.05) {
    for (double mu = -2.0; mu <= 2.0; mu += 0.5) {
      const MomentPair m = lognormal_moments(mu, sigma);
      const double want =
          (std::exp(sigma * sigma) - 1.0) * std::exp(2.0 * mu + sigma * sigma);
      max_rel = std::max(max_rel, std::abs(m.variance() - want) / want);
    }
  }
  if (max_rel > 1e-11)
    return {false, "lognormal variance identity off by rel " + fmtd(max_rel)};

  // the quadratic relaxation touches log(1+e^z) exactly at |z| = gamma
  double max_touch = 0.0;
  for (double gamma = 0.1; gamma <= 8.0; gamma += 0.37) {
    for (const double z : {gamma, -gamma}) {
      max_touch = std::max(max_touch, std::abs(quadratic_bound_log1pexp(
                                          z, gamma) -
                                      log1pexp(z)));
    }
  }
  if (max_touch > 1e-12)
    return {false, "bound not tight at its contact points: " + fmtd(max_touch)};

  // trapezoidal ROC area equals tie-aware pair counting
  std::mt19937_64 gen = substream(2024, 0, 8);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double max_auc_diff = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> s(80);
    std::vector<int> l(80);
    for (int i = 0; i < 80; ++i) {
      s[i] = std::round(u01(gen) * 10.0) / 10.0;
      l[i] = u01(gen) < 0.35;
    }
    l[0] = 0;
    l[1] = 1;
    double wins = 0.0;
    long long pairs = 0;
    for (int i = 0; i < 80; ++i) {
      if (!l[i]) continue;
      for (int j = 0; j < 80; ++j) {
        if (l[j]) continue;
        ++pairs;
        wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
    }
    max_auc_diff = std::max(
        max_auc_diff, std::abs(roc_curve(s, l).auc - wins / pairs));
  }
  const bool pass = max_auc_diff <= 1e-12;
  return {pass, "lognormal identity rel " + fmtd(max_rel) +
                    ", bound contact gap " + fmtd(max_touch) +
                    ", AUC vs pair counting gap " + fmtd(max_auc_diff)};
}

// ----------------------------------------------------------- criterion 9

int run_cli(const std::string& cli, const std::string& args,
            const std::string& log) {
  const std::string cmd = "STORMVI_THREADS=1 '" + cli + "' " + args + " >> '" +
                          log + "' 2>&1";
  const int rc = std::system(cmd.c_str());
  if (rc == -1) return -1;
  if (WIFEXITED(rc)) return WEXITSTATUS(rc);
  return -2;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

Outcome crit_roundtrip_and_pipeline() {
  // (a) serialization is bit-exact over 1000 random rasters
  std::mt19937_64 gen = substream(2024, 0, 9);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_int_distribution<int> dim(1, 12);
  const fs::path dir =
      fs::temp_directory_path() /
      ("stormvi_accept_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string raster_path = (dir / "rt.asc").string();

  long long mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    GridRaster g;
    g.nrows = dim(gen);
    g.ncols = dim(gen);
    g.xllcorner = (u01(gen) - 0.5) * 2e6;
    g.yllcorner = (u01(gen) - 0.5) * 2e6;
    g.cellsize = std::exp((u01(gen) - 0.5) * 8.0);
    const size_t n = static_cast<size_t>(g.nrows) * g.ncols;
    g.values.resize(n);
    for (size_t i = 0; i < n; ++i) {
      const double roll = u01(gen);
      if (roll < 0.08)
        g.values[i] = g.nodata_value;
      else
        g.values[i] = (u01(gen) < 0.5 ? -1.0 : 1.0) *
                      std::exp((u01(gen) - 0.5) * 60.0);
    }
    write_ascii_grid(g, raster_path);
    const GridRaster back = read_ascii_grid(raster_path);
    if (back.nrows != g.nrows || back.ncols != g.ncols ||
        back.values.size() != g.values.size()) {
      ++mismatches;
      continue;
    }
    for (size_t i = 0; i < n; ++i)
      if (std::memcmp(&back.values[i], &g.values[i], sizeof(double)) != 0)
        ++mismatches;
    if (std::memcmp(&back.xllcorner, &g.xllcorner, sizeof(double)) != 0 ||
        std::memcmp(&back.cellsize, &g.cellsize, sizeof(double)) != 0)
      ++mismatches;
  }
  if (mismatches > 0) {
    return {false, "raster round trip lost bits on " +
                       std::to_string(mismatches) + " values"};
  }

  // (b) end-to-end pipeline through the command line, twice, byte-compared
  const char* cli_env = std::getenv("STORMVI_CLI");
  if (!cli_env)
    return {false, "STORMVI_CLI is not set; cannot drive the pipeline"};
  const std::string cli = cli_env;
  const std::string log = (dir / "cli.log").string();
  const fs::path simdir = dir / "sim";

  {
    std::ofstream cfg(dir / "sim.cfg");
    cfg << "n_cells=400\nfootprint_fraction=0.5\n";
  }
  const int rc_sim =
      run_cli(cli, "simulate --config '" + (dir / "sim.cfg").string() +
                       "' --out '" + simdir.string() + "' --seed 21", log);
  if (rc_sim != 0)
    return {false, "simulate exited with " + std::to_string(rc_sim) +
                       "; log at " + log};

  {
    std::ofstream cfg(dir / "infer.cfg");
    cfg << "dpm=" << (simdir / "dpm.asc").string() << "\n"
        << "flood=" << (simdir / "flood_prior.asc").string() << "\n"
        << "wind=" << (simdir / "wind_prior.asc").string() << "\n"
        << "footprint=" << (simdir / "footprint.asc").string() << "\n"
        << "rho=0.03\nmax_epochs=6\nelbo_rel_tol=0\nsweeps=3\n";
  }
  for (const char* run : {"run1", "run2"}) {
    const int rc = run_cli(
        cli, "infer --config '" + (dir / "infer.cfg").string() + "' --out '" +
                 (dir / run).string() + "' --seed 21 --batch-size 64", log);
    if (rc != 0)
      return {false, std::string("infer (") + run + ") exited with " +
                         std::to_string(rc) + "; log at " + log};
  }
  const std::string p1 = slurp(dir / "run1" / "posterior.csv");
  const std::string p2 = slurp(dir / "run2" / "posterior.csv");
  if (p1.empty() || p1 != p2)
    return {false, "repeated fits disagree: posterior files differ (" +
                       std::to_string(p1.size()) + " vs " +
                       std::to_string(p2.size()) + " bytes); kept in " +
                       dir.string()};

  {
    std::ofstream cfg(dir / "eval.cfg");
    cfg << "dpm=" << (simdir / "dpm.asc").string() << "\n"
        << "flood=" << (simdir / "flood_prior.asc").string() << "\n"
        << "wind=" << (simdir / "wind_prior.asc").string() << "\n"
        << "footprint=" << (simdir / "footprint.asc").string() << "\n"
        << "labels=" << (simdir / "labels.csv").string() << "\n"
        << "posterior=" << (dir / "run1" / "posterior.csv").string() << "\n";
  }
  const int rc_eval = run_cli(
      cli, "evaluate --config '" + (dir / "eval.cfg").string() + "' --out '" +
               (dir / "eval").string() + "'", log);
  if (rc_eval != 0)
    return {false, "evaluate exited with " + std::to_string(rc_eval) +
                       "; log at " + log};
  for (const char* name : {"report.csv", "roc_model.csv", "roc_baseline.csv"})
    if (!fs::exists(dir / "eval" / name))
      return {false, std::string("evaluate did not write ") + name};

  std::error_code ec;
  fs::remove_all(dir, ec);
  return {true, "1000 rasters round-trip bit-exactly; simulate/infer/evaluate "
                "pipeline exits 0 with byte-identical repeated posteriors"};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, crit_bound_validity},
      {2, crit_gradient_check},
      {3, crit_monotonicity},
      {4, crit_posterior_agreement},
      {5, crit_detection_beats_baseline},
      {6, crit_batch_sweep},
      {7, crit_pruning_speedup},
      {8, crit_numeric_identities},
      {9, crit_roundtrip_and_pipeline},
  };

  int failures = 0;
  int ran = 0;
  for (const auto& [id, fn] : criteria) {
    if (!wanted.empty() && !wanted.count(id)) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = fn();
    } catch (const std::exception& e) {
      outcome = {false, std::string("unhandled exception: ") + e.what()};
    }
    std::printf("criterion %d: %s - %s (%.1fs)\n", id,
                outcome.pass ? "PASS" : "FAIL", outcome.detail.c_str(),
                elapsed_since(t0));
    std::fflush(stdout);
    if (!outcome.pass) ++failures;
  }
  std::printf("%d of %d criteria passed\n", ran - failures, ran);
  return failures;
}
