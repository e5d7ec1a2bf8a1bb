#include "cli.hpp"

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "stormvi/errors.hpp"
#include "stormvi/eval.hpp"
#include "stormvi/geodata.hpp"
#include "stormvi/inference.hpp"
#include "stormvi/oracle.hpp"
#include "stormvi/parallel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace stormvi::cli {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string dpm, flood, wind, footprint, labels, posterior;
  std::string out = "out";
  std::string method = "vi";
  bool prune = true;

  std::uint64_t seed = 0;
  double rho = 1e-2;
  bool rho_decay = false;
  int batch_size = 256;
  int max_epochs = 30;
  double elbo_rel_tol = 1e-5;
  int sweeps = 3;
  std::string estep_scope = "all";
  bool nonneg_causal = true;

  int mcmc_samples = 300;
  int mcmc_burn_in = 150;

  int n_cells = 10000;
  double footprint_fraction = 0.6;
  std::vector<int> batch_sizes = {128, 256, 512, 1024};
  bool include_mcmc = true;
};

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw UsageError(key + ": expected boolean, got '" + v + "'");
}

template <typename T, typename Parse>
T parse_num(const std::string& key, const std::string& v, Parse parse) {
  try {
    size_t used = 0;
    T x = parse(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw UsageError(key + ": cannot parse '" + v + "'");
  }
}

int parse_int(const std::string& key, const std::string& v) {
  return parse_num<int>(key, v,
                        [](const std::string& s, size_t* u) { return std::stoi(s, u); });
}

double parse_double(const std::string& key, const std::string& v) {
  return parse_num<double>(
      key, v, [](const std::string& s, size_t* u) { return std::stod(s, u); });
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  return parse_num<std::uint64_t>(
      key, v, [](const std::string& s, size_t* u) { return std::stoull(s, u); });
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void apply_key(RunConfig& cfg, const std::string& key, const std::string& val) {
  if (key == "dpm") cfg.dpm = val;
  else if (key == "flood") cfg.flood = val;
  else if (key == "wind") cfg.wind = val;
  else if (key == "footprint") cfg.footprint = val;
  else if (key == "labels") cfg.labels = val;
  else if (key == "posterior") cfg.posterior = val;
  else if (key == "out") cfg.out = val;
  else if (key == "method") {
    if (val != "vi" && val != "mcmc")
      throw UsageError("method: expected vi or mcmc, got '" + val + "'");
    cfg.method = val;
  } else if (key == "prune") cfg.prune = parse_bool(key, val);
  else if (key == "seed") cfg.seed = parse_u64(key, val);
  else if (key == "rho") cfg.rho = parse_double(key, val);
  else if (key == "rho_decay") cfg.rho_decay = parse_bool(key, val);
  else if (key == "batch_size") cfg.batch_size = parse_int(key, val);
  else if (key == "max_epochs") cfg.max_epochs = parse_int(key, val);
  else if (key == "elbo_rel_tol") cfg.elbo_rel_tol = parse_double(key, val);
  else if (key == "sweeps") cfg.sweeps = parse_int(key, val);
  else if (key == "estep_scope") {
    if (val != "all" && val != "batch")
      throw UsageError("estep_scope: expected all or batch");
    cfg.estep_scope = val;
  } else if (key == "nonneg_causal") cfg.nonneg_causal = parse_bool(key, val);
  else if (key == "mcmc_samples") cfg.mcmc_samples = parse_int(key, val);
  else if (key == "mcmc_burn_in") cfg.mcmc_burn_in = parse_int(key, val);
  else if (key == "n_cells") cfg.n_cells = parse_int(key, val);
  else if (key == "footprint_fraction")
    cfg.footprint_fraction = parse_double(key, val);
  else if (key == "batch_sizes") {
    cfg.batch_sizes.clear();
    std::stringstream ss(val);
    std::string tok;
    while (std::getline(ss, tok, ','))
      cfg.batch_sizes.push_back(parse_int(key, trim(tok)));
    if (cfg.batch_sizes.empty()) throw UsageError("batch_sizes: empty list");
  } else if (key == "include_mcmc") cfg.include_mcmc = parse_bool(key, val);
  else throw UsageError("unknown config key '" + key + "'");
}

void load_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open config file");
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw UsageError(path + ":" + std::to_string(lineno) +
                       ": expected key=value");
    apply_key(cfg, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
}

struct CommonFlags {
  std::string config, out, method;
  std::uint64_t seed = 0;
  int batch_size = 0;
  bool no_prune = false;
  CLI::Option* o_config = nullptr;
  CLI::Option* o_out = nullptr;
  CLI::Option* o_method = nullptr;
  CLI::Option* o_seed = nullptr;
  CLI::Option* o_batch = nullptr;

  void attach(CLI::App* cmd) {
    o_config = cmd->add_option("--config", config, "key=value config file");
    o_seed = cmd->add_option("--seed", seed, "master RNG seed");
    o_out = cmd->add_option("--out", out, "output directory");
    o_method = cmd->add_option("--method", method, "vi or mcmc")
                   ->check(CLI::IsMember({"vi", "mcmc"}));
    o_batch = cmd->add_option("--batch-size", batch_size, "minibatch size")
                  ->check(CLI::PositiveNumber);
    cmd->add_flag("--no-prune", no_prune, "keep the full graph everywhere");
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (o_config->count()) load_config_file(cfg, config);
    if (o_seed->count()) cfg.seed = seed;
    if (o_out->count()) cfg.out = out;
    if (o_method->count()) cfg.method = method;
    if (o_batch->count()) cfg.batch_size = batch_size;
    if (no_prune) cfg.prune = false;
    return cfg;
  }
};

OptimizerConfig optimizer_config(const RunConfig& cfg) {
  OptimizerConfig oc;
  oc.rho = cfg.rho;
  oc.rho_decay = cfg.rho_decay;
  oc.batch_size = cfg.batch_size;
  oc.max_epochs = cfg.max_epochs;
  oc.elbo_rel_tol = cfg.elbo_rel_tol;
  oc.seed = cfg.seed;
  oc.sweeps = cfg.sweeps;
  oc.estep_scope = cfg.estep_scope == "batch" ? EStepScope::BatchOnly
                                              : EStepScope::AllActive;
  oc.nonneg_causal = cfg.nonneg_causal;
  oc.threads = default_thread_count();
  return oc;
}

std::string path_in(const RunConfig& cfg, const char* name) {
  return (fs::path(cfg.out) / name).string();
}

void require_inputs(const std::vector<std::pair<std::string, std::string>>& in) {
  for (const auto& [what, path] : in) {
    if (path.empty()) throw UsageError("missing required input: " + what);
    if (!fs::exists(path)) throw DataError(path + ": file not found");
  }
}

// Exit code 0 requires that everything we claim to have written parses back.
void verify_outputs(const std::vector<std::string>& paths) {
  for (const std::string& p : paths) {
    if (!fs::exists(p)) throw DataError(p + ": declared output missing");
    if (p.ends_with(".asc")) {
      read_ascii_grid(p);
    } else if (p.ends_with(".json")) {
      std::ifstream in(p);
      try {
        const json parsed = json::parse(in);
        (void)parsed;
      } catch (const json::exception& e) {
        throw DataError(p + ": " + e.what());
      }
    } else {
      std::ifstream in(p);
      std::string header;
      if (!std::getline(in, header) || header.empty())
        throw DataError(p + ": empty or unreadable");
    }
  }
}

json weights_to_json(const EdgeWeights& w) {
  json j;
  for (int i = 0; i < EdgeWeights::count; ++i) j[EdgeWeights::names()[i]] = w[i];
  return j;
}

void write_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError(path + ": cannot open for writing");
  out << j.dump(2) << "\n";
  if (!out.flush()) throw DataError(path + ": write failed");
}

int cmd_simulate(const RunConfig& cfg) {
  const SyntheticScenario sc = make_scenario(
      cfg.n_cells, cfg.footprint_fraction, scenario_default_weights(), cfg.seed);
  fs::create_directories(cfg.out);

  write_ascii_grid(sc.dpm, path_in(cfg, "dpm.asc"));
  write_ascii_grid(sc.flood_prior, path_in(cfg, "flood_prior.asc"));
  write_ascii_grid(sc.wind_prior, path_in(cfg, "wind_prior.asc"));
  write_ascii_grid(sc.footprint, path_in(cfg, "footprint.asc"));

  {
    std::ofstream out(path_in(cfg, "labels.csv"));
    if (!out) throw DataError(path_in(cfg, "labels.csv") + ": cannot open");
    out << "lat,lon,level\n";
    char line[128];
    const LocationTable& t = sc.table;
    int damaged = 0, buildings = 0;
    for (const LocationRecord& r : t.records) {
      if (!r.has_footprint) continue;
      ++buildings;
      const size_t cell = static_cast<size_t>(r.row) * t.ncols + r.col;
      const int level = sc.x_bd[cell] ? 3 : 0;
      damaged += sc.x_bd[cell];
      const double lon = t.xllcorner + (r.col + 0.5) * t.cellsize;
      const double lat = t.yllcorner + (t.nrows - 1 - r.row + 0.5) * t.cellsize;
      std::snprintf(line, sizeof line, "%.17g,%.17g,%d\n", lat, lon, level);
      out << line;
    }
    if (!out.flush()) throw DataError("labels.csv: write failed");

    json manifest;
    manifest["command"] = "simulate";
    manifest["seed"] = cfg.seed;
    manifest["n_cells"] = cfg.n_cells;
    manifest["footprint_fraction"] = cfg.footprint_fraction;
    manifest["nrows"] = sc.dpm.nrows;
    manifest["ncols"] = sc.dpm.ncols;
    manifest["buildings"] = buildings;
    manifest["damage_base_rate"] =
        buildings ? static_cast<double>(damaged) / buildings : 0.0;
    manifest["true_weights"] = weights_to_json(sc.true_weights);
    write_json(manifest, path_in(cfg, "manifest.json"));
  }

  verify_outputs({path_in(cfg, "dpm.asc"), path_in(cfg, "flood_prior.asc"),
                  path_in(cfg, "wind_prior.asc"), path_in(cfg, "footprint.asc"),
                  path_in(cfg, "labels.csv"), path_in(cfg, "manifest.json")});
  return 0;
}

LocationTable load_table(const RunConfig& cfg) {
  require_inputs({{"dpm", cfg.dpm}, {"flood", cfg.flood}, {"wind", cfg.wind}});
  const GridRaster dpm = read_ascii_grid(cfg.dpm);
  GridRaster flood = read_ascii_grid(cfg.flood);
  GridRaster wind = read_ascii_grid(cfg.wind);
  if (!flood.same_geometry(dpm))
    flood = resample_to_grid(flood, dpm, ResampleMethod::Bilinear);
  if (!wind.same_geometry(dpm))
    wind = resample_to_grid(wind, dpm, ResampleMethod::Bilinear);
  GridRaster footprint;
  if (cfg.footprint.empty()) {
    footprint = dpm;
    std::fill(footprint.values.begin(), footprint.values.end(), 1.0);
  } else {
    require_inputs({{"footprint", cfg.footprint}});
    footprint = read_ascii_grid(cfg.footprint);
    if (!footprint.same_geometry(dpm))
      footprint = resample_to_grid(footprint, dpm, ResampleMethod::Nearest);
  }
  return build_location_table(dpm, flood, wind, footprint);
}

void write_posterior_csv(const LocationTable& table, const FitResult& fit,
                         const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError(path + ": cannot open for writing");
  out << "row,col,variant,q_bd,flood_log_mean,flood_log_sd,wind_log_mean,"
         "wind_log_sd\n";
  char line[320];
  for (int k = 0; k < fit.active.size(); ++k) {
    const LocationRecord& rec = table.records[fit.active.index[k]];
    const LocationPosterior& p = fit.posteriors[k];
    if (fit.active.variant[k] == GraphVariant::Full)
      std::snprintf(line, sizeof line,
                    "%d,%d,full,%.17g,%.17g,%.17g,%.17g,%.17g\n", rec.row,
                    rec.col, p.damage_prob, p.flood_log_mean, p.flood_log_sd,
                    p.wind_log_mean, p.wind_log_sd);
    else
      std::snprintf(line, sizeof line, "%d,%d,nobd,,%.17g,%.17g,%.17g,%.17g\n",
                    rec.row, rec.col, p.flood_log_mean, p.flood_log_sd,
                    p.wind_log_mean, p.wind_log_sd);
    out << line;
  }
  if (!out.flush()) throw DataError(path + ": write failed");
}

int cmd_infer(const RunConfig& cfg) {
  const LocationTable table = load_table(cfg);
  const ActiveSet active = cfg.prune ? prune(table) : all_active(table);
  const OptimizerConfig oc = optimizer_config(cfg);

  FitResult fit;
  if (cfg.method == "mcmc") {
    McmcEmOptions mc;
    mc.samples = cfg.mcmc_samples;
    mc.burn_in = cfg.mcmc_burn_in;
    fit = run_mcmc_em(table, active, oc, mc, &std::cerr);
  } else {
    fit = run_em(table, active, oc, &std::cerr);
  }

  fs::create_directories(cfg.out);
  GridRaster q_map, flood_map, wind_map;
  {
    GridRaster proto;
    proto.ncols = table.ncols;
    proto.nrows = table.nrows;
    proto.xllcorner = table.xllcorner;
    proto.yllcorner = table.yllcorner;
    proto.cellsize = table.cellsize;
    proto.nodata_value = -9999.0;
    proto.values.assign(static_cast<size_t>(table.nrows) * table.ncols,
                        proto.nodata_value);
    q_map = proto;
    flood_map = proto;
    wind_map = proto;
  }
  for (int k = 0; k < fit.active.size(); ++k) {
    const LocationRecord& rec = table.records[fit.active.index[k]];
    const LocationPosterior& p = fit.posteriors[k];
    if (fit.active.variant[k] == GraphVariant::Full)
      q_map.at(rec.row, rec.col) = p.damage_prob;
    flood_map.at(rec.row, rec.col) =
        lognormal_moments(p.flood_log_mean, p.flood_log_sd).mean;
    wind_map.at(rec.row, rec.col) =
        lognormal_moments(p.wind_log_mean, p.wind_log_sd).mean;
  }
  write_ascii_grid(q_map, path_in(cfg, "q_bd.asc"));
  write_ascii_grid(flood_map, path_in(cfg, "flood_mean.asc"));
  write_ascii_grid(wind_map, path_in(cfg, "wind_mean.asc"));
  write_posterior_csv(table, fit, path_in(cfg, "posterior.csv"));

  {
    std::ofstream out(path_in(cfg, "elbo_history.csv"));
    if (!out) throw DataError("elbo_history.csv: cannot open");
    out << "epoch,elbo\n";
    char line[64];
    for (const auto& [epoch, elbo] : fit.elbo_history) {
      std::snprintf(line, sizeof line, "%d,%.10g\n", epoch, elbo);
      out << line;
    }
    if (!out.flush()) throw DataError("elbo_history.csv: write failed");
  }

  json manifest;
  manifest["command"] = "infer";
  manifest["method"] = cfg.method;
  manifest["seed"] = cfg.seed;
  manifest["batch_size"] = cfg.batch_size;
  manifest["pruned"] = cfg.prune;
  manifest["active_locations"] = fit.active.size();
  manifest["bd_pruned_locations"] = fit.pruned_count;
  manifest["epochs_run"] =
      static_cast<int>(fit.elbo_history.size()) - 1;
  manifest["converged"] = fit.converged;
  manifest["final_elbo"] = fit.elbo_history.back().second;
  manifest["wall_time_seconds"] = fit.wall_time_seconds;
  manifest["weights"] = weights_to_json(fit.weights);
  write_json(manifest, path_in(cfg, "manifest.json"));

  verify_outputs({path_in(cfg, "q_bd.asc"), path_in(cfg, "flood_mean.asc"),
                  path_in(cfg, "wind_mean.asc"), path_in(cfg, "posterior.csv"),
                  path_in(cfg, "elbo_history.csv"),
                  path_in(cfg, "manifest.json")});
  return 0;
}

int cmd_evaluate(const RunConfig& cfg) {
  if (cfg.labels.empty()) throw UsageError("evaluate requires labels=PATH");
  LocationTable table = load_table(cfg);
  require_inputs({{"labels", cfg.labels}});
  const std::vector<DamageLabel> labels = read_labels_csv(cfg.labels);
  join_labels(table, labels);

  const std::string posterior_path =
      cfg.posterior.empty() ? path_in(cfg, "posterior.csv") : cfg.posterior;
  require_inputs({{"posterior", posterior_path}});

  // (row, col) -> q_bd for rows carrying a damage posterior.
  std::map<std::pair<int, int>, double> q_of;
  {
    std::ifstream in(posterior_path);
    std::string line;
    if (!std::getline(in, line))
      throw DataError(posterior_path + ": empty file");
    int lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string row_s, col_s, variant, q_s;
      std::getline(ss, row_s, ',');
      std::getline(ss, col_s, ',');
      std::getline(ss, variant, ',');
      std::getline(ss, q_s, ',');
      if (variant != "full") continue;
      try {
        q_of[{std::stoi(row_s), std::stoi(col_s)}] = std::stod(q_s);
      } catch (const std::exception&) {
        throw DataError(posterior_path + ":" + std::to_string(lineno) +
                        ": malformed row");
      }
    }
  }

  std::vector<double> model_scores, baseline_scores;
  std::vector<int> y_true;
  const std::vector<double> all_baseline = dpm_baseline_scores(table);
  for (size_t i = 0; i < table.records.size(); ++i) {
    const LocationRecord& rec = table.records[i];
    if (!rec.label) continue;
    const auto it = q_of.find({rec.row, rec.col});
    if (it == q_of.end()) continue;
    model_scores.push_back(it->second);
    baseline_scores.push_back(all_baseline[i]);
    y_true.push_back(*rec.label);
  }
  if (model_scores.empty())
    throw DataError("no labeled cells overlap the posterior map");

  const RocCurve model_roc = roc_curve(model_scores, y_true);
  const RocCurve base_roc = roc_curve(baseline_scores, y_true);
  const double theta_m = youden_threshold(model_roc);
  const double theta_b = youden_threshold(base_roc);
  const auto [tpr_m, tnr_m] = tpr_tnr_at(model_scores, y_true, theta_m);
  const auto [tpr_b, tnr_b] = tpr_tnr_at(baseline_scores, y_true, theta_b);

  fs::create_directories(cfg.out);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<AblationRow> rows(2);
  rows[0] = {"model", 0, model_roc.auc, nan, tpr_m, tnr_m, 0.0};
  rows[1] = {"dpm-baseline", 0, base_roc.auc, nan, tpr_b, tnr_b, 0.0};
  write_report_csv(path_in(cfg, "report.csv"), rows);
  write_roc_csv(path_in(cfg, "roc_model.csv"), model_roc);
  write_roc_csv(path_in(cfg, "roc_baseline.csv"), base_roc);

  verify_outputs({path_in(cfg, "report.csv"), path_in(cfg, "roc_model.csv"),
                  path_in(cfg, "roc_baseline.csv")});
  return 0;
}

int cmd_ablate(const RunConfig& cfg) {
  const SyntheticScenario sc = make_scenario(
      cfg.n_cells, cfg.footprint_fraction, scenario_default_weights(), cfg.seed);
  AblationConfig ac;
  ac.base = optimizer_config(cfg);
  ac.batch_sizes = cfg.batch_sizes;
  ac.mcmc.samples = cfg.mcmc_samples;
  ac.mcmc.burn_in = cfg.mcmc_burn_in;
  ac.include_mcmc = cfg.include_mcmc;
  const std::vector<AblationRow> rows = ablation_report(sc, ac);
  fs::create_directories(cfg.out);
  write_report_csv(path_in(cfg, "ablation.csv"), rows);
  verify_outputs({path_in(cfg, "ablation.csv")});
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Label-free causal inference of building damage from"
               " co-registered hazard rasters"};
  app.require_subcommand(1);

  CLI::App* sim = app.add_subcommand("simulate", "generate a synthetic scene");
  CLI::App* inf = app.add_subcommand("infer", "fit the model and write maps");
  CLI::App* eva = app.add_subcommand("evaluate", "score a fit against labels");
  CLI::App* abl = app.add_subcommand("ablate", "method/batch ablation table");
  CommonFlags f_sim, f_inf, f_eva, f_abl;
  f_sim.attach(sim);
  f_inf.attach(inf);
  f_eva.attach(eva);
  f_abl.attach(abl);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (sim->parsed()) return cmd_simulate(f_sim.resolve());
    if (inf->parsed()) return cmd_infer(f_inf.resolve());
    if (eva->parsed()) return cmd_evaluate(f_eva.resolve());
    return cmd_ablate(f_abl.resolve());
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace stormvi::cli
