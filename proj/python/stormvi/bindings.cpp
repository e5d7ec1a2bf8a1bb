#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <random>
#include <sstream>

#include "stormvi/elbo.hpp"
#include "stormvi/errors.hpp"
#include "stormvi/eval.hpp"
#include "stormvi/geodata.hpp"
#include "stormvi/inference.hpp"
#include "stormvi/model.hpp"
#include "stormvi/oracle.hpp"

namespace py = pybind11;
using namespace stormvi;

namespace {

std::string weights_repr(const EdgeWeights& w) {
  std::ostringstream out;
  out << "EdgeWeights(";
  for (int i = 0; i < EdgeWeights::count; ++i) {
    if (i) out << ", ";
    out << EdgeWeights::names()[i] << "=" << w[i];
  }
  out << ")";
  return out.str();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() =
      "Variational damage inference over co-registered hazard rasters: "
      "scenario synthesis, VI/MCMC fitting, per-location oracles and "
      "ROC-based evaluation.";

  py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_RuntimeError);

  py::enum_<GraphVariant>(m, "GraphVariant")
      .value("Full", GraphVariant::Full)
      .value("NoBd", GraphVariant::NoBd);

  py::enum_<HazardNode>(m, "HazardNode")
      .value("Wind", HazardNode::Wind)
      .value("Flood", HazardNode::Flood);

  py::enum_<EStepScope>(m, "EStepScope")
      .value("AllActive", EStepScope::AllActive)
      .value("BatchOnly", EStepScope::BatchOnly);

  py::enum_<ResampleMethod>(m, "ResampleMethod")
      .value("Nearest", ResampleMethod::Nearest)
      .value("Bilinear", ResampleMethod::Bilinear);

  py::class_<MomentPair>(m, "MomentPair")
      .def(py::init<>())
      .def_readwrite("mean", &MomentPair::mean)
      .def_readwrite("second_moment", &MomentPair::second_moment)
      .def("variance", &MomentPair::variance)
      .def("valid", &MomentPair::valid);

  py::class_<EdgeWeights>(m, "EdgeWeights")
      .def(py::init<>())
#define X(name) .def_readwrite(#name, &EdgeWeights::name)
      STORMVI_EDGE_WEIGHT_FIELDS(X)
#undef X
      .def("validate", &EdgeWeights::validate)
      .def("__len__", [](const EdgeWeights&) { return EdgeWeights::count; })
      .def("__getitem__",
           [](const EdgeWeights& w, int i) {
             if (i < 0 || i >= EdgeWeights::count)
               throw py::index_error();
             return w[i];
           })
      .def("__setitem__",
           [](EdgeWeights& w, int i, double v) {
             if (i < 0 || i >= EdgeWeights::count)
               throw py::index_error();
             w[i] = v;
           })
      .def_static("names",
                  [] {
                    std::vector<std::string> out;
                    for (const char* n : EdgeWeights::names())
                      out.emplace_back(n);
                    return out;
                  })
      .def("__repr__", &weights_repr);

  py::class_<LocationPosterior>(m, "LocationPosterior")
      .def(py::init<>())
      .def_readwrite("damage_prob", &LocationPosterior::damage_prob)
      .def_readwrite("wind_log_mean", &LocationPosterior::wind_log_mean)
      .def_readwrite("wind_log_sd", &LocationPosterior::wind_log_sd)
      .def_readwrite("flood_log_mean", &LocationPosterior::flood_log_mean)
      .def_readwrite("flood_log_sd", &LocationPosterior::flood_log_sd)
      .def_readwrite("bound_gamma", &LocationPosterior::bound_gamma);

  // scalar helpers
  m.def("log1pexp", &log1pexp, py::arg("z"));
  m.def("sigmoid", &sigmoid, py::arg("z"));
  m.def("jaakkola_g", &jaakkola_g, py::arg("gamma"));
  m.def("quadratic_bound_log1pexp", &quadratic_bound_log1pexp, py::arg("z"),
        py::arg("gamma"));
  m.def("lognormal_moments", &lognormal_moments, py::arg("mu"),
        py::arg("sigma"));

  // ------------------------------ geodata ------------------------------
  py::class_<GridRaster>(m, "GridRaster")
      .def(py::init<>())
      .def_readwrite("ncols", &GridRaster::ncols)
      .def_readwrite("nrows", &GridRaster::nrows)
      .def_readwrite("xllcorner", &GridRaster::xllcorner)
      .def_readwrite("yllcorner", &GridRaster::yllcorner)
      .def_readwrite("cellsize", &GridRaster::cellsize)
      .def_readwrite("nodata_value", &GridRaster::nodata_value)
      .def_readwrite("values", &GridRaster::values)
      .def("at",
           [](const GridRaster& g, int row, int col) {
             if (row < 0 || row >= g.nrows || col < 0 || col >= g.ncols)
               throw py::index_error();
             return g.at(row, col);
           },
           py::arg("row"), py::arg("col"))
      .def("is_nodata", &GridRaster::is_nodata, py::arg("value"))
      .def("same_geometry", &GridRaster::same_geometry, py::arg("other"));

  m.def("read_ascii_grid", &read_ascii_grid, py::arg("path"));
  m.def("write_ascii_grid", &write_ascii_grid, py::arg("raster"),
        py::arg("path"));
  m.def("resample_to_grid", &resample_to_grid, py::arg("src"),
        py::arg("target"), py::arg("method"));

  py::class_<LocationRecord>(m, "LocationRecord")
      .def(py::init<>())
      .def_readwrite("row", &LocationRecord::row)
      .def_readwrite("col", &LocationRecord::col)
      .def_readwrite("dpm", &LocationRecord::dpm)
      .def_readwrite("wind_prior", &LocationRecord::wind_prior)
      .def_readwrite("flood_prior", &LocationRecord::flood_prior)
      .def_readwrite("has_footprint", &LocationRecord::has_footprint)
      .def_readwrite("label", &LocationRecord::label);

  py::class_<LocationTable>(m, "LocationTable")
      .def(py::init<>())
      .def_readwrite("nrows", &LocationTable::nrows)
      .def_readwrite("ncols", &LocationTable::ncols)
      .def_readwrite("xllcorner", &LocationTable::xllcorner)
      .def_readwrite("yllcorner", &LocationTable::yllcorner)
      .def_readwrite("cellsize", &LocationTable::cellsize)
      .def_readwrite("records", &LocationTable::records);

  m.def("build_location_table", &build_location_table, py::arg("dpm"),
        py::arg("flood"), py::arg("wind"), py::arg("footprint"));

  py::class_<DamageLabel>(m, "DamageLabel")
      .def(py::init<>())
      .def_readwrite("lat", &DamageLabel::lat)
      .def_readwrite("lon", &DamageLabel::lon)
      .def_readwrite("level", &DamageLabel::level);

  py::class_<LabelJoinStats>(m, "LabelJoinStats")
      .def_readonly("applied", &LabelJoinStats::applied)
      .def_readonly("out_of_extent", &LabelJoinStats::out_of_extent)
      .def_readonly("unmatched", &LabelJoinStats::unmatched);

  m.def("read_labels_csv", &read_labels_csv, py::arg("path"));
  m.def("join_labels", &join_labels, py::arg("table"), py::arg("labels"));
  m.def("write_location_table_csv", &write_location_table_csv,
        py::arg("table"), py::arg("path"));

  // ------------------------------- elbo --------------------------------
  py::class_<ElboBreakdown>(m, "ElboBreakdown")
      .def_readonly("obs_term", &ElboBreakdown::obs_term)
      .def_readonly("continuous_terms", &ElboBreakdown::continuous_terms)
      .def_readonly("discrete_term_bound", &ElboBreakdown::discrete_term_bound)
      .def_readonly("entropy_term", &ElboBreakdown::entropy_term)
      .def_readonly("dropped_constants", &ElboBreakdown::dropped_constants)
      .def_readonly("total", &ElboBreakdown::total);

  m.def("elbo_location", &elbo_location, py::arg("record"),
        py::arg("posterior"), py::arg("weights"),
        py::arg("variant") = GraphVariant::Full);

  // ----------------------------- inference -----------------------------
  py::class_<OptimizerConfig>(m, "OptimizerConfig")
      .def(py::init<>())
      .def_readwrite("rho", &OptimizerConfig::rho)
      .def_readwrite("rho_decay", &OptimizerConfig::rho_decay)
      .def_readwrite("batch_size", &OptimizerConfig::batch_size)
      .def_readwrite("max_epochs", &OptimizerConfig::max_epochs)
      .def_readwrite("elbo_rel_tol", &OptimizerConfig::elbo_rel_tol)
      .def_readwrite("seed", &OptimizerConfig::seed)
      .def_readwrite("sweeps", &OptimizerConfig::sweeps)
      .def_readwrite("estep_scope", &OptimizerConfig::estep_scope)
      .def_readwrite("nonneg_causal", &OptimizerConfig::nonneg_causal)
      .def_readwrite("threads", &OptimizerConfig::threads);

  py::class_<ActiveSet>(m, "ActiveSet")
      .def(py::init<>())
      .def_readwrite("index", &ActiveSet::index)
      .def_readwrite("variant", &ActiveSet::variant)
      .def_readwrite("bd_pruned", &ActiveSet::bd_pruned)
      .def("size", &ActiveSet::size);

  m.def("prune", &prune, py::arg("table"));
  m.def("all_active", &all_active, py::arg("table"));

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("weights", &FitResult::weights)
      .def_readonly("active", &FitResult::active)
      .def_readonly("posteriors", &FitResult::posteriors)
      .def_readonly("elbo_history", &FitResult::elbo_history)
      .def_readonly("wall_time_seconds", &FitResult::wall_time_seconds)
      .def_readonly("pruned_count", &FitResult::pruned_count)
      .def_readonly("converged", &FitResult::converged)
      .def_readonly("estep_location_updates",
                    &FitResult::estep_location_updates)
      .def_readonly("weight_updates", &FitResult::weight_updates);

  py::class_<McmcEmOptions>(m, "McmcEmOptions")
      .def(py::init<>())
      .def_readwrite("samples", &McmcEmOptions::samples)
      .def_readwrite("burn_in", &McmcEmOptions::burn_in);

  m.def("init_weights",
        py::overload_cast<std::uint64_t>(&init_weights), py::arg("seed"));
  m.def("init_weights",
        py::overload_cast<const LocationTable&, const ActiveSet&,
                          std::uint64_t>(&init_weights),
        py::arg("table"), py::arg("active"), py::arg("seed"));
  m.def("init_posteriors", &init_posteriors, py::arg("table"),
        py::arg("active"), py::arg("weights"));
  m.def("full_data_elbo", &full_data_elbo, py::arg("table"), py::arg("active"),
        py::arg("posteriors"), py::arg("weights"), py::arg("threads") = 1,
        py::call_guard<py::gil_scoped_release>());
  m.def(
      "run_em",
      [](const LocationTable& table, const ActiveSet& active,
         const OptimizerConfig& config) { return run_em(table, active, config); },
      py::arg("table"), py::arg("active"), py::arg("config"),
      py::call_guard<py::gil_scoped_release>());
  m.def(
      "run_mcmc_em",
      [](const LocationTable& table, const ActiveSet& active,
         const OptimizerConfig& config, const McmcEmOptions& mcmc) {
        return run_mcmc_em(table, active, config, mcmc);
      },
      py::arg("table"), py::arg("active"), py::arg("config"), py::arg("mcmc"),
      py::call_guard<py::gil_scoped_release>());

  // ------------------------------ oracle -------------------------------
  py::class_<ForwardSample>(m, "ForwardSample")
      .def_readonly("x_wind", &ForwardSample::x_wind)
      .def_readonly("x_flood", &ForwardSample::x_flood)
      .def_readonly("x_bd", &ForwardSample::x_bd)
      .def_readonly("y", &ForwardSample::y);

  m.def(
      "sample_forward",
      [](const EdgeWeights& weights, double a_wind, double a_flood,
         std::uint64_t seed, bool with_building) {
        std::mt19937_64 rng(seed);
        return sample_forward(weights, a_wind, a_flood, rng, with_building);
      },
      py::arg("weights"), py::arg("a_wind"), py::arg("a_flood"),
      py::arg("seed"), py::arg("with_building") = true);

  m.def("bd_activation_prob", &bd_activation_prob, py::arg("z_mean"),
        py::arg("noise_scale"));

  py::class_<McmcSummary>(m, "McmcSummary")
      .def_readonly("q_bd", &McmcSummary::q_bd)
      .def_readonly("flood_log_mean", &McmcSummary::flood_log_mean)
      .def_readonly("flood_log_sd", &McmcSummary::flood_log_sd)
      .def_readonly("wind_log_mean", &McmcSummary::wind_log_mean)
      .def_readonly("wind_log_sd", &McmcSummary::wind_log_sd)
      .def_readonly("accept_flood", &McmcSummary::accept_flood)
      .def_readonly("accept_wind", &McmcSummary::accept_wind)
      .def_readonly("accept_noise", &McmcSummary::accept_noise)
      .def_readonly("acceptance_warning", &McmcSummary::acceptance_warning);

  m.def(
      "mcmc_posterior",
      [](const LocationRecord& record, const EdgeWeights& weights,
         int n_samples, int burn_in, std::uint64_t seed, GraphVariant variant) {
        std::mt19937_64 rng(seed);
        return mcmc_posterior(record, weights, n_samples, burn_in, rng,
                              variant);
      },
      py::arg("record"), py::arg("weights"), py::arg("n_samples"),
      py::arg("burn_in"), py::arg("seed"),
      py::arg("variant") = GraphVariant::Full,
      py::call_guard<py::gil_scoped_release>());

  py::class_<BruteForcePosterior>(m, "BruteForcePosterior")
      .def_readonly("q_bd", &BruteForcePosterior::q_bd)
      .def_readonly("flood_log_mean", &BruteForcePosterior::flood_log_mean)
      .def_readonly("flood_log_sd", &BruteForcePosterior::flood_log_sd)
      .def_readonly("wind_log_mean", &BruteForcePosterior::wind_log_mean)
      .def_readonly("wind_log_sd", &BruteForcePosterior::wind_log_sd);

  m.def("brute_force_posterior", &brute_force_posterior, py::arg("record"),
        py::arg("weights"), py::arg("grid_size"),
        py::call_guard<py::gil_scoped_release>());

  py::class_<SyntheticScenario>(m, "SyntheticScenario")
      .def_readonly("true_weights", &SyntheticScenario::true_weights)
      .def_readonly("table", &SyntheticScenario::table)
      .def_readonly("dpm", &SyntheticScenario::dpm)
      .def_readonly("flood_prior", &SyntheticScenario::flood_prior)
      .def_readonly("wind_prior", &SyntheticScenario::wind_prior)
      .def_readonly("footprint", &SyntheticScenario::footprint)
      .def_readonly("x_wind", &SyntheticScenario::x_wind)
      .def_readonly("x_flood", &SyntheticScenario::x_flood)
      .def_readonly("x_bd", &SyntheticScenario::x_bd)
      .def_readonly("seed", &SyntheticScenario::seed);

  m.def("scenario_default_weights", &scenario_default_weights);
  m.def("make_scenario", &make_scenario, py::arg("n_cells"),
        py::arg("footprint_fraction"), py::arg("weight_spec"), py::arg("seed"),
        py::call_guard<py::gil_scoped_release>());

  // ------------------------------- eval --------------------------------
  py::class_<RocPoint>(m, "RocPoint")
      .def_readonly("threshold", &RocPoint::threshold)
      .def_readonly("fpr", &RocPoint::fpr)
      .def_readonly("tpr", &RocPoint::tpr);

  py::class_<RocCurve>(m, "RocCurve")
      .def_readonly("points", &RocCurve::points)
      .def_readonly("auc", &RocCurve::auc);

  m.def(
      "roc_curve",
      [](const std::vector<double>& scores, const std::vector<int>& labels) {
        return roc_curve(scores, labels);
      },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "tpr_tnr_at",
      [](const std::vector<double>& scores, const std::vector<int>& labels,
         double threshold) { return tpr_tnr_at(scores, labels, threshold); },
      py::arg("scores"), py::arg("labels"), py::arg("threshold"));
  m.def("youden_threshold", &youden_threshold, py::arg("curve"));
  m.def("dpm_baseline_scores", &dpm_baseline_scores, py::arg("table"));

  py::class_<AblationRow>(m, "AblationRow")
      .def_readonly("method", &AblationRow::method)
      .def_readonly("batch_size", &AblationRow::batch_size)
      .def_readonly("auc", &AblationRow::auc)
      .def_readonly("vlb", &AblationRow::vlb)
      .def_readonly("tpr", &AblationRow::tpr)
      .def_readonly("tnr", &AblationRow::tnr)
      .def_readonly("seconds", &AblationRow::seconds);

  py::class_<AblationConfig>(m, "AblationConfig")
      .def(py::init<>())
      .def_readwrite("base", &AblationConfig::base)
      .def_readwrite("batch_sizes", &AblationConfig::batch_sizes)
      .def_readwrite("mcmc", &AblationConfig::mcmc)
      .def_readwrite("include_mcmc", &AblationConfig::include_mcmc);

  m.def("ablation_report", &ablation_report, py::arg("scenario"),
        py::arg("config"), py::call_guard<py::gil_scoped_release>());
  m.def("write_report_csv", &write_report_csv, py::arg("path"),
        py::arg("rows"));
  m.def("write_roc_csv", &write_roc_csv, py::arg("path"), py::arg("curve"));
}
