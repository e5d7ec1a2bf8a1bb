"""Variational damage inference over co-registered hazard rasters.

The heavy lifting lives in the compiled ``_core`` extension; this package
re-exports its public surface. A typical session::

    import stormvi

    scenario = stormvi.make_scenario(2500, 0.6, stormvi.scenario_default_weights(), 7)
    active = stormvi.prune(scenario.table)
    cfg = stormvi.OptimizerConfig()
    fit = stormvi.run_em(scenario.table, active, cfg)
"""

from ._core import (
    ActiveSet,
    AblationConfig,
    AblationRow,
    BruteForcePosterior,
    DamageLabel,
    DataError,
    EStepScope,
    EdgeWeights,
    ElboBreakdown,
    FitResult,
    ForwardSample,
    GraphVariant,
    GridRaster,
    HazardNode,
    LabelJoinStats,
    LocationPosterior,
    LocationRecord,
    LocationTable,
    McmcEmOptions,
    McmcSummary,
    MomentPair,
    NumericError,
    OptimizerConfig,
    ResampleMethod,
    RocCurve,
    RocPoint,
    SyntheticScenario,
    ablation_report,
    all_active,
    bd_activation_prob,
    brute_force_posterior,
    build_location_table,
    dpm_baseline_scores,
    elbo_location,
    full_data_elbo,
    init_posteriors,
    init_weights,
    jaakkola_g,
    join_labels,
    log1pexp,
    lognormal_moments,
    make_scenario,
    mcmc_posterior,
    prune,
    quadratic_bound_log1pexp,
    read_ascii_grid,
    read_labels_csv,
    resample_to_grid,
    roc_curve,
    run_em,
    run_mcmc_em,
    sample_forward,
    scenario_default_weights,
    sigmoid,
    tpr_tnr_at,
    write_ascii_grid,
    write_location_table_csv,
    write_report_csv,
    write_roc_csv,
    youden_threshold,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
