//! Scenario generators and the replicate harness measuring average
//! detection delay (ADD), detection probability (DP) and false detection
//! probability (FDP).

mod experiment;
mod scenario;

pub use experiment::{
    export_results, format_table, load_sidecar, run_cell, run_replicate, sidecar_path,
    ExperimentResult, MethodLabel, MethodSpec, MonitorSettings, ReplicateRecord, RESULT_COLUMNS,
};
pub use scenario::{
    arma11_mean_shift, generate_scenario, null_white_noise, quarterly_ar_switch,
    seasonal_mean_shift, seasonal_trend_onset, Change, Innovation, ScenarioSpec, Seasonal,
    BURN_IN, DEFAULT_HORIZON, DEFAULT_K_STAR, DEFAULT_M, QUARTERLY_MEANS,
};
