//! Threshold calibration: Monte-Carlo critical constants and the Bartlett
//! long-run variance used to scale the raw-data detector.

mod critical;
mod lrv;

pub use critical::{
    critical_value, simulate_functional, upper_quantile, CriticalEntry, CriticalTable,
    MonteCarloConfig, DEFAULT_GRID, DEFAULT_REPLICATES, DEFAULT_SEED, TABLE_VERSION,
};
pub(crate) use critical::{check_alpha, check_gamma};
pub use lrv::{andrews_bandwidth, bartlett_lrv, LrvEstimate};
