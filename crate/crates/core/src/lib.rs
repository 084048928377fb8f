//! Sequential monitoring of forecast errors for changes in mean and
//! variance.
//!
//! A forecaster is fitted once on a training prefix; its one-step-ahead
//! errors are then fed to Page-type CUSUM detectors whose thresholds come
//! from the limit distribution of the monitoring statistic.

pub mod calibration;
pub mod detectors;
pub mod error;
pub mod forecasters;
pub mod series;
pub mod simlab;
pub mod workers;

pub use error::{Error, Result};
