//! One-step-ahead forecasting backends and forecast-error generation.

mod arma;
mod ets;
pub mod optimize;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use arma::{
    arma_fit, arma_fit_with, arma_one_step, aue_shift_formula, is_causal, is_invertible,
    ArmaFitOptions, ArmaSpec, DesignSpec, Regression, SeasonalAr,
};
pub use ets::{
    ann_shift_error_expectation, ets_fit, ets_forecasts, ets_one_step, EtsSpec, EtsState,
    EtsStructure,
};

use crate::error::{Error, Result};
use crate::series::{ErrorStream, Origin, SplitSpec, TimeSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum FittedModel {
    Arma(ArmaSpec),
    Ets(EtsSpec),
}

impl FittedModel {
    /// Forecasts for positions `0..=n` of `y`; see the per-family docs.
    pub fn one_step_forecasts(&self, y: &[f64]) -> Vec<f64> {
        match self {
            FittedModel::Arma(m) => m.one_step_forecasts(y),
            FittedModel::Ets(m) => ets_forecasts(m, y),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderCandidate {
    pub p: usize,
    pub q: usize,
    pub aic: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: FittedModel,
    pub aic: f64,
    /// In-sample one-step sum of squared errors.
    pub sse: f64,
    /// Number of errors entering `sse`.
    pub n_obs: usize,
    pub converged: bool,
    pub orders_searched: Vec<OrderCandidate>,
}

impl FitReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Which forecaster to fit on the training prefix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ForecasterChoice {
    Arma(ArmaFitOptions),
    Ets { structure: EtsStructure },
}

impl ForecasterChoice {
    pub fn fit(&self, series: &TimeSeries) -> Result<FitReport> {
        match self {
            ForecasterChoice::Arma(opts) => arma_fit_with(series, opts),
            ForecasterChoice::Ets { structure } => ets_fit(series, *structure),
        }
    }
}

/// Errors `e_t = y_t - yhat_t(1)` of a frozen model over the whole series.
pub fn generate_error_stream(
    series: &TimeSeries,
    report: &FitReport,
    split: SplitSpec,
) -> Result<ErrorStream> {
    let m = split.resolve(series.len())?;
    let y = series.values();
    let forecasts = report.model.one_step_forecasts(y);
    let errors = y.iter().zip(&forecasts).map(|(v, f)| v - f).collect();
    ErrorStream::new(errors, m, Origin::ModelGenerated)
}

/// Fits `choice` on the first `m` observations only, then emits the error
/// stream of the frozen model for the full series.
pub fn fit_and_generate(
    series: &TimeSeries,
    choice: &ForecasterChoice,
    split: SplitSpec,
) -> Result<(FitReport, ErrorStream)> {
    let m = split.resolve(series.len())?;
    let report = choice.fit(&series.prefix(m)?)?;
    let stream = generate_error_stream(series, &report, SplitSpec::Count(m))?;
    Ok((report, stream))
}
