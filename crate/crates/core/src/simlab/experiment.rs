use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::{generate_scenario, ScenarioSpec};
use crate::detectors::{stopping_time, DetectorKind, MonitorConfig};
use crate::error::{Error, Result};
use crate::forecasters::{fit_and_generate, ArmaFitOptions, DesignSpec, EtsStructure, ForecasterChoice};
use crate::series::{ErrorStream, Origin, SplitSpec};
use crate::workers::{derive_seed, with_workers};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodLabel {
    RawCusum,
    ArmaForecastErrors,
    EtsForecastErrors,
}

impl MethodLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            MethodLabel::RawCusum => "raw-cusum",
            MethodLabel::ArmaForecastErrors => "arma-forecast-errors",
            MethodLabel::EtsForecastErrors => "ets-forecast-errors",
        }
    }
}

/// A monitoring method: raw data with a long-run-variance scale, or the
/// errors of a forecaster fitted on the training prefix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub label: MethodLabel,
    /// `Mean` or `Variance`; raw methods use the raw counterpart.
    pub detector_kind: DetectorKind,
    pub forecaster: Option<ForecasterChoice>,
}

impl MethodSpec {
    pub fn raw_cusum(kind: DetectorKind) -> Self {
        Self {
            label: MethodLabel::RawCusum,
            detector_kind: kind.to_raw(),
            forecaster: None,
        }
    }

    /// ARMA(p<=2, q<=2) with seasonal dummies when `period > 1`.
    pub fn arma(kind: DetectorKind, period: usize) -> Self {
        Self {
            label: MethodLabel::ArmaForecastErrors,
            detector_kind: kind,
            forecaster: Some(ForecasterChoice::Arma(ArmaFitOptions {
                design: (period > 1).then(|| DesignSpec::seasonal(period)),
                ..Default::default()
            })),
        }
    }

    /// ETS(A,N,A) for seasonal data, ETS(A,N,N) otherwise.
    pub fn ets(kind: DetectorKind, period: usize) -> Self {
        let structure = if period > 1 { EtsStructure::Ana } else { EtsStructure::Ann };
        Self {
            label: MethodLabel::EtsForecastErrors,
            detector_kind: kind,
            forecaster: Some(ForecasterChoice::Ets { structure }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let raw = self.label == MethodLabel::RawCusum;
        if raw != self.detector_kind.is_raw() || raw != self.forecaster.is_none() {
            return Err(Error::InvalidParameter(format!(
                "method {} inconsistent with detector {:?}",
                self.label.as_str(),
                self.detector_kind
            )));
        }
        Ok(())
    }
}

/// Threshold settings shared by every replicate of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorSettings {
    pub gamma: f64,
    pub alpha: f64,
    pub critical_constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub seed: u64,
    /// First alarm, in monitoring steps.
    pub stop: Option<usize>,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub scenario: String,
    pub method: MethodLabel,
    pub detector: DetectorKind,
    pub replicates: usize,
    pub failures: usize,
    pub k_star: usize,
    pub horizon: usize,
    pub has_change: bool,
    /// Mean delay over stops after the change; `None` without such stops
    /// or without a change.
    pub add: Option<f64>,
    /// Standard error of `add`; needs at least two delays.
    pub add_se: Option<f64>,
    /// Fraction of non-failed replicates that alarmed within the horizon.
    pub dp: f64,
    /// Fraction that alarmed at or before the change (every alarm, when
    /// there is no change).
    pub fdp: f64,
    pub records: Vec<ReplicateRecord>,
}

impl ExperimentResult {
    /// Aggregates per-replicate records into the cell metrics.
    pub fn from_records(
        scenario: String,
        method: MethodLabel,
        detector: DetectorKind,
        k_star: usize,
        horizon: usize,
        has_change: bool,
        records: Vec<ReplicateRecord>,
    ) -> Self {
        let ok: Vec<&ReplicateRecord> = records.iter().filter(|r| !r.failed).collect();
        let failures = records.len() - ok.len();
        let effective = ok.len();
        let stops: Vec<usize> = ok
            .iter()
            .filter_map(|r| r.stop)
            .filter(|&s| s <= horizon)
            .collect();
        let false_alarms = stops
            .iter()
            .filter(|&&s| !has_change || s <= k_star)
            .count();
        let delays: Vec<f64> = if has_change {
            stops
                .iter()
                .filter(|&&s| s > k_star)
                .map(|&s| (s - k_star) as f64)
                .collect()
        } else {
            Vec::new()
        };
        let rate = |count: usize| if effective == 0 { 0.0 } else { count as f64 / effective as f64 };
        let add = (!delays.is_empty()).then(|| delays.iter().sum::<f64>() / delays.len() as f64);
        let add_se = add.filter(|_| delays.len() >= 2).map(|mean| {
            let var = delays.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (delays.len() - 1) as f64;
            (var / delays.len() as f64).sqrt()
        });
        Self {
            scenario,
            method,
            detector,
            replicates: records.len(),
            failures,
            k_star,
            horizon,
            has_change,
            add,
            add_se,
            dp: rate(stops.len()),
            fdp: rate(false_alarms),
            records,
        }
    }
}

/// Stopping time of one replicate; `Err` marks a failed fit or degenerate
/// training.
pub fn run_replicate(
    spec: &ScenarioSpec,
    method: &MethodSpec,
    settings: &MonitorSettings,
    seed: u64,
) -> Result<Option<usize>> {
    let series = generate_scenario(spec, seed)?;
    let stream = match &method.forecaster {
        None => ErrorStream::new(series.values().to_vec(), spec.m, Origin::ExternallySupplied)?,
        Some(choice) => fit_and_generate(&series, choice, SplitSpec::Count(spec.m))?.1,
    };
    let config = MonitorConfig::new(
        method.detector_kind,
        settings.gamma,
        settings.alpha,
        settings.critical_constant,
    )?;
    stopping_time(&stream, config)
}

/// Runs `replicates` independent replicates of one (scenario, method) cell.
/// Replicate `r` uses seed `derive_seed(master_seed, r)`, so the output does
/// not depend on `workers`.
pub fn run_cell(
    spec: &ScenarioSpec,
    method: &MethodSpec,
    settings: &MonitorSettings,
    replicates: usize,
    master_seed: u64,
    workers: Option<usize>,
) -> Result<ExperimentResult> {
    if replicates == 0 {
        return Err(Error::InvalidParameter("need at least one replicate".into()));
    }
    spec.validate()?;
    method.validate()?;
    MonitorConfig::new(method.detector_kind, settings.gamma, settings.alpha, settings.critical_constant)?;
    let records: Vec<ReplicateRecord> = with_workers(workers, || {
        (0..replicates)
            .into_par_iter()
            .map(|r| {
                let seed = derive_seed(master_seed, r as u64);
                let outcome = run_replicate(spec, method, settings, seed);
                ReplicateRecord {
                    replicate: r,
                    seed,
                    stop: outcome.as_ref().ok().copied().flatten(),
                    failed: outcome.is_err(),
                }
            })
            .collect()
    })?;
    Ok(ExperimentResult::from_records(
        spec.id.clone(),
        method.label,
        method.detector_kind,
        spec.k_star,
        spec.horizon,
        spec.change.is_change(),
        records,
    ))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

pub const RESULT_COLUMNS: [&str; 9] = [
    "scenario", "method", "detector", "ADD", "ADD_se", "DP", "FDP", "R", "failures",
];

/// Path of the JSON sidecar written next to a results CSV.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes one CSV row per result plus a JSON sidecar holding every
/// per-replicate record. Undefined ADD/ADD_se are written as `NA`.
pub fn export_results(results: &[ExperimentResult], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESULT_COLUMNS)?;
    for r in results {
        w.write_record([
            r.scenario.clone(),
            r.method.as_str().to_string(),
            serde_json::to_value(r.detector)?
                .as_str()
                .unwrap_or_default()
                .to_string(),
            fmt_opt(r.add),
            fmt_opt(r.add_se),
            r.dp.to_string(),
            r.fdp.to_string(),
            r.replicates.to_string(),
            r.failures.to_string(),
        ])?;
    }
    w.flush()?;
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(results)? + "\n")?;
    Ok(())
}

pub fn load_sidecar(path: &Path) -> Result<Vec<ExperimentResult>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Plain-text ADD/DP/FDP table; ADD carries a +/- 2 standard error band.
pub fn format_table(results: &[ExperimentResult]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<32} {:<22} {:>18} {:>7} {:>7} {:>6} {:>5}",
        "scenario", "method", "ADD (+/- 2se)", "DP", "FDP", "R", "fail"
    );
    for r in results {
        let add = match (r.add, r.add_se) {
            (Some(a), Some(se)) => format!("{a:.2} +/- {:.2}", 2.0 * se),
            (Some(a), None) => format!("{a:.2} (se NA)"),
            _ => "NA".to_string(),
        };
        let _ = writeln!(
            out,
            "{:<32} {:<22} {:>18} {:>7.3} {:>7.3} {:>6} {:>5}",
            r.scenario,
            r.method.as_str(),
            add,
            r.dp,
            r.fdp,
            r.replicates,
            r.failures
        );
    }
    out
}
