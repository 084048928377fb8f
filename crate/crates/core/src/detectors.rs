//! Page-type CUSUM detectors on forecast errors (mean changes) and on
//! centered squared forecast errors (mean and/or variance changes).
//!
//! With training size `m` and monitored quantity `q_t`,
//!
//! ```text
//! Q(m,k) = sum_{t=m+1}^{m+k} q_t - (k/m) sum_{t=1}^{m} q_t
//! D(m,k) = max_{0<=i<=k} |Q(m,k) - Q(m,i)|
//! ```
//!
//! and monitoring stops at the first `k` with
//! `D(m,k) >= sigma_hat * c_alpha * g(m,k,gamma)`.
//! `D` is maintained in O(1) per step from the running extremes of `Q`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calibration::{bartlett_lrv, check_alpha, check_gamma};
use crate::error::{Error, Result};
use crate::series::ErrorStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    /// Forecast errors.
    Mean,
    /// Squared forecast errors centered at the training mean.
    Variance,
    /// Raw observations.
    RawMean,
    /// Squared raw observations centered at the training mean.
    RawVariance,
}

impl DetectorKind {
    pub fn is_raw(self) -> bool {
        matches!(self, DetectorKind::RawMean | DetectorKind::RawVariance)
    }

    pub fn is_variance(self) -> bool {
        matches!(self, DetectorKind::Variance | DetectorKind::RawVariance)
    }

    /// The raw-data counterpart of this kind.
    pub fn to_raw(self) -> Self {
        match self {
            DetectorKind::Mean | DetectorKind::RawMean => DetectorKind::RawMean,
            DetectorKind::Variance | DetectorKind::RawVariance => DetectorKind::RawVariance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceEstimator {
    IidSd,
    BartlettLrv,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorConfig {
    pub kind: DetectorKind,
    pub gamma: f64,
    pub alpha: f64,
    pub critical_constant: f64,
    pub variance_estimator: VarianceEstimator,
}

impl MonitorConfig {
    /// Config with the default scale estimator for `kind`: sample SD for
    /// forecast errors, Bartlett long-run variance for raw data.
    pub fn new(kind: DetectorKind, gamma: f64, alpha: f64, critical_constant: f64) -> Result<Self> {
        let variance_estimator = if kind.is_raw() {
            VarianceEstimator::BartlettLrv
        } else {
            VarianceEstimator::IidSd
        };
        let cfg = Self {
            kind,
            gamma,
            alpha,
            critical_constant,
            variance_estimator,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_estimator(mut self, estimator: VarianceEstimator) -> Result<Self> {
        self.variance_estimator = estimator;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_gamma(self.gamma)?;
        check_alpha(self.alpha)?;
        if !(self.critical_constant > 0.0 && self.critical_constant.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "critical constant {} must be positive",
                self.critical_constant
            )));
        }
        if self.kind.is_raw() && self.variance_estimator != VarianceEstimator::BartlettLrv {
            return Err(Error::InvalidParameter(
                "raw-data detectors require the Bartlett long-run variance".into(),
            ));
        }
        Ok(())
    }
}

/// Boundary function `g(m,k,gamma) = sqrt(m) (1 + k/m) (k/(k+m))^gamma`.
pub fn weight(m: usize, k: usize, gamma: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidParameter("weight needs m >= 1".into()));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("weight is undefined at k = 0".into()));
    }
    check_gamma(gamma)?;
    Ok(boundary(m, k, gamma))
}

#[inline]
fn boundary(m: usize, k: usize, gamma: f64) -> f64 {
    let (m, k) = (m as f64, k as f64);
    let base = m.sqrt() * (1.0 + k / m);
    if gamma == 0.0 {
        base
    } else {
        base * (k / (k + m)).powf(gamma)
    }
}

/// Incremental detector state. Cheap to copy; `update` is a pure function
/// of the state and the new observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorState {
    pub m: usize,
    /// Sum of the monitored quantity over the training period.
    pub training_sum: f64,
    pub sigma_hat: f64,
    /// Training mean of the raw input; centres the variance kinds.
    pub b_hat: f64,
    pub k: usize,
    pub cum: f64,
    pub q_min: f64,
    pub q_max: f64,
    pub alarmed: bool,
    pub config: MonitorConfig,
}

/// Outcome of one monitoring step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionStep {
    pub k: usize,
    pub detector: f64,
    pub threshold: f64,
    pub alarm: bool,
    /// The detector had already alarmed at an earlier step.
    pub post_alarm: bool,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_sd(x: &[f64]) -> f64 {
    let mu = mean(x);
    let ss: f64 = x.iter().map(|v| (v - mu) * (v - mu)).sum();
    (ss / (x.len() - 1) as f64).sqrt()
}

/// Builds the detector from the training part of `stream`.
pub fn init_detector(stream: &ErrorStream, config: MonitorConfig) -> Result<DetectorState> {
    config.validate()?;
    let training = stream.training();
    let m = training.len();
    let b_hat = mean(training);
    let monitored: Vec<f64> = if config.kind.is_variance() {
        training.iter().map(|e| (e - b_hat) * (e - b_hat)).collect()
    } else {
        training.to_vec()
    };
    let sigma_hat = match config.variance_estimator {
        VarianceEstimator::IidSd => sample_sd(&monitored),
        VarianceEstimator::BartlettLrv => match bartlett_lrv(&monitored) {
            Ok(lrv) => lrv.value.sqrt(),
            Err(Error::DegenerateTraining) => 0.0,
            Err(e) => return Err(e),
        },
    };
    if !(sigma_hat > 0.0 && sigma_hat.is_finite()) {
        return Err(Error::DegenerateTraining);
    }
    Ok(DetectorState {
        m,
        training_sum: monitored.iter().sum(),
        sigma_hat,
        b_hat,
        k: 0,
        cum: 0.0,
        q_min: 0.0,
        q_max: 0.0,
        alarmed: false,
        config,
    })
}

impl DetectorState {
    /// The monitored transform of a new observation.
    pub fn transform(&self, x: f64) -> f64 {
        if self.config.kind.is_variance() {
            (x - self.b_hat) * (x - self.b_hat)
        } else {
            x
        }
    }

    /// Current `D(m,k)`.
    pub fn detector(&self) -> f64 {
        (self.cum - self.q_min).max(self.q_max - self.cum)
    }

    pub fn threshold_at(&self, k: usize) -> f64 {
        self.sigma_hat * self.config.critical_constant * boundary(self.m, k, self.config.gamma)
    }

    /// Returns the successor state and the decision for observation `x`.
    pub fn update(&self, x: f64) -> Result<(DetectorState, DecisionStep)> {
        let mut next = *self;
        let step = next.advance(x)?;
        Ok((next, step))
    }

    /// In-place form of [`DetectorState::update`].
    pub fn advance(&mut self, x: f64) -> Result<DecisionStep> {
        if !x.is_finite() {
            return Err(Error::NonFinite(self.k + 1));
        }
        let drift = self.training_sum / self.m as f64;
        self.k += 1;
        self.cum += self.transform(x) - drift;
        self.q_min = self.q_min.min(self.cum);
        self.q_max = self.q_max.max(self.cum);
        let detector = self.detector();
        let threshold = self.threshold_at(self.k);
        let alarm = detector >= threshold;
        let post_alarm = self.alarmed;
        self.alarmed |= alarm;
        Ok(DecisionStep {
            k: self.k,
            detector,
            threshold,
            alarm,
            post_alarm,
        })
    }
}

/// Full monitoring pass over the Phase II part of a stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorRun {
    pub steps: Vec<DecisionStep>,
    /// First alarmed step (1-based monitoring index).
    pub stop: Option<usize>,
    pub sigma_hat: f64,
    pub config: MonitorConfig,
}

/// Runs the detector over every monitoring observation. Steps after the
/// stopping time are still reported.
pub fn run_monitor(stream: &ErrorStream, config: MonitorConfig) -> Result<MonitorRun> {
    if stream.monitoring().is_empty() {
        return Err(Error::InvalidParameter("no monitoring observations".into()));
    }
    let mut state = init_detector(stream, config)?;
    let mut steps = Vec::with_capacity(stream.monitoring().len());
    let mut stop = None;
    for &x in stream.monitoring() {
        let step = state.advance(x)?;
        if step.alarm && stop.is_none() {
            stop = Some(step.k);
        }
        steps.push(step);
    }
    Ok(MonitorRun {
        steps,
        stop,
        sigma_hat: state.sigma_hat,
        config,
    })
}

/// Stopping time only; skips the step log.
pub fn stopping_time(stream: &ErrorStream, config: MonitorConfig) -> Result<Option<usize>> {
    let mut state = init_detector(stream, config)?;
    for &x in stream.monitoring() {
        if state.advance(x)?.alarm {
            return Ok(Some(state.k));
        }
    }
    Ok(None)
}

/// Step log as CSV with columns `k,detector,threshold,alarm`.
pub fn write_step_log<W: Write>(steps: &[DecisionStep], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["k", "detector", "threshold", "alarm"])?;
    for s in steps {
        w.write_record([
            s.k.to_string(),
            s.detector.to_string(),
            s.threshold.to_string(),
            u8::from(s.alarm).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_step_log(steps: &[DecisionStep], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_step_log(steps, std::io::BufWriter::new(file))
}

/// Mean shift in the forecast errors one step after a raw mean shift
/// `delta_mu` under a correctly specified AR(1) forecaster: `delta_mu (1 - phi)`.
pub fn predicted_error_shift(delta_mu: f64, phi: f64) -> Result<f64> {
    if phi.abs() >= 1.0 {
        return Err(Error::InvalidParameter(format!("|phi| = {} must be < 1", phi.abs())));
    }
    Ok(delta_mu * (1.0 - phi))
}

/// Mean shift in centered squared errors: variance change plus the squared
/// mean shift of the errors.
pub fn predicted_sq_error_shift(var_shift: f64, mean_shift_in_errors: f64) -> f64 {
    var_shift + mean_shift_in_errors * mean_shift_in_errors
}
