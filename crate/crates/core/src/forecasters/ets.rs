//! Additive-error exponential smoothing: ETS(A,N,N), ETS(A,A,N), ETS(A,N,A).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::optimize::NelderMead;
use super::{FitReport, FittedModel, OrderCandidate};
use crate::error::{Error, Result};
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EtsStructure {
    /// Level only.
    Ann,
    /// Level and additive trend.
    Aan,
    /// Level and additive seasonality.
    Ana,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtsSpec {
    pub structure: EtsStructure,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<usize>,
    pub init_level: f64,
    #[serde(default)]
    pub init_trend: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub init_seasonals: Vec<f64>,
}

impl EtsSpec {
    pub fn ann(alpha: f64, init_level: f64) -> Result<Self> {
        let spec = Self {
            structure: EtsStructure::Ann,
            alpha,
            beta: None,
            gamma_s: None,
            period: None,
            init_level,
            init_trend: 0.0,
            init_seasonals: Vec::new(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha {} not in (0, 1)", self.alpha));
        }
        match self.structure {
            EtsStructure::Ann => {}
            EtsStructure::Aan => match self.beta {
                Some(b) if b > 0.0 && b <= self.alpha => {}
                other => return bad(format!("beta {other:?} not in (0, alpha]")),
            },
            EtsStructure::Ana => {
                match self.gamma_s {
                    Some(g) if g > 0.0 && g < 1.0 - self.alpha => {}
                    other => return bad(format!("gamma {other:?} not in (0, 1 - alpha)")),
                }
                let period = self.period.unwrap_or(0);
                if period < 2 {
                    return bad("seasonal period must be >= 2".into());
                }
                if self.init_seasonals.len() != period {
                    return bad(format!(
                        "{} initial seasonals for period {period}",
                        self.init_seasonals.len()
                    ));
                }
                let sum: f64 = self.init_seasonals.iter().sum();
                let scale: f64 = self.init_seasonals.iter().map(|s| s.abs()).sum::<f64>() + 1.0;
                if sum.abs() > 1e-9 * scale {
                    return bad(format!("initial seasonals sum to {sum}, expected 0"));
                }
            }
        }
        Ok(())
    }
}

/// Smoothed states; `season` indexes the seasonal term of the next target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtsState {
    pub level: f64,
    pub trend: f64,
    pub seasonals: Vec<f64>,
    pub season: usize,
}

impl EtsState {
    pub fn initial(model: &EtsSpec) -> Self {
        Self {
            level: model.init_level,
            trend: model.init_trend,
            seasonals: model.init_seasonals.clone(),
            season: 0,
        }
    }

    pub fn forecast(&self) -> f64 {
        self.level + self.trend + self.seasonals.get(self.season).copied().unwrap_or(0.0)
    }
}

/// Error-correction update after observing `last_error` for the forecast
/// made from `state`; returns the next forecast and the updated state.
pub fn ets_one_step(model: &EtsSpec, state: &EtsState, last_error: f64) -> (f64, EtsState) {
    let mut s = state.clone();
    s.level += s.trend + model.alpha * last_error;
    if let Some(beta) = model.beta {
        s.trend += beta * last_error;
    }
    if let (Some(g), false) = (model.gamma_s, s.seasonals.is_empty()) {
        s.seasonals[s.season] += g * last_error;
        s.season = (s.season + 1) % s.seasonals.len();
    }
    (s.forecast(), s)
}

/// One-step forecasts for `t = 0..=n` starting from the model's initial state.
pub fn ets_forecasts(model: &EtsSpec, y: &[f64]) -> Vec<f64> {
    let mut state = EtsState::initial(model);
    let mut out = Vec::with_capacity(y.len() + 1);
    let mut f = state.forecast();
    for &v in y {
        out.push(f);
        let (next, s) = ets_one_step(model, &state, v - f);
        f = next;
        state = s;
    }
    out.push(f);
    out
}

/// Expected forecast error `s` steps after a mean shift `delta` in a level-`lambda`
/// series monitored by ETS(A,N,N) with smoothing `alpha`:
/// `delta` at `s = 1`, and for `s >= 2`
/// `(lambda + delta)(1 - sum_{i=0}^{s-2} alpha (1-alpha)^i) - lambda (alpha (1-alpha)^{s-1} - (1-alpha)^s)`.
pub fn ann_shift_error_expectation(alpha: f64, lambda: f64, delta: f64, s: usize) -> f64 {
    assert!(s >= 1, "steps after the change start at 1");
    if s == 1 {
        return delta;
    }
    let partial: f64 = (0..=s - 2).map(|i| alpha * (1.0 - alpha).powi(i as i32)).sum();
    (lambda + delta) * (1.0 - partial)
        - lambda * (alpha * (1.0 - alpha).powi(s as i32 - 1) - (1.0 - alpha).powi(s as i32))
}

const EPS: f64 = 1e-4;

/// Fits smoothing parameters by Nelder-Mead on the in-sample one-step SSE
/// from `alpha = 0.3`, `beta = 0.1`, `gamma = 0.1`. Initial states enter
/// the errors linearly, so they are solved by least squares at every
/// candidate.
pub fn ets_fit(series: &TimeSeries, structure: EtsStructure) -> Result<FitReport> {
    let y = series.values();
    let period = match structure {
        EtsStructure::Ana => {
            let p = series.frequency();
            if p < 2 {
                return Err(Error::InvalidParameter(
                    "ETS(A,N,A) needs a seasonal frequency >= 2".into(),
                ));
            }
            if y.len() < 3 * p {
                return Err(Error::InsufficientHistory {
                    needed: 3 * p,
                    have: y.len(),
                });
            }
            Some(p)
        }
        _ => {
            if y.len() < 10 {
                return Err(Error::InsufficientHistory {
                    needed: 10,
                    have: y.len(),
                });
            }
            None
        }
    };

    let start: Vec<f64> = match structure {
        EtsStructure::Ann => vec![0.3],
        EtsStructure::Aan => vec![0.3, 0.1],
        EtsStructure::Ana => vec![0.3, 0.1],
    };
    let objective = |x: &[f64]| -> f64 {
        match smoothing_spec(structure, x, period) {
            Some(spec) => profile_initial_states(&spec, y).map_or(f64::INFINITY, |(_, sse)| sse),
            None => f64::INFINITY,
        }
    };
    let min = NelderMead {
        initial_step: 0.1,
        max_iterations: 1000,
        ..Default::default()
    }
    .minimize(objective, &start);
    let spec = smoothing_spec(structure, &min.x, period).ok_or(Error::NoConvergence)?;
    let (spec, sse) = profile_initial_states(&spec, y).ok_or(Error::RankDeficient)?;
    let n = y.len() as f64;
    let free = start.len() + init_dimension(structure, period);
    let aic = n * (sse / n).max(f64::MIN_POSITIVE).ln() + 2.0 * free as f64;
    Ok(FitReport {
        model: FittedModel::Ets(spec),
        aic,
        sse,
        n_obs: y.len(),
        converged: min.converged,
        orders_searched: vec![OrderCandidate {
            p: 0,
            q: 0,
            aic: Some(aic),
            converged: min.converged,
        }],
    })
}

fn smoothing_spec(structure: EtsStructure, x: &[f64], period: Option<usize>) -> Option<EtsSpec> {
    let alpha = x[0];
    if !(EPS..=1.0 - EPS).contains(&alpha) {
        return None;
    }
    let mut spec = EtsSpec {
        structure,
        alpha,
        beta: None,
        gamma_s: None,
        period,
        init_level: 0.0,
        init_trend: 0.0,
        init_seasonals: period.map(|p| vec![0.0; p]).unwrap_or_default(),
    };
    match structure {
        EtsStructure::Ann => {}
        EtsStructure::Aan => {
            if !(EPS..=alpha).contains(&x[1]) {
                return None;
            }
            spec.beta = Some(x[1]);
        }
        EtsStructure::Ana => {
            if !(EPS..=1.0 - alpha - EPS).contains(&x[1]) {
                return None;
            }
            spec.gamma_s = Some(x[1]);
        }
    }
    Some(spec)
}

fn init_dimension(structure: EtsStructure, period: Option<usize>) -> usize {
    match structure {
        EtsStructure::Ann => 1,
        EtsStructure::Aan => 2,
        EtsStructure::Ana => period.unwrap_or(1),
    }
}

fn errors(spec: &EtsSpec, y: &[f64]) -> Vec<f64> {
    let f = ets_forecasts(spec, y);
    y.iter().zip(&f).map(|(v, f)| v - f).collect()
}

/// Least-squares initial states for fixed smoothing parameters. Seasonal
/// initial states are constrained to sum to zero.
fn profile_initial_states(spec: &EtsSpec, y: &[f64]) -> Option<(EtsSpec, f64)> {
    let n = y.len();
    let period = spec.period.unwrap_or(0);
    let base = errors(spec, y);
    let zeros = vec![0.0; n];

    let mut basis: Vec<EtsSpec> = Vec::new();
    let unit = |f: &dyn Fn(&mut EtsSpec)| {
        let mut s = spec.clone();
        f(&mut s);
        s
    };
    basis.push(unit(&|s| s.init_level = 1.0));
    if spec.structure == EtsStructure::Aan {
        basis.push(unit(&|s| s.init_trend = 1.0));
    }
    if spec.structure == EtsStructure::Ana {
        for j in 0..period - 1 {
            basis.push(unit(&|s| {
                s.init_seasonals[j] = 1.0;
                s.init_seasonals[period - 1] = -1.0;
            }));
        }
    }
    let k = basis.len();
    let cols: Vec<Vec<f64>> = basis.iter().map(|b| errors(b, &zeros)).collect();
    // minimise |base + J x|^2
    let j = DMatrix::from_fn(n, k, |r, c| cols[c][r]);
    let rhs = -DVector::from_column_slice(&base);
    let jt = j.transpose();
    let chol = (&jt * &j).cholesky()?;
    let x = chol.solve(&(&jt * rhs));

    let mut fitted = spec.clone();
    fitted.init_level = x[0];
    let mut idx = 1;
    if spec.structure == EtsStructure::Aan {
        fitted.init_trend = x[idx];
        idx += 1;
    }
    if spec.structure == EtsStructure::Ana {
        let free: Vec<f64> = x.iter().skip(idx).copied().collect();
        let last = -free.iter().sum::<f64>();
        fitted.init_seasonals = free.into_iter().chain(std::iter::once(last)).collect();
    }
    let sse = errors(&fitted, y).iter().map(|e| e * e).sum();
    Some((fitted, sse))
}
