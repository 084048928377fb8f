//! Regression with ARMA errors:
//! `phi(B) (1 - Phi B^s) (Y_t - lambda - x_t' beta) = theta(B) eps_t`,
//! fitted by conditional sum of squares with AIC order selection.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::optimize::{roots_outside_radius, roots_outside_unit_circle, NelderMead};
use super::{FitReport, FittedModel, OrderCandidate};
use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Deterministic regressors besides the intercept: seasonal dummies for
/// seasons `1..period` (season 0 is absorbed by the intercept) and an
/// optional linear trend `t + 1`. `t` is the 0-based position in the series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub seasonal_period: Option<usize>,
    pub trend: bool,
}

impl DesignSpec {
    pub fn seasonal(period: usize) -> Self {
        Self {
            seasonal_period: Some(period),
            trend: false,
        }
    }

    pub fn ncols(&self) -> usize {
        self.seasonal_period.map_or(0, |s| s.saturating_sub(1)) + usize::from(self.trend)
    }

    fn fill_row(&self, t: usize, row: &mut [f64]) {
        let mut c = 0;
        if let Some(s) = self.seasonal_period {
            for j in 1..s {
                row[c] = if t % s == j { 1.0 } else { 0.0 };
                c += 1;
            }
        }
        if self.trend {
            row[c] = (t + 1) as f64;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    pub design: DesignSpec,
    pub coefficients: Vec<f64>,
}

/// Multiplicative seasonal AR factor `(1 - coefficient B^period)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeasonalAr {
    pub coefficient: f64,
    pub period: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaSpec {
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub lambda: f64,
    pub sigma2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regression: Option<Regression>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seasonal_ar: Option<SeasonalAr>,
}

impl ArmaSpec {
    /// Plain ARMA(p,q) around a constant mean.
    pub fn new(phi: Vec<f64>, theta: Vec<f64>, lambda: f64, sigma2: f64) -> Result<Self> {
        let spec = Self {
            phi,
            theta,
            lambda,
            sigma2,
            regression: None,
            seasonal_ar: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn p(&self) -> usize {
        self.phi.len()
    }

    pub fn q(&self) -> usize {
        self.theta.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma2 {} must be positive", self.sigma2)));
        }
        if !self.lambda.is_finite() {
            return Err(Error::InvalidParameter("lambda must be finite".into()));
        }
        if !is_causal(&self.phi) {
            return Err(Error::InvalidParameter("AR polynomial is not causal".into()));
        }
        if !is_invertible(&self.theta) {
            return Err(Error::NotInvertible);
        }
        if let Some(sar) = self.seasonal_ar {
            if sar.period < 2 || !(sar.coefficient.abs() < 1.0 / (1.0 + 1e-8)) {
                return Err(Error::InvalidParameter("seasonal AR term is not causal".into()));
            }
        }
        if let Some(reg) = &self.regression {
            if reg.coefficients.len() != reg.design.ncols() {
                return Err(Error::InvalidParameter(format!(
                    "{} regression coefficients for {} design columns",
                    reg.coefficients.len(),
                    reg.design.ncols()
                )));
            }
        }
        Ok(())
    }

    /// Coefficients `a_j` of the full AR operator `1 - sum_j a_j B^j`.
    pub fn ar_expanded(&self) -> Vec<f64> {
        expand_ar(&self.phi, self.seasonal_ar)
    }

    /// Deterministic mean at 0-based position `t`.
    pub fn mean_at(&self, t: usize) -> f64 {
        let mut mu = self.lambda;
        if let Some(reg) = &self.regression {
            let mut row = vec![0.0; reg.design.ncols()];
            reg.design.fill_row(t, &mut row);
            mu += row.iter().zip(&reg.coefficients).map(|(x, b)| x * b).sum::<f64>();
        }
        mu
    }

    /// One-step-ahead forecasts `yhat_t` for `t = 0..=n`; the last entry
    /// forecasts the observation after `y`. Positions before the AR order
    /// are forecast by the deterministic mean, and residuals before the
    /// sample start are zero.
    pub fn one_step_forecasts(&self, y: &[f64]) -> Vec<f64> {
        let a = self.ar_expanded();
        let start = a.len();
        let n = y.len();
        let mean: Vec<f64> = (0..=n).map(|t| self.mean_at(t)).collect();
        let w: Vec<f64> = y.iter().zip(&mean).map(|(v, m)| v - m).collect();
        let mut resid = vec![0.0; n];
        let mut out = Vec::with_capacity(n + 1);
        for t in 0..=n {
            let w_hat = if t < start {
                0.0
            } else {
                let ar: f64 = a.iter().enumerate().map(|(j, c)| c * w[t - 1 - j]).sum();
                let ma: f64 = self
                    .theta
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i < t)
                    .map(|(i, c)| c * resid[t - 1 - i])
                    .sum();
                ar + ma
            };
            if t < n && t >= start {
                resid[t] = w[t] - w_hat;
            }
            out.push(mean[t] + w_hat);
        }
        out
    }
}

fn expand_ar(phi: &[f64], seasonal: Option<SeasonalAr>) -> Vec<f64> {
    // work with 1 - sum a_j z^j as a coefficient vector c with c_0 = 1
    let mut c = vec![1.0];
    c.extend(phi.iter().map(|p| -p));
    if let Some(sar) = seasonal {
        let mut out = vec![0.0; c.len() + sar.period];
        for (i, ci) in c.iter().enumerate() {
            out[i] += ci;
            out[i + sar.period] -= ci * sar.coefficient;
        }
        c = out;
    }
    while c.len() > 1 && c[c.len() - 1] == 0.0 {
        c.pop();
    }
    c[1..].iter().map(|v| -v).collect()
}

pub fn is_causal(phi: &[f64]) -> bool {
    let c: Vec<f64> = phi.iter().map(|p| -p).collect();
    roots_outside_unit_circle(&c)
}

pub fn is_invertible(theta: &[f64]) -> bool {
    roots_outside_unit_circle(theta)
}

/// Fitted cells with an AR or MA root inside this modulus are discarded:
/// a near-unit AR root cancelling a near-unit MA root leaves the intercept
/// unidentified.
const MIN_ROOT_MODULUS: f64 = 1.01;

fn well_separated(spec: &ArmaSpec) -> bool {
    let ar: Vec<f64> = spec.phi.iter().map(|p| -p).collect();
    roots_outside_radius(&ar, MIN_ROOT_MODULUS)
        && roots_outside_radius(&spec.theta, MIN_ROOT_MODULUS)
        && spec
            .seasonal_ar
            .as_ref()
            .is_none_or(|s| s.coefficient.abs() < 1.0 / MIN_ROOT_MODULUS)
}

/// `E[Y_n | y_0..y_{n-1}]` for the next position after `history`.
pub fn arma_one_step(model: &ArmaSpec, history: &TimeSeries) -> Result<f64> {
    model.validate()?;
    let needed = model.ar_expanded().len().max(model.q());
    if history.len() < needed {
        return Err(Error::InsufficientHistory {
            needed,
            have: history.len(),
        });
    }
    Ok(*model
        .one_step_forecasts(history.values())
        .last()
        .expect("forecast vector has n + 1 entries"))
}

/// Mean shift in the innovations after a shift `delta` in the ARMA mean:
/// `delta (1 - sum phi_j) sum_l psi_l`, with `psi` the power series of
/// `1 / theta(z)` summed until a full window of terms is below `1e-12`.
pub fn aue_shift_formula(delta: f64, phi: &[f64], theta: &[f64]) -> Result<f64> {
    let theta_one = 1.0 + theta.iter().sum::<f64>();
    if theta_one.abs() < 1e-12 {
        return Err(Error::NotInvertible);
    }
    let q = theta.len();
    let mut psi: Vec<f64> = vec![1.0];
    let mut total = 1.0;
    let window = q.max(1);
    const MAX_TERMS: usize = 1_000_000;
    loop {
        let l = psi.len();
        let next: f64 = -(1..=q.min(l)).map(|i| theta[i - 1] * psi[l - i]).sum::<f64>();
        if !next.is_finite() || l > MAX_TERMS {
            return Err(Error::NotInvertible);
        }
        psi.push(next);
        total += next;
        if psi.len() > window && psi[psi.len() - window..].iter().all(|v| v.abs() < 1e-12) {
            break;
        }
    }
    let ar_sum: f64 = phi.iter().sum();
    Ok(delta * (1.0 - ar_sum) * total)
}

/// Search settings for [`arma_fit_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmaFitOptions {
    pub max_p: usize,
    pub max_q: usize,
    pub design: Option<DesignSpec>,
    /// Period of an extra multiplicative seasonal AR(1) factor.
    pub seasonal_ar_period: Option<usize>,
}

impl Default for ArmaFitOptions {
    fn default() -> Self {
        Self {
            max_p: 2,
            max_q: 2,
            design: None,
            seasonal_ar_period: None,
        }
    }
}

/// Grid search over `(p, q)` with CSS estimation; see [`arma_fit_with`].
pub fn arma_fit(
    series: &TimeSeries,
    max_p: usize,
    max_q: usize,
    regressors: Option<DesignSpec>,
) -> Result<FitReport> {
    arma_fit_with(
        series,
        &ArmaFitOptions {
            max_p,
            max_q,
            design: regressors,
            seasonal_ar_period: None,
        },
    )
}

/// Fits every `(p, q)` in `[0, max_p] x [0, max_q]` by conditional sum of
/// squares and returns the converged cell with the smallest
/// `n log(SSE/n) + 2 k` among those whose AR and MA roots all lie outside
/// modulus 1.01.
///
/// The intercept and regression coefficients are profiled out by least
/// squares at every ARMA parameter value, so the simplex only searches the
/// ARMA coefficients. All cells condition on the same number of leading
/// observations so their AICs share one `n`.
pub fn arma_fit_with(series: &TimeSeries, opts: &ArmaFitOptions) -> Result<FitReport> {
    let y = series.values();
    let problem = CssProblem::new(y, opts)?;

    let mut searched = Vec::new();
    let mut best: Option<(f64, ArmaSpec, f64)> = None;
    for p in 0..=opts.max_p {
        for q in 0..=opts.max_q {
            let n_params = p + q + usize::from(opts.seasonal_ar_period.is_some()) + problem.ncols + 1;
            if problem.n_eff <= n_params {
                searched.push(OrderCandidate {
                    p,
                    q,
                    aic: None,
                    converged: false,
                });
                continue;
            }
            let fit = problem.fit_cell(p, q);
            let ok = fit
                .as_ref()
                .filter(|f| f.converged && f.spec.validate().is_ok() && well_separated(&f.spec) && f.sse > 0.0);
            let aic = ok.map(|f| {
                let n = problem.n_eff as f64;
                n * (f.sse / n).ln() + 2.0 * n_params as f64
            });
            searched.push(OrderCandidate {
                p,
                q,
                aic,
                converged: ok.is_some(),
            });
            if let (Some(f), Some(aic)) = (ok, aic) {
                if best.as_ref().is_none_or(|(b, _, _)| aic < *b) {
                    best = Some((aic, f.spec.clone(), f.sse));
                }
            }
        }
    }
    let (aic, spec, sse) = best.ok_or(Error::NoConvergence)?;
    Ok(FitReport {
        model: FittedModel::Arma(spec),
        aic,
        sse,
        n_obs: problem.n_eff,
        converged: true,
        orders_searched: searched,
    })
}

struct CellFit {
    spec: ArmaSpec,
    sse: f64,
    converged: bool,
}

struct CssProblem<'a> {
    y: &'a [f64],
    /// Intercept followed by the design columns, column-major.
    columns: Vec<Vec<f64>>,
    ncols: usize,
    start: usize,
    n_eff: usize,
    design: Option<DesignSpec>,
    seasonal_period: Option<usize>,
}

impl<'a> CssProblem<'a> {
    fn new(y: &'a [f64], opts: &ArmaFitOptions) -> Result<Self> {
        let n = y.len();
        let design_cols = opts.design.map_or(0, |d| d.ncols());
        let mut columns = vec![vec![1.0; n]];
        if let Some(d) = opts.design {
            let mut row = vec![0.0; design_cols];
            let mut cols = vec![Vec::with_capacity(n); design_cols];
            for t in 0..n {
                d.fill_row(t, &mut row);
                for (c, v) in cols.iter_mut().zip(&row) {
                    c.push(*v);
                }
            }
            columns.extend(cols);
        }
        if let Some(s) = opts.seasonal_ar_period {
            if s < 2 {
                return Err(Error::InvalidParameter("seasonal AR period must be >= 2".into()));
            }
        }
        let start = opts.max_p + opts.seasonal_ar_period.unwrap_or(0);
        if n <= start + columns.len() {
            return Err(Error::InsufficientHistory {
                needed: start + columns.len() + 1,
                have: n,
            });
        }
        let problem = Self {
            y,
            ncols: design_cols,
            columns,
            start,
            n_eff: n - start,
            design: opts.design,
            seasonal_period: opts.seasonal_ar_period,
        };
        // deterministic part alone must be identifiable and leave variance
        let (_, sse) = problem
            .profile(&[], &[], None)
            .ok_or(Error::RankDeficient)?;
        let scale: f64 = y[start..].iter().map(|v| v * v).sum::<f64>() + 1.0;
        if sse <= 1e-12 * scale {
            return Err(Error::RankDeficient);
        }
        Ok(problem)
    }

    /// CSS residual filter applied to one column; zero before `start`.
    fn filter(&self, w: &[f64], ar: &[f64], theta: &[f64], out: &mut [f64]) {
        for v in out[..self.start].iter_mut() {
            *v = 0.0;
        }
        for t in self.start..w.len() {
            let mut r = w[t];
            for (j, a) in ar.iter().enumerate() {
                r -= a * w[t - 1 - j];
            }
            for (i, th) in theta.iter().enumerate() {
                if t > i {
                    r -= th * out[t - 1 - i];
                }
            }
            out[t] = r;
        }
    }

    /// Least-squares regression coefficients and SSE at fixed ARMA values.
    fn profile(&self, phi: &[f64], theta: &[f64], sar: Option<f64>) -> Option<(Vec<f64>, f64)> {
        let ar = expand_ar(
            phi,
            sar.zip(self.seasonal_period)
                .map(|(coefficient, period)| SeasonalAr { coefficient, period }),
        );
        let n = self.y.len();
        let k = self.columns.len();
        let mut fy = vec![0.0; n];
        self.filter(self.y, &ar, theta, &mut fy);
        let mut fx = vec![vec![0.0; n]; k];
        for (c, out) in self.columns.iter().zip(fx.iter_mut()) {
            self.filter(c, &ar, theta, out);
        }
        let rows = self.start..n;
        let mut xtx = DMatrix::<f64>::zeros(k, k);
        let mut xty = DVector::<f64>::zeros(k);
        for i in 0..k {
            for j in i..k {
                let v: f64 = rows.clone().map(|t| fx[i][t] * fx[j][t]).sum();
                xtx[(i, j)] = v;
                xtx[(j, i)] = v;
            }
            xty[i] = rows.clone().map(|t| fx[i][t] * fy[t]).sum();
        }
        let diag_max = (0..k).map(|i| xtx[(i, i)]).fold(0.0, f64::max);
        let chol = xtx.clone().cholesky()?;
        let l = chol.l();
        if (0..k).any(|i| l[(i, i)] * l[(i, i)] <= 1e-10 * diag_max) {
            return None;
        }
        let beta = chol.solve(&xty);
        let sse: f64 = rows
            .map(|t| {
                let fit: f64 = (0..k).map(|c| beta[c] * fx[c][t]).sum();
                (fy[t] - fit).powi(2)
            })
            .sum();
        Some((beta.iter().copied().collect(), sse))
    }

    fn objective(&self, params: &[f64], p: usize, q: usize) -> f64 {
        let (phi, rest) = params.split_at(p);
        let (theta, sar) = rest.split_at(q);
        let sar = sar.first().copied();
        if !is_causal(phi) || !is_invertible(theta) {
            return f64::INFINITY;
        }
        if sar.is_some_and(|s| s.abs() >= 1.0 / (1.0 + 1e-8)) {
            return f64::INFINITY;
        }
        self.profile(phi, theta, sar)
            .map_or(f64::INFINITY, |(_, sse)| sse)
    }

    fn fit_cell(&self, p: usize, q: usize) -> Option<CellFit> {
        let dim = p + q + usize::from(self.seasonal_period.is_some());
        let start = vec![0.1; dim];
        let nm = NelderMead {
            max_iterations: 500 * dim.max(1),
            ..Default::default()
        };
        let min = nm.minimize(|x| self.objective(x, p, q), &start);
        if !min.value.is_finite() {
            return None;
        }
        let (phi, rest) = min.x.split_at(p);
        let (theta, sar) = rest.split_at(q);
        let sar = sar.first().copied();
        let (beta, sse) = self.profile(phi, theta, sar)?;
        let spec = ArmaSpec {
            phi: phi.to_vec(),
            theta: theta.to_vec(),
            lambda: beta[0],
            sigma2: sse / self.n_eff as f64,
            regression: self.design.map(|design| Regression {
                design,
                coefficients: beta[1..].to_vec(),
            }),
            seasonal_ar: sar
                .zip(self.seasonal_period)
                .map(|(coefficient, period)| SeasonalAr { coefficient, period }),
        };
        Some(CellFit {
            spec,
            sse,
            converged: min.converged,
        })
    }
}
