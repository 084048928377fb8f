use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::detectors::DetectorKind;
use crate::error::{Error, Result};
use crate::forecasters::{is_causal, ArmaSpec};
use crate::series::TimeSeries;

/// Discarded warm-up draws before the observed series.
pub const BURN_IN: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Seasonal {
    None,
    /// Period 12; means at 12 equally spaced points of `amplitude * sin(x)`, `x in [0, pi]`.
    Sine12 { amplitude: f64 },
    /// Period 7; means at 7 equally spaced points of `amplitude * cos(x)`, `x in [0, 2 pi]`.
    Cos7 { amplitude: f64 },
    /// One mean per quarter (or per season, for other lengths).
    QuarterlyDummies { means: Vec<f64> },
}

impl Seasonal {
    pub fn period(&self) -> usize {
        match self {
            Seasonal::None => 1,
            Seasonal::Sine12 { .. } => 12,
            Seasonal::Cos7 { .. } => 7,
            Seasonal::QuarterlyDummies { means } => means.len().max(1),
        }
    }

    pub fn means(&self) -> Vec<f64> {
        let linspace = |n: usize, hi: f64| (0..n).map(move |j| hi * j as f64 / (n - 1) as f64);
        match self {
            Seasonal::None => vec![0.0],
            Seasonal::Sine12 { amplitude } => linspace(12, PI).map(|x| amplitude * x.sin()).collect(),
            Seasonal::Cos7 { amplitude } => linspace(7, 2.0 * PI).map(|x| amplitude * x.cos()).collect(),
            Seasonal::QuarterlyDummies { means } => means.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Change {
    None,
    /// Adds `delta` to every observation after the changepoint.
    MeanShift { delta: f64 },
    /// Adds `beta * t` after the changepoint, `t` counted from the series start.
    TrendOnset { beta: f64 },
    /// Raises the innovation variance by `delta`.
    VarianceShift { delta: f64 },
    /// Replaces the AR coefficients of the noise after the changepoint.
    ArSwitch { phi_post: Vec<f64> },
}

impl Change {
    pub fn is_change(&self) -> bool {
        match self {
            Change::None => false,
            Change::MeanShift { delta } | Change::VarianceShift { delta } => *delta != 0.0,
            Change::TrendOnset { beta } => *beta != 0.0,
            Change::ArSwitch { .. } => true,
        }
    }

    /// Detector matched to the change type.
    pub fn default_kind(&self) -> DetectorKind {
        match self {
            Change::VarianceShift { .. } | Change::ArSwitch { .. } => DetectorKind::Variance,
            _ => DetectorKind::Mean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Innovation {
    Gaussian,
    /// Student-t rescaled to unit variance when `df > 2`.
    StudentT { df: f64 },
}

/// Generative description of one simulation cell. Observations are
/// `y_t = lambda + s_t + u_t (+ change)` for `t = 1..=m+horizon` with ARMA
/// noise `u_t`; the change acts on `t > m + k_star`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: String,
    pub noise: ArmaSpec,
    pub seasonal: Seasonal,
    pub change: Change,
    pub k_star: usize,
    pub m: usize,
    pub horizon: usize,
    pub innovation: Innovation,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        self.noise.validate()?;
        if self.noise.regression.is_some() || self.noise.seasonal_ar.is_some() {
            return bad("scenario noise must be a plain ARMA".into());
        }
        if self.k_star < 1 {
            return bad("k_star must be >= 1".into());
        }
        if self.horizon <= self.k_star {
            return bad(format!("horizon {} must exceed k_star {}", self.horizon, self.k_star));
        }
        if self.m < 2 {
            return bad("training size must be >= 2".into());
        }
        match &self.seasonal {
            Seasonal::QuarterlyDummies { means } if means.is_empty() => {
                return bad("seasonal means must be nonempty".into())
            }
            Seasonal::Sine12 { amplitude } | Seasonal::Cos7 { amplitude } if !amplitude.is_finite() => {
                return bad("seasonal amplitude must be finite".into())
            }
            _ => {}
        }
        match &self.change {
            Change::VarianceShift { delta } if self.noise.sigma2 + delta <= 0.0 => {
                return bad(format!("variance shift {delta} leaves a non-positive variance"))
            }
            Change::ArSwitch { phi_post } if !is_causal(phi_post) => {
                return bad("post-change AR coefficients are not causal".into())
            }
            _ => {}
        }
        if let Innovation::StudentT { df } = self.innovation {
            if !(df > 0.0) {
                return bad(format!("student-t df {df} must be positive"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.m + self.horizon
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let spec: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

/// Simulates one realisation of `spec`; deterministic in `seed`.
pub fn generate_scenario(spec: &ScenarioSpec, seed: u64) -> Result<TimeSeries> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.len();
    let total = BURN_IN + n;
    let change_at = spec.m + spec.k_star; // observations t > change_at are post-change
    let is_post = |i: usize| i >= BURN_IN && (i - BURN_IN + 1) > change_at;

    let t_scale = match spec.innovation {
        Innovation::StudentT { df } if df > 2.0 => ((df - 2.0) / df).sqrt(),
        _ => 1.0,
    };
    let t_dist = match spec.innovation {
        Innovation::StudentT { df } => Some(StudentT::new(df).map_err(|e| Error::InvalidParameter(e.to_string()))?),
        Innovation::Gaussian => None,
    };
    let sd_pre = spec.noise.sigma2.sqrt();
    let sd_post = match spec.change {
        Change::VarianceShift { delta } => (spec.noise.sigma2 + delta).sqrt(),
        _ => sd_pre,
    };
    let phi_post = match &spec.change {
        Change::ArSwitch { phi_post } => phi_post.as_slice(),
        _ => spec.noise.phi.as_slice(),
    };

    let theta = &spec.noise.theta;
    let mut eps = Vec::with_capacity(total);
    let mut u = Vec::with_capacity(total);
    for i in 0..total {
        let z: f64 = match &t_dist {
            Some(d) => rng.sample::<f64, _>(d) * t_scale,
            None => rng.sample(StandardNormal),
        };
        let post = is_post(i);
        let e = z * if post { sd_post } else { sd_pre };
        let phi = if post { phi_post } else { spec.noise.phi.as_slice() };
        let mut v = e;
        for (j, c) in phi.iter().enumerate() {
            if i > j {
                v += c * u[i - 1 - j];
            }
        }
        for (j, c) in theta.iter().enumerate() {
            if i > j {
                v += c * eps[i - 1 - j];
            }
        }
        eps.push(e);
        u.push(v);
    }

    let means = spec.seasonal.means();
    let period = means.len();
    let values: Vec<f64> = (1..=n)
        .map(|t| {
            let mut y = spec.noise.lambda + means[(t - 1) % period] + u[BURN_IN + t - 1];
            if t > change_at {
                match spec.change {
                    Change::MeanShift { delta } => y += delta,
                    Change::TrendOnset { beta } => y += beta * t as f64,
                    _ => {}
                }
            }
            y
        })
        .collect();
    TimeSeries::new(values, spec.seasonal.period())
}

pub const DEFAULT_M: usize = 300;
pub const DEFAULT_HORIZON: usize = 1000;
pub const DEFAULT_K_STAR: usize = 100;
pub const QUARTERLY_MEANS: [f64; 4] = [-2.0, 5.0, 7.0, -10.0];

fn noise(phi: &[f64], theta: &[f64]) -> ArmaSpec {
    ArmaSpec::new(phi.to_vec(), theta.to_vec(), 0.0, 1.0).expect("preset noise is causal and invertible")
}

fn preset(id: String, noise: ArmaSpec, seasonal: Seasonal, change: Change) -> ScenarioSpec {
    ScenarioSpec {
        id,
        noise,
        seasonal,
        change,
        k_star: DEFAULT_K_STAR,
        m: DEFAULT_M,
        horizon: DEFAULT_HORIZON,
        innovation: Innovation::Gaussian,
    }
}

/// i.i.d. N(0,1) observations with no change.
pub fn null_white_noise() -> ScenarioSpec {
    preset("null-white-noise".into(), noise(&[], &[]), Seasonal::None, Change::None)
}

/// ARMA(1,1), phi = -0.8, theta = 0.2, mean shift at t = 400.
pub fn arma11_mean_shift(delta: f64) -> ScenarioSpec {
    preset(
        format!("arma11-mean-shift-{delta}"),
        noise(&[-0.8], &[0.2]),
        Seasonal::None,
        Change::MeanShift { delta },
    )
}

/// ARMA(2,1) noise with phi = (-0.6, 0.3), theta = -0.3 around monthly sine means.
pub fn seasonal_mean_shift(delta: f64) -> ScenarioSpec {
    preset(
        format!("sine12-mean-shift-{delta}"),
        noise(&[-0.6, 0.3], &[-0.3]),
        Seasonal::Sine12 { amplitude: 10.0 },
        Change::MeanShift { delta },
    )
}

/// ARMA(1,1) noise with phi = theta = 0.2 around weekly cosine means.
pub fn seasonal_trend_onset(beta: f64) -> ScenarioSpec {
    preset(
        format!("cos7-trend-{beta}"),
        noise(&[0.2], &[0.2]),
        Seasonal::Cos7 { amplitude: 10.0 },
        Change::TrendOnset { beta },
    )
}

/// AR(1) noise around quarterly means (-2, 5, 7, -10), switching phi.
pub fn quarterly_ar_switch(phi_pre: f64, phi_post: f64) -> ScenarioSpec {
    preset(
        format!("quarterly-ar-{phi_pre}-to-{phi_post}"),
        noise(&[phi_pre], &[]),
        Seasonal::QuarterlyDummies {
            means: QUARTERLY_MEANS.to_vec(),
        },
        Change::ArSwitch {
            phi_post: vec![phi_post],
        },
    )
}
