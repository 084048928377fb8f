//! Critical constants from the boundary-crossing functional
//! `sup_{0<t<=1} |W(t)| / t^gamma` of a standard Wiener process.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::workers::with_workers;

pub const DEFAULT_REPLICATES: usize = 200_000;
pub const DEFAULT_GRID: usize = 20_000;
pub const DEFAULT_SEED: u64 = 20_220_419;

/// Monte-Carlo settings for the path simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub replicates: usize,
    pub grid: usize,
    pub seed: u64,
    /// Thread count; `None` uses the global pool. Results do not depend on it.
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            replicates: DEFAULT_REPLICATES,
            grid: DEFAULT_GRID,
            seed: DEFAULT_SEED,
            workers: None,
        }
    }
}

impl MonteCarloConfig {
    fn validate(&self) -> Result<()> {
        if self.replicates < 10_000 {
            return Err(Error::InvalidParameter(format!(
                "need at least 10^4 replicates, got {}",
                self.replicates
            )));
        }
        if self.grid < 10_000 {
            return Err(Error::InvalidParameter(format!(
                "need at least 10^4 grid points, got {}",
                self.grid
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..0.5).contains(&gamma) {
        return Err(Error::InvalidParameter(format!("gamma {gamma} not in [0, 0.5)")));
    }
    Ok(())
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha {alpha} not in (0, 1)")));
    }
    Ok(())
}

/// Simulates the sup functional for each `gamma`, returning one sorted
/// sample per gamma. Path `i` draws from ChaCha8 stream `i` of the master
/// seed, so the output is independent of the worker count.
pub fn simulate_functional(gammas: &[f64], mc: &MonteCarloConfig) -> Result<Vec<Vec<f64>>> {
    mc.validate()?;
    for &g in gammas {
        check_gamma(g)?;
    }
    let n = mc.grid;
    let step = (1.0 / n as f64).sqrt();
    // t^-gamma on the grid t = i/n, i = 1..=n; t < 1/grid is never visited
    let weights: Vec<Vec<f64>> = gammas
        .iter()
        .map(|&g| {
            (1..=n)
                .map(|i| if g == 0.0 { 1.0 } else { (i as f64 / n as f64).powf(-g) })
                .collect()
        })
        .collect();

    let per_path: Vec<Vec<f64>> = with_workers(mc.workers, || {
        (0..mc.replicates)
            .into_par_iter()
            .map(|path| {
                let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
                rng.set_stream(path as u64);
                let mut sup = vec![0.0f64; gammas.len()];
                let mut w = 0.0f64;
                for i in 0..n {
                    let z: f64 = rng.sample(StandardNormal);
                    w += step * z;
                    let a = w.abs();
                    for (s, wt) in sup.iter_mut().zip(&weights) {
                        let v = a * wt[i];
                        if v > *s {
                            *s = v;
                        }
                    }
                }
                sup
            })
            .collect()
    })?;

    let mut samples: Vec<Vec<f64>> = (0..gammas.len())
        .map(|g| per_path.iter().map(|p| p[g]).collect())
        .collect();
    for s in &mut samples {
        s.sort_by(f64::total_cmp);
    }
    Ok(samples)
}

/// Empirical `(1 - alpha)` quantile (inverse-CDF definition) of a sorted sample.
pub fn upper_quantile(sorted: &[f64], alpha: f64) -> f64 {
    let n = sorted.len();
    let pos = ((1.0 - alpha) * n as f64 - 1e-9).ceil() as usize;
    sorted[pos.clamp(1, n) - 1]
}

/// Critical constant `c_alpha` for one `(gamma, alpha)` pair.
pub fn critical_value(gamma: f64, alpha: f64, mc: &MonteCarloConfig) -> Result<f64> {
    check_alpha(alpha)?;
    let samples = simulate_functional(&[gamma], mc)?;
    Ok(upper_quantile(&samples[0], alpha))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalEntry {
    pub gamma: f64,
    pub alpha: f64,
    pub c: f64,
    pub replicates: usize,
    pub grid: usize,
    pub seed: u64,
}

/// Versioned table of two-sided critical constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalTable {
    pub version: u32,
    pub entries: Vec<CriticalEntry>,
}

pub const TABLE_VERSION: u32 = 1;

const BUILTIN_TABLE: &str = include_str!("../../data/critical_values.json");

impl CriticalTable {
    /// Simulates every `gamma` once and reads off all requested `alpha`s.
    pub fn compute(gammas: &[f64], alphas: &[f64], mc: &MonteCarloConfig) -> Result<Self> {
        if gammas.is_empty() || alphas.is_empty() {
            return Err(Error::InvalidParameter("empty gamma or alpha list".into()));
        }
        for &a in alphas {
            check_alpha(a)?;
        }
        let samples = simulate_functional(gammas, mc)?;
        let mut entries = Vec::with_capacity(gammas.len() * alphas.len());
        for (&gamma, sample) in gammas.iter().zip(&samples) {
            for &alpha in alphas {
                entries.push(CriticalEntry {
                    gamma,
                    alpha,
                    c: upper_quantile(sample, alpha),
                    replicates: mc.replicates,
                    grid: mc.grid,
                    seed: mc.seed,
                });
            }
        }
        Ok(Self {
            version: TABLE_VERSION,
            entries,
        })
    }

    /// The table shipped with the crate (default Monte-Carlo settings).
    pub fn builtin() -> Self {
        serde_json::from_str(BUILTIN_TABLE).expect("shipped critical-value table is valid JSON")
    }

    pub fn lookup(&self, gamma: f64, alpha: f64) -> Result<f64> {
        self.entries
            .iter()
            .find(|e| (e.gamma - gamma).abs() < 1e-9 && (e.alpha - alpha).abs() < 1e-9)
            .map(|e| e.c)
            .ok_or(Error::MissingTableEntry { gamma, alpha })
    }

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
        let table: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Ok(table)
    }
}
