//! Bartlett-kernel long-run variance with the Andrews (1991) AR(1)
//! plug-in bandwidth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrvEstimate {
    pub value: f64,
    pub bandwidth: f64,
    pub kernel: String,
}

/// Sample autocovariance at `lag` of already demeaned data, divisor `n`.
pub(crate) fn autocovariance(centered: &[f64], lag: usize) -> f64 {
    let n = centered.len();
    if lag >= n {
        return 0.0;
    }
    centered[lag..]
        .iter()
        .zip(&centered[..n - lag])
        .map(|(a, b)| a * b)
        .sum::<f64>()
        / n as f64
}

/// Andrews' plug-in bandwidth for the Bartlett kernel from an AR(1) fit:
/// `1.1447 * (a1 * n)^(1/3)`, `a1 = 4 rho^2 / ((1 - rho)^2 (1 + rho)^2)`.
pub fn andrews_bandwidth(centered: &[f64]) -> f64 {
    let n = centered.len();
    let num: f64 = centered[1..].iter().zip(centered).map(|(a, b)| a * b).sum();
    let den: f64 = centered[..n - 1].iter().map(|b| b * b).sum();
    if den <= 0.0 {
        return 0.0;
    }
    // keep the plug-in finite for near unit-root fits
    let rho = (num / den).clamp(-0.99, 0.99);
    let a1 = 4.0 * rho * rho / ((1.0 - rho).powi(2) * (1.0 + rho).powi(2));
    1.1447 * (a1 * n as f64).powf(1.0 / 3.0)
}

/// `gamma_0 + 2 * sum_{j=1}^{floor(b)} (1 - j/(b+1)) gamma_j`, floored at 0.
pub fn bartlett_lrv(x: &[f64]) -> Result<LrvEstimate> {
    if x.len() < 8 {
        return Err(Error::InvalidParameter(format!(
            "long-run variance needs at least 8 observations, got {}",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite input to long-run variance".into()));
    }
    let first = x[0];
    if x.iter().all(|&v| v == first) {
        return Err(Error::DegenerateTraining);
    }
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let bandwidth = andrews_bandwidth(&centered);
    let lags = (bandwidth.floor() as usize).min(n - 1);
    let mut value = autocovariance(&centered, 0);
    for j in 1..=lags {
        let w = 1.0 - j as f64 / (bandwidth + 1.0);
        value += 2.0 * w * autocovariance(&centered, j);
    }
    Ok(LrvEstimate {
        value: value.max(0.0),
        bandwidth,
        kernel: "bartlett".to_string(),
    })
}
