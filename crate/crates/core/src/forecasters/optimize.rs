//! Derivative-free minimisation used by the model fits.

use nalgebra::DMatrix;

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct NelderMead {
    pub initial_step: f64,
    pub max_iterations: usize,
    /// Stop when the spread of simplex values falls below
    /// `f_tol * (|f_best| + f_tol)`.
    pub f_tol: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            initial_step: 0.1,
            max_iterations: 2000,
            f_tol: 1e-10,
        }
    }
}

impl NelderMead {
    /// Minimises `f` from `start`. `f` may return `f64::INFINITY` to mark
    /// infeasible points; the start itself must be feasible.
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, start: &[f64]) -> Minimum {
        let dim = start.len();
        if dim == 0 {
            let value = f(start);
            return Minimum {
                x: Vec::new(),
                value,
                iterations: 0,
                converged: value.is_finite(),
            };
        }
        let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
        for i in 0..dim {
            let mut v = start.to_vec();
            v[i] += self.initial_step;
            // step back inside if the forward vertex is infeasible
            if !f(&v).is_finite() {
                v[i] = start[i] - self.initial_step;
            }
            simplex.push(v);
        }
        let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

        let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
        let mut converged = false;
        let mut iterations = 0;
        while iterations < self.max_iterations {
            iterations += 1;
            let mut order: Vec<usize> = (0..=dim).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            let best = values[0];
            let worst = values[dim];
            if worst.is_finite() && worst - best <= self.f_tol * (best.abs() + self.f_tol) {
                converged = true;
                break;
            }

            let mut centroid = vec![0.0; dim];
            for v in &simplex[..dim] {
                for (c, x) in centroid.iter_mut().zip(v) {
                    *c += x / dim as f64;
                }
            }
            let along = |coef: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[dim])
                    .map(|(c, w)| c + coef * (c - w))
                    .collect()
            };

            let reflected = along(alpha);
            let fr = f(&reflected);
            if fr < values[0] {
                let expanded = along(gamma);
                let fe = f(&expanded);
                if fe < fr {
                    simplex[dim] = expanded;
                    values[dim] = fe;
                } else {
                    simplex[dim] = reflected;
                    values[dim] = fr;
                }
                continue;
            }
            if fr < values[dim - 1] {
                simplex[dim] = reflected;
                values[dim] = fr;
                continue;
            }
            let contracted = if fr < values[dim] { along(rho) } else { along(-rho) };
            let fc = f(&contracted);
            if fc < values[dim].min(fr) {
                simplex[dim] = contracted;
                values[dim] = fc;
                continue;
            }
            let anchor = simplex[0].clone();
            for i in 1..=dim {
                for (x, a) in simplex[i].iter_mut().zip(&anchor) {
                    *x = a + sigma * (*x - a);
                }
                values[i] = f(&simplex[i]);
            }
        }
        let best = (0..=dim)
            .min_by(|&a, &b| values[a].total_cmp(&values[b]))
            .unwrap_or(0);
        Minimum {
            x: simplex[best].clone(),
            value: values[best],
            iterations,
            converged,
        }
    }
}

/// True when every root of `1 + c_1 z + ... + c_p z^p` has modulus greater
/// than `1 + 1e-8`.
pub fn roots_outside_unit_circle(coeffs: &[f64]) -> bool {
    roots_outside_radius(coeffs, 1.0 + 1e-8)
}

/// True when every root of `1 + c_1 z + ... + c_p z^p` has modulus greater
/// than `radius`.
pub fn roots_outside_radius(coeffs: &[f64], radius: f64) -> bool {
    let limit = 1.0 / radius;
    let p = match coeffs.iter().rposition(|&c| c != 0.0) {
        None => return true,
        Some(i) => i + 1,
    };
    if coeffs[..p].iter().any(|c| !c.is_finite()) {
        return false;
    }
    if p == 1 {
        return coeffs[0].abs() < limit;
    }
    if p == 2 {
        // reciprocal roots solve z^2 + c1 z + c2 = 0
        let (b, c) = (coeffs[0], coeffs[1]);
        let disc = b * b - 4.0 * c;
        let max_modulus = if disc >= 0.0 {
            let s = disc.sqrt();
            ((-b + s) / 2.0).abs().max(((-b - s) / 2.0).abs())
        } else {
            c.abs().sqrt()
        };
        return max_modulus < limit;
    }
    // eigenvalues of the companion matrix are the reciprocal roots
    let mut companion = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        companion[(0, j)] = -coeffs[j];
    }
    for i in 1..p {
        companion[(i, i - 1)] = 1.0;
    }
    companion
        .complex_eigenvalues()
        .iter()
        .all(|z| z.norm() < limit)
}
