//! Small bounded Levenberg–Marquardt solver for problems with a handful of
//! parameters and analytic Jacobians.
//!
//! Bounds are enforced by projecting every trial point back into the box.
//! The damping schedule is fixed, so results are bitwise reproducible.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SfrError};

/// A least-squares problem `min Σ rᵢ(p)²` over `N` parameters.
pub trait LeastSquares<const N: usize> {
    fn residual_count(&self) -> usize;

    /// Fills `r` (length [`Self::residual_count`]).
    fn residuals(&self, params: &[f64; N], r: &mut [f64]);

    /// Fills `r` and the Jacobian rows `jac[i][k] = ∂rᵢ/∂p_k`.
    fn residuals_and_jacobian(&self, params: &[f64; N], r: &mut [f64], jac: &mut [[f64; N]]);

    /// Maps a trial point into the feasible box.
    fn project(&self, params: [f64; N]) -> [f64; N] {
        params
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmSettings {
    pub initial_damping: f64,
    pub damping_factor: f64,
    /// Stop once an accepted step lowers the cost by less than this fraction.
    pub rel_cost_tol: f64,
    /// Budget of trial steps, accepted or rejected.
    pub max_iterations: usize,
}

impl Default for LmSettings {
    fn default() -> Self {
        Self {
            initial_damping: 1e-3,
            damping_factor: 10.0,
            rel_cost_tol: 1e-10,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmReport<const N: usize> {
    pub params: [f64; N],
    /// Sum of squared residuals at `params`.
    pub cost: f64,
    pub iterations: usize,
}

const MAX_DAMPING: f64 = 1e16;

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

pub fn minimize<const N: usize, P: LeastSquares<N>>(
    problem: &P,
    init: [f64; N],
    settings: &LmSettings,
) -> Result<LmReport<N>> {
    let m = problem.residual_count();
    let mut r = vec![0.0; m];
    let mut r_trial = vec![0.0; m];
    let mut jac = vec![[0.0; N]; m];

    let mut params = problem.project(init);
    problem.residuals_and_jacobian(&params, &mut r, &mut jac);
    let mut cost = sum_sq(&r);
    let mut lambda = settings.initial_damping;

    let done = |params, cost, iterations| Ok(LmReport { params, cost, iterations });

    let mut iterations = 0;
    while iterations < settings.max_iterations {
        if cost == 0.0 {
            return done(params, cost, iterations);
        }
        let mut jtj = DMatrix::<f64>::zeros(N, N);
        let mut grad = DVector::<f64>::zeros(N);
        for (row, ri) in jac.iter().zip(&r) {
            for a in 0..N {
                grad[a] += row[a] * ri;
                for b in a..N {
                    jtj[(a, b)] += row[a] * row[b];
                }
            }
        }
        for a in 0..N {
            for b in 0..a {
                jtj[(a, b)] = jtj[(b, a)];
            }
        }
        let max_diag = (0..N).map(|k| jtj[(k, k)]).fold(0.0, f64::max);
        let floor = (max_diag * 1e-12).max(f64::MIN_POSITIVE);

        // Inner loop: raise the damping until a step lowers the cost.
        loop {
            iterations += 1;
            let mut lhs = jtj.clone();
            for k in 0..N {
                lhs[(k, k)] += lambda * jtj[(k, k)].max(floor);
            }
            let step = lhs.lu().solve(&(-&grad));
            let accepted = step.and_then(|step| {
                let mut trial = params;
                for k in 0..N {
                    trial[k] += step[k];
                }
                let trial = problem.project(trial);
                problem.residuals(&trial, &mut r_trial);
                let trial_cost = sum_sq(&r_trial);
                (trial_cost < cost && trial_cost.is_finite()).then_some((trial, trial_cost))
            });
            match accepted {
                Some((trial, trial_cost)) => {
                    let rel = (cost - trial_cost) / cost;
                    params = trial;
                    cost = trial_cost;
                    lambda /= settings.damping_factor;
                    problem.residuals_and_jacobian(&params, &mut r, &mut jac);
                    if rel < settings.rel_cost_tol {
                        return done(params, cost, iterations);
                    }
                    break;
                }
                None => {
                    lambda *= settings.damping_factor;
                    // No descent direction left: stationary point or bound.
                    if lambda > MAX_DAMPING {
                        return done(params, cost, iterations);
                    }
                    if iterations >= settings.max_iterations {
                        break;
                    }
                }
            }
        }
    }
    Err(SfrError::FitFailure {
        iterations,
        best: params.to_vec(),
        cost,
    })
}
