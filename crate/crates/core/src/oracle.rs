//! Fixed-step numerical integration of the SFR equation.
//!
//! Used as ground truth for every closed form. PFR enters as a pure
//! function of time, so ramp saturation and arbitrary band mixes are
//! handled here without any analytic special-casing.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::SfrSystem;
use crate::trace::{grid_steps, FrequencyTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Method {
    #[default]
    FixedStepRk4,
    ForwardEuler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationSpec {
    pub dt: f64,
    pub t_end: f64,
    pub method: Method,
}

impl IntegrationSpec {
    pub const DEFAULT_DT: f64 = 0.001;
    pub const MAX_DT: f64 = 0.01;

    /// RK4 at the default 1 ms step.
    pub fn rk4(t_end: f64) -> Self {
        Self {
            dt: Self::DEFAULT_DT,
            t_end,
            method: Method::FixedStepRk4,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= Self::MAX_DT) {
            return invalid(format!("integration step must lie in (0, 0.01] s, got {}", self.dt));
        }
        if !(self.t_end >= self.dt && self.t_end.is_finite()) {
            return invalid(format!(
                "integration end time {} must be at least one step {}",
                self.t_end, self.dt
            ));
        }
        Ok(())
    }
}

/// Integrates `dΔf/dt = (p(t) − P_cont − D'·Δf)/2H` from `Δf(0) = 0`.
pub fn integrate<P>(sys: &SfrSystem, pfr: P, spec: &IntegrationSpec) -> Result<FrequencyTrace>
where
    P: Fn(f64) -> f64,
{
    spec.validate()?;
    let n = grid_steps(spec.t_end, spec.dt)?;
    let dt = spec.dt;
    let p_cont = sys.p_cont();
    let d = sys.d_prime();
    let inv_2h = 1.0 / (2.0 * sys.h());
    let rhs = |t: f64, x: f64| (pfr(t) - p_cont - d * x) * inv_2h;

    let mut samples = Vec::with_capacity(n + 1);
    let mut x = 0.0;
    samples.push(x);
    for i in 0..n {
        let t = i as f64 * dt;
        x += match spec.method {
            Method::FixedStepRk4 => {
                let k1 = rhs(t, x);
                let k2 = rhs(t + 0.5 * dt, x + 0.5 * dt * k1);
                let k3 = rhs(t + 0.5 * dt, x + 0.5 * dt * k2);
                let k4 = rhs(t + dt, x + dt * k3);
                dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            }
            Method::ForwardEuler => dt * rhs(t, x),
        };
        samples.push(x);
    }
    FrequencyTrace::new(0.0, dt, samples)
}

/// Extreme sample of a trace: the minimum when the final deviation is
/// non-positive, the maximum otherwise. Ties go to the earliest sample.
pub fn trace_nadir(trace: &FrequencyTrace) -> (f64, f64) {
    let over = trace.samples.last().is_some_and(|v| *v > 0.0);
    let mut best = 0;
    for (i, v) in trace.samples.iter().enumerate() {
        let better = if over {
            *v > trace.samples[best]
        } else {
            *v < trace.samples[best]
        };
        if better {
            best = i;
        }
    }
    (trace.time(best), trace.samples[best])
}
