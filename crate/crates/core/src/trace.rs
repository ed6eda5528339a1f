use std::io::{self, Write};

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::format::fmt_sig;

/// Hard cap on samples in one trace (about 800 MB of f64).
pub const MAX_SAMPLES: usize = 100_000_000;

/// Δf samples on a uniform time grid starting at `t0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyTrace {
    pub t0: f64,
    pub dt: f64,
    pub samples: Vec<f64>,
}

impl FrequencyTrace {
    pub fn new(t0: f64, dt: f64, samples: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return invalid(format!("trace step must be positive, got {dt}"));
        }
        if samples.is_empty() {
            return invalid("trace must contain at least one sample");
        }
        Ok(Self { t0, dt, samples })
    }

    /// Samples `f` at `t = t0 + i·dt` for `i = 0..=n` with `n = round(t_end/dt)`.
    pub fn sample<F: FnMut(f64) -> f64>(t_end: f64, dt: f64, mut f: F) -> Result<Self> {
        let n = grid_steps(t_end, dt)?;
        let samples = (0..=n).map(|i| f(i as f64 * dt)).collect();
        Self::new(0.0, dt, samples)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(|i| self.time(i))
    }

    pub fn same_grid(&self, other: &FrequencyTrace) -> bool {
        let tol = 1e-12 * self.dt.abs().max(other.dt.abs());
        self.samples.len() == other.samples.len()
            && (self.t0 - other.t0).abs() <= tol.max(1e-12 * self.t0.abs())
            && (self.dt - other.dt).abs() <= tol
    }

    /// Largest pointwise |difference|; the grids must match.
    pub fn max_abs_gap(&self, other: &FrequencyTrace) -> Result<f64> {
        if !self.same_grid(other) {
            return invalid("traces are on different time grids");
        }
        Ok(self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Keeps every `stride`-th sample.
    pub fn decimate(&self, stride: usize) -> FrequencyTrace {
        let stride = stride.max(1);
        FrequencyTrace {
            t0: self.t0,
            dt: self.dt * stride as f64,
            samples: self.samples.iter().step_by(stride).copied().collect(),
        }
    }

    /// Writes `t_s,delta_f_hz` rows with 9 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t_s,delta_f_hz")?;
        for (i, v) in self.samples.iter().enumerate() {
            writeln!(w, "{},{}", fmt_sig(self.time(i)), fmt_sig(*v))?;
        }
        Ok(())
    }
}

/// Number of steps on `[0, t_end]` with spacing `dt`.
pub(crate) fn grid_steps(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return invalid(format!("time step must be positive, got {dt}"));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return invalid(format!("end time must be positive, got {t_end}"));
    }
    let n = (t_end / dt).round();
    if n < 1.0 {
        return invalid(format!("end time {t_end} is shorter than one step {dt}"));
    }
    if n >= MAX_SAMPLES as f64 {
        return invalid(format!("grid of {n} steps exceeds the sample cap"));
    }
    Ok(n as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_grid_includes_both_ends() {
        let tr = FrequencyTrace::sample(0.01, 0.01, |t| t).unwrap();
        assert_eq!(tr.samples, vec![0.0, 0.01]);
        let tr = FrequencyTrace::sample(1.0, 0.001, |t| t).unwrap();
        assert_eq!(tr.len(), 1001);
        assert_eq!(tr.time(1000), 1.0);
    }

    #[test]
    fn invalid_grids() {
        assert!(FrequencyTrace::sample(0.0, 0.01, |t| t).is_err());
        assert!(FrequencyTrace::sample(1.0, 0.0, |t| t).is_err());
        assert!(FrequencyTrace::sample(1.0, -0.1, |t| t).is_err());
        assert!(FrequencyTrace::sample(0.001, 0.01, |t| t).is_err());
        assert!(FrequencyTrace::new(0.0, 0.1, vec![]).is_err());
    }

    #[test]
    fn csv_layout() {
        let tr = FrequencyTrace::new(0.0, 0.5, vec![0.0, -0.974034440, -1.0 / 3.0]).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t_s,delta_f_hz\n0,0\n0.5,-0.97403444\n1,-0.333333333\n"
        );
    }

    #[test]
    fn decimate_keeps_grid() {
        let tr = FrequencyTrace::sample(1.0, 0.001, |t| t).unwrap();
        let d = tr.decimate(10);
        assert_eq!(d.len(), 101);
        assert!((d.dt - 0.01).abs() < 1e-15);
        assert_eq!(d.samples[100], 1.0);
    }
}
