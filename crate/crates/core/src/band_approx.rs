//! Two-band to single-band lag approximation.
//!
//! A fast band `(PFR₁, τ₁)` and a standard band `(PFR₂, τ₂)` are replaced by
//! one equivalent lag `(PFR', τ')` so that the single-band nadir formulas
//! apply. `PFR'` is taken as `PFR₁ + PFR₂`; `τ'` follows the surface model
//!
//! ```text
//! τ' = a·[1 − e^(−b·PFR₂/PFR₁)] + τ₁
//! ```
//!
//! whose coefficients are obtained by least-squares fitting the equivalent
//! band of every cell of a (PFR₁, PFR₂) grid. Accuracy is assessed by the
//! mean absolute percentage error between exact two-band and approximate
//! single-band frequency traces.

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_form;
use crate::error::{invalid, Result, SfrError};
use crate::lm::{self, LeastSquares, LmSettings};
use crate::model::{LagBand, PfrBands, SfrSystem};
use crate::trace::{grid_steps, FrequencyTrace};

/// Fast and standard lag bands; `fast.tau ≤ slow.tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoBandPfr {
    pub fast: LagBand,
    pub slow: LagBand,
}

impl TwoBandPfr {
    pub fn new(fast: LagBand, slow: LagBand) -> Self {
        Self { fast, slow }
    }

    pub fn validate(&self) -> Result<()> {
        self.fast.validate()?;
        self.slow.validate()?;
        if self.fast.tau > self.slow.tau {
            return invalid(format!(
                "fast band tau {} must not exceed standard band tau {}",
                self.fast.tau, self.slow.tau
            ));
        }
        if self.fast.pfr < 0.0 || self.slow.pfr < 0.0 {
            return invalid("band magnitudes must be non-negative");
        }
        if self.fast.pfr + self.slow.pfr <= 0.0 {
            return invalid("total PFR must be positive");
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> f64 {
        self.fast.value_unchecked(t) + self.slow.value_unchecked(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalentBand {
    pub pfr_eq: f64,
    pub tau_eq: f64,
    /// Sum of squared PFR residuals (MW²) for fitted bands; `None` when the
    /// band comes from the surface model.
    pub fit_residual: Option<f64>,
}

impl EquivalentBand {
    pub fn band(&self) -> LagBand {
        LagBand::new(self.pfr_eq, self.tau_eq)
    }
}

/// Coefficients of `τ' = a·[1 − e^(−b·PFR₂/PFR₁)] + τ₁`.
///
/// `tau2` is carried along for the `PFR₁ = 0` cell, where the ratio is
/// undefined and the standard band is passed through unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauSurfaceModel {
    pub a: f64,
    pub b: f64,
    pub tau1: f64,
    pub tau2: f64,
}

impl TauSurfaceModel {
    /// Reference coefficients for τ₁ = 0.4 s, τ₂ = 2.0 s.
    pub const CANONICAL: TauSurfaceModel = TauSurfaceModel {
        a: 1.3141629,
        b: 0.63075533,
        tau1: 0.4,
        tau2: 2.0,
    };

    /// `τ'` at ratio `r = PFR₂/PFR₁`.
    pub fn tau_at_ratio(&self, r: f64) -> f64 {
        -self.a * (-self.b * r).exp_m1() + self.tau1
    }

    /// Upper asymptote `τ₁ + a`.
    pub fn tau_limit(&self) -> f64 {
        self.tau1 + self.a
    }
}

/// How [`canonical_equivalent`] treats a cell with no fast response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ZeroFastBand {
    /// Return the standard band itself, `(PFR₂, τ₂)`.
    #[default]
    Passthrough,
    /// Apply the surface model at infinite ratio, `τ' = τ₁ + a`.
    ModelLimit,
}

/// List of (PFR₁, PFR₂) cells, in MW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfrGrid {
    pub cells: Vec<(f64, f64)>,
}

impl PfrGrid {
    pub fn rectangular(pfr1: &[f64], pfr2: &[f64]) -> Self {
        let cells = pfr1
            .iter()
            .flat_map(|&p1| pfr2.iter().map(move |&p2| (p1, p2)))
            .collect();
        Self { cells }
    }

    /// Cells with `PFR₁ + PFR₂ = total`, PFR₁ from 0 to `total` in `step`.
    pub fn fixed_total(total: f64, step: f64) -> Self {
        let n = (total / step).round() as usize;
        let cells = (0..=n)
            .map(|i| {
                let p1 = (i as f64 * step).min(total);
                (p1, total - p1)
            })
            .collect();
        Self { cells }
    }

    /// Uniform values `start, start + step, …, ≤ stop`.
    pub fn range(start: f64, stop: f64, step: f64) -> Vec<f64> {
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| start + i as f64 * step).collect()
    }

    /// 10 to 200 MW in 10 MW steps on both axes; used for surface fitting.
    pub fn default_fit() -> Self {
        let v = Self::range(10.0, 200.0, 10.0);
        Self::rectangular(&v, &v)
    }

    /// 210 MW total split between the bands in 10 MW steps; used for the
    /// MAPE map.
    pub fn default_mape() -> Self {
        Self::fixed_total(210.0, 10.0)
    }
}

/// Uniform time grid `[0, t_end]` at spacing `dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_end: f64,
    pub dt: f64,
}

impl Default for TimeGrid {
    /// 30 s at 10 ms.
    fn default() -> Self {
        Self { t_end: 30.0, dt: 0.01 }
    }
}

impl TimeGrid {
    pub fn points(&self) -> Result<Vec<f64>> {
        let n = grid_steps(self.t_end, self.dt)?;
        Ok((0..=n).map(|i| i as f64 * self.dt).collect())
    }

    /// Extends the grid so that it spans at least `5·tau`.
    pub fn covering(self, tau: f64) -> Self {
        Self {
            t_end: self.t_end.max(5.0 * tau),
            ..self
        }
    }
}

struct SingleLagFit<'a> {
    t: &'a [f64],
    y: Vec<f64>,
    tau_lo: f64,
    tau_hi: f64,
}

impl LeastSquares<2> for SingleLagFit<'_> {
    fn residual_count(&self) -> usize {
        self.t.len()
    }

    fn residuals(&self, p: &[f64; 2], r: &mut [f64]) {
        for ((ri, t), y) in r.iter_mut().zip(self.t).zip(&self.y) {
            *ri = -p[0] * (-t / p[1]).exp_m1() - y;
        }
    }

    fn residuals_and_jacobian(&self, p: &[f64; 2], r: &mut [f64], jac: &mut [[f64; 2]]) {
        let (pfr, tau) = (p[0], p[1]);
        for (i, t) in self.t.iter().enumerate() {
            let e = (-t / tau).exp();
            r[i] = pfr * (1.0 - e) - self.y[i];
            jac[i] = [1.0 - e, -pfr * e * t / (tau * tau)];
        }
    }

    fn project(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0].max(0.0), p[1].clamp(self.tau_lo, self.tau_hi)]
    }
}

impl SingleLagFit<'_> {
    /// Best magnitude for a fixed τ (linear least squares) and its cost.
    fn profile(&self, tau: f64) -> (f64, f64) {
        let (mut gy, mut gg) = (0.0, 0.0);
        for (t, y) in self.t.iter().zip(&self.y) {
            let g = -(-t / tau).exp_m1();
            gy += g * y;
            gg += g * g;
        }
        let pfr = if gg > 0.0 { (gy / gg).max(0.0) } else { 0.0 };
        let cost = self
            .t
            .iter()
            .zip(&self.y)
            .map(|(t, y)| {
                let r = -pfr * (-t / tau).exp_m1() - y;
                r * r
            })
            .sum();
        (pfr, cost)
    }

    /// Coarse log-spaced scan of the profile cost over the τ bounds. Returns
    /// the best starting point and the number of local minima seen.
    fn prescan(&self) -> ([f64; 2], usize) {
        const POINTS: usize = 48;
        let ratio = (self.tau_hi / self.tau_lo).ln();
        let scan: Vec<(f64, f64, f64)> = (0..POINTS)
            .map(|i| {
                let tau = self.tau_lo * (ratio * i as f64 / (POINTS - 1) as f64).exp();
                let (pfr, cost) = self.profile(tau);
                (tau, pfr, cost)
            })
            .collect();
        let minima = (0..POINTS)
            .filter(|&i| {
                let c = scan[i].2;
                (i == 0 || scan[i - 1].2 > c) && (i + 1 == POINTS || scan[i + 1].2 >= c)
            })
            .count();
        let best = scan
            .iter()
            .min_by(|a, b| a.2.total_cmp(&b.2))
            .expect("non-empty scan");
        ([best.1, best.0], minima)
    }
}

/// Fits a single lag `pfr_eq·(1 − e^(−t/τ_eq))` to the two-band PFR curve on
/// `t_grid`, with `pfr_eq ≥ 0` and `τ_eq ∈ [τ₁/2, 2τ₂]`.
pub fn fit_equivalent_band(tb: &TwoBandPfr, t_grid: &[f64]) -> Result<EquivalentBand> {
    tb.validate()?;
    if t_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return invalid("fitting times must be finite and non-negative");
    }
    let span = t_grid.iter().copied().fold(0.0, f64::max);
    if span < 5.0 * tb.slow.tau * (1.0 - 1e-12) {
        return invalid(format!(
            "fitting grid ends at {span} s but must cover 5·tau2 = {} s",
            5.0 * tb.slow.tau
        ));
    }
    let problem = SingleLagFit {
        t: t_grid,
        y: t_grid.iter().map(|&t| tb.value(t)).collect(),
        tau_lo: 0.5 * tb.fast.tau,
        tau_hi: 2.0 * tb.slow.tau,
    };
    let (init, minima) = problem.prescan();
    if minima > 1 {
        debug!("profile cost has {minima} local minima for {tb:?}; starting from the best");
    }
    let report = lm::minimize(&problem, init, &LmSettings::default())?;
    Ok(EquivalentBand {
        pfr_eq: report.params[0],
        tau_eq: report.params[1],
        fit_residual: Some(report.cost),
    })
}

struct SurfaceFitProblem {
    ratio: Vec<f64>,
    tau: Vec<f64>,
    tau1: f64,
}

impl LeastSquares<2> for SurfaceFitProblem {
    fn residual_count(&self) -> usize {
        self.ratio.len()
    }

    fn residuals(&self, p: &[f64; 2], r: &mut [f64]) {
        for ((ri, x), y) in r.iter_mut().zip(&self.ratio).zip(&self.tau) {
            *ri = -p[0] * (-p[1] * x).exp_m1() + self.tau1 - y;
        }
    }

    fn residuals_and_jacobian(&self, p: &[f64; 2], r: &mut [f64], jac: &mut [[f64; 2]]) {
        let (a, b) = (p[0], p[1]);
        for (i, x) in self.ratio.iter().enumerate() {
            let e = (-b * x).exp();
            r[i] = a * (1.0 - e) + self.tau1 - self.tau[i];
            jac[i] = [1.0 - e, a * x * e];
        }
    }

    fn project(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0].max(0.0), p[1].max(1e-12)]
    }
}

/// Result of [`build_tau_surface`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceFit {
    pub model: TauSurfaceModel,
    /// RMS of the τ-model residuals over the fitted cells, s.
    pub rms_residual: f64,
    /// Largest `|pfr_eq − (PFR₁ + PFR₂)|/(PFR₁ + PFR₂)` over the cells.
    pub max_magnitude_deviation: f64,
    /// Fitted equivalent band per used cell: (PFR₁, PFR₂, band).
    pub cells: Vec<(f64, f64, EquivalentBand)>,
    /// Cells dropped because PFR₁ = 0 leaves the ratio undefined.
    pub skipped_cells: usize,
}

/// Fits the equivalent band on every cell of `grid`, then fits the τ surface
/// model to the fitted τ values.
pub fn build_tau_surface(tau1: f64, tau2: f64, grid: &PfrGrid, fit_times: &TimeGrid) -> Result<SurfaceFit> {
    if !(tau1 > 0.0 && tau2 >= tau1 && tau2.is_finite()) {
        return invalid(format!("need 0 < tau1 <= tau2, got tau1={tau1}, tau2={tau2}"));
    }
    let times = fit_times.covering(tau2).points()?;
    let usable: Vec<(f64, f64)> = grid.cells.iter().copied().filter(|(p1, _)| *p1 > 0.0).collect();
    let skipped = grid.cells.len() - usable.len();
    if skipped > 0 {
        warn!("skipping {skipped} grid cells with PFR1 = 0 (ratio PFR2/PFR1 undefined)");
    }
    if usable.is_empty() {
        return invalid("PFR grid has no cell with positive PFR1");
    }
    if usable.iter().any(|(p1, p2)| *p2 < 0.0 || !p1.is_finite() || !p2.is_finite()) {
        return invalid("PFR grid magnitudes must be finite and non-negative");
    }

    let cells: Vec<(f64, f64, EquivalentBand)> = usable
        .par_iter()
        .map(|&(p1, p2)| {
            let tb = TwoBandPfr::new(LagBand::new(p1, tau1), LagBand::new(p2, tau2));
            fit_equivalent_band(&tb, &times).map(|eq| (p1, p2, eq))
        })
        .collect::<Result<_>>()?;

    let max_magnitude_deviation = cells
        .iter()
        .map(|(p1, p2, eq)| (eq.pfr_eq - (p1 + p2)).abs() / (p1 + p2))
        .fold(0.0, f64::max);

    let problem = SurfaceFitProblem {
        ratio: cells.iter().map(|(p1, p2, _)| p2 / p1).collect(),
        tau: cells.iter().map(|(_, _, eq)| eq.tau_eq).collect(),
        tau1,
    };
    let a0 = problem.tau.iter().copied().fold(tau1, f64::max) - tau1;
    let report = lm::minimize(&problem, [a0, 1.0], &LmSettings::default())?;
    let [a, b] = report.params;
    Ok(SurfaceFit {
        model: TauSurfaceModel { a, b, tau1, tau2 },
        rms_residual: (report.cost / cells.len() as f64).sqrt(),
        max_magnitude_deviation,
        cells,
        skipped_cells: skipped,
    })
}

/// Equivalent band from the surface model: `PFR' = PFR₁ + PFR₂`,
/// `τ' = a·[1 − e^(−b·PFR₂/PFR₁)] + τ₁`.
pub fn canonical_equivalent(
    pfr1: f64,
    pfr2: f64,
    model: &TauSurfaceModel,
    zero_fast: ZeroFastBand,
) -> Result<EquivalentBand> {
    if !(pfr1.is_finite() && pfr2.is_finite()) || pfr1 < 0.0 || pfr2 < 0.0 {
        return invalid("band magnitudes must be finite and non-negative");
    }
    if pfr1 + pfr2 <= 0.0 {
        return invalid("total PFR must be positive");
    }
    let tau_eq = if pfr1 == 0.0 {
        match zero_fast {
            ZeroFastBand::Passthrough => model.tau2,
            ZeroFastBand::ModelLimit => model.tau_limit(),
        }
    } else {
        model.tau_at_ratio(pfr2 / pfr1)
    };
    Ok(EquivalentBand {
        pfr_eq: pfr1 + pfr2,
        tau_eq,
        fit_residual: None,
    })
}

/// Mean absolute percentage error of `approx` against `exact`, in percent.
///
/// Samples with `|exact| < 1e-6·max|exact|` are skipped (Δf starts at zero).
pub fn mape(exact: &FrequencyTrace, approx: &FrequencyTrace) -> Result<f64> {
    if !exact.same_grid(approx) {
        return invalid("MAPE needs traces on the same time grid");
    }
    let peak = exact.samples.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let floor = 1e-6 * peak;
    let (sum, n) = exact
        .samples
        .iter()
        .zip(&approx.samples)
        .filter(|(e, _)| e.abs() >= floor && **e != 0.0)
        .fold((0.0, 0usize), |(s, n), (e, a)| (s + ((e - a) / e).abs(), n + 1));
    if n == 0 {
        return Err(SfrError::UndefinedMape(
            "every exact sample is effectively zero".into(),
        ));
    }
    Ok(100.0 * sum / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapeCell {
    pub pfr1: f64,
    pub pfr2: f64,
    pub mape: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapeReport {
    pub cells: Vec<MapeCell>,
    pub mean: f64,
    pub max: f64,
}

impl MapeReport {
    fn from_cells(cells: Vec<MapeCell>) -> Result<Self> {
        if cells.is_empty() {
            return invalid("MAPE grid is empty");
        }
        let mean = cells.iter().map(|c| c.mape).sum::<f64>() / cells.len() as f64;
        let max = cells.iter().map(|c| c.mape).fold(0.0, f64::max);
        Ok(Self { cells, mean, max })
    }
}

/// MAPE of one (PFR₁, PFR₂) cell: exact two-band trace vs the single
/// equivalent band from `model`.
pub fn mape_cell(
    sys: &SfrSystem,
    tau1: f64,
    tau2: f64,
    pfr1: f64,
    pfr2: f64,
    model: &TauSurfaceModel,
    times: &TimeGrid,
    zero_fast: ZeroFastBand,
) -> Result<f64> {
    let exact = closed_form::trace(
        sys,
        &PfrBands::Lag(vec![LagBand::new(pfr1, tau1), LagBand::new(pfr2, tau2)]),
        times.t_end,
        times.dt,
    )?;
    let eq = canonical_equivalent(pfr1, pfr2, model, zero_fast)?;
    let approx = closed_form::trace(sys, &PfrBands::Lag(vec![eq.band()]), times.t_end, times.dt)?;
    mape(&exact, &approx)
}

/// Per-cell MAPE over a (PFR₁, PFR₂) grid.
pub fn mape_map(
    sys: &SfrSystem,
    tau1: f64,
    tau2: f64,
    grid: &PfrGrid,
    model: &TauSurfaceModel,
    times: &TimeGrid,
    zero_fast: ZeroFastBand,
) -> Result<MapeReport> {
    if (model.tau1 - tau1).abs() > 1e-12 * tau1.max(1.0) {
        return invalid(format!("surface model was built for tau1={}, not {tau1}", model.tau1));
    }
    let cells = grid
        .cells
        .par_iter()
        .map(|&(pfr1, pfr2)| {
            mape_cell(sys, tau1, tau2, pfr1, pfr2, model, times, zero_fast)
                .map(|mape| MapeCell { pfr1, pfr2, mape })
        })
        .collect::<Result<Vec<_>>>()?;
    MapeReport::from_cells(cells)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauSweepCell {
    pub tau1: f64,
    pub tau2: f64,
    pub model: TauSurfaceModel,
    pub mean_mape: f64,
    pub max_mape: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauSweepReport {
    pub cells: Vec<TauSweepCell>,
    /// Mean of the per-cell mean MAPE values.
    pub mean: f64,
    /// Largest per-cell maximum MAPE.
    pub max: f64,
}

/// Sweep inputs. Defaults: τ₁ from 0.2 to 1.0 s, τ₂ from 0.2 to 4.0 s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauSweepConfig {
    pub tau1: Vec<f64>,
    pub tau2: Vec<f64>,
    pub fit_grid: PfrGrid,
    pub mape_grid: PfrGrid,
    pub fit_times: TimeGrid,
    pub mape_times: TimeGrid,
}

impl Default for TauSweepConfig {
    fn default() -> Self {
        let v = PfrGrid::range(20.0, 200.0, 20.0);
        Self {
            tau1: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            tau2: vec![0.2, 0.4, 0.6, 0.8, 1.0, 1.1, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0],
            fit_grid: PfrGrid::rectangular(&v, &v),
            mape_grid: PfrGrid::default_mape(),
            fit_times: TimeGrid::default(),
            mape_times: TimeGrid::default(),
        }
    }
}

/// Rebuilds the surface model for every (τ₁, τ₂ ≥ τ₁) pair and reports the
/// mean and maximum MAPE over the PFR grid.
pub fn mape_tau_sweep(sys: &SfrSystem, cfg: &TauSweepConfig) -> Result<TauSweepReport> {
    let pairs: Vec<(f64, f64)> = cfg
        .tau1
        .iter()
        .flat_map(|&t1| cfg.tau2.iter().filter(move |&&t2| t2 >= t1).map(move |&t2| (t1, t2)))
        .collect();
    if pairs.is_empty() {
        return invalid("tau sweep has no cell with tau2 >= tau1");
    }
    let mut cells = Vec::with_capacity(pairs.len());
    for (tau1, tau2) in pairs {
        let model = build_tau_surface(tau1, tau2, &cfg.fit_grid, &cfg.fit_times)?.model;
        let report = mape_map(
            sys,
            tau1,
            tau2,
            &cfg.mape_grid,
            &model,
            &cfg.mape_times.covering(tau2),
            ZeroFastBand::Passthrough,
        )?;
        cells.push(TauSweepCell {
            tau1,
            tau2,
            model,
            mean_mape: report.mean,
            max_mape: report.max,
        });
    }
    let mean = cells.iter().map(|c| c.mean_mape).sum::<f64>() / cells.len() as f64;
    let max = cells.iter().map(|c| c.max_mape).fold(0.0, f64::max);
    Ok(TauSweepReport { cells, mean, max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SystemConditions;

    fn fit_times() -> Vec<f64> {
        TimeGrid::default().points().unwrap()
    }

    fn base_system() -> SfrSystem {
        SfrSystem::new(SystemConditions::new(50.0, 9000.0, 2000.0, 0.04, 300.0)).unwrap()
    }

    #[test]
    fn single_band_inputs_are_recovered() {
        let t = fit_times();
        let fast_only = TwoBandPfr::new(LagBand::new(210.0, 0.4), LagBand::new(0.0, 2.0));
        let eq = fit_equivalent_band(&fast_only, &t).unwrap();
        assert!((eq.pfr_eq / 210.0 - 1.0).abs() <= 1e-6, "{eq:?}");
        assert!((eq.tau_eq / 0.4 - 1.0).abs() <= 1e-6, "{eq:?}");

        let slow_only = TwoBandPfr::new(LagBand::new(0.0, 0.4), LagBand::new(210.0, 2.0));
        let eq = fit_equivalent_band(&slow_only, &t).unwrap();
        assert!((eq.pfr_eq / 210.0 - 1.0).abs() <= 1e-6, "{eq:?}");
        assert!((eq.tau_eq / 2.0 - 1.0).abs() <= 1e-6, "{eq:?}");
    }

    #[test]
    fn mixed_band_fit() {
        let tb = TwoBandPfr::new(LagBand::new(130.0, 0.4), LagBand::new(80.0, 2.0));
        let eq = fit_equivalent_band(&tb, &fit_times()).unwrap();
        assert!((0.75..=0.90).contains(&eq.tau_eq), "{eq:?}");
        assert!((eq.pfr_eq - 210.0).abs() / 210.0 <= 0.02, "{eq:?}");
    }

    #[test]
    fn fit_is_deterministic_and_start_independent() {
        let tb = TwoBandPfr::new(LagBand::new(70.0, 0.4), LagBand::new(150.0, 2.0));
        let t = fit_times();
        let a = fit_equivalent_band(&tb, &t).unwrap();
        let b = fit_equivalent_band(&tb, &t).unwrap();
        assert_eq!(a.pfr_eq.to_bits(), b.pfr_eq.to_bits());
        assert_eq!(a.tau_eq.to_bits(), b.tau_eq.to_bits());

        let problem = SingleLagFit {
            t: &t,
            y: t.iter().map(|&s| tb.value(s)).collect(),
            tau_lo: 0.2,
            tau_hi: 4.0,
        };
        for init in [[50.0, 0.25], [400.0, 3.9], [220.0, 1.0]] {
            let rep = lm::minimize(&problem, init, &LmSettings::default()).unwrap();
            assert!((rep.params[0] - a.pfr_eq).abs() < 1e-6 * a.pfr_eq, "{init:?}: {rep:?}");
            assert!((rep.params[1] - a.tau_eq).abs() < 1e-6 * a.tau_eq, "{init:?}: {rep:?}");
        }
        let (_, minima) = problem.prescan();
        assert_eq!(minima, 1);
    }

    #[test]
    fn fit_rejects_bad_inputs() {
        let t = fit_times();
        let zero = TwoBandPfr::new(LagBand::new(0.0, 0.4), LagBand::new(0.0, 2.0));
        assert!(matches!(fit_equivalent_band(&zero, &t), Err(SfrError::InvalidInput(_))));
        let short: Vec<f64> = (0..=500).map(|i| i as f64 * 0.01).collect();
        let tb = TwoBandPfr::new(LagBand::new(130.0, 0.4), LagBand::new(80.0, 2.0));
        assert!(fit_equivalent_band(&tb, &short).is_err());
        let swapped = TwoBandPfr::new(LagBand::new(130.0, 2.0), LagBand::new(80.0, 0.4));
        assert!(fit_equivalent_band(&swapped, &t).is_err());
    }

    #[test]
    fn canonical_equivalent_values() {
        let m = TauSurfaceModel::CANONICAL;
        let eq = canonical_equivalent(130.0, 80.0, &m, ZeroFastBand::Passthrough).unwrap();
        assert_eq!(eq.pfr_eq, 210.0);
        assert!((eq.tau_eq - 0.8227586415072591).abs() < 1e-12);
        let eq = canonical_equivalent(75.0, 0.0, &m, ZeroFastBand::Passthrough).unwrap();
        assert_eq!(eq.tau_eq, 0.4);
        let eq = canonical_equivalent(0.0, 210.0, &m, ZeroFastBand::Passthrough).unwrap();
        assert_eq!((eq.pfr_eq, eq.tau_eq), (210.0, 2.0));
        let eq = canonical_equivalent(0.0, 210.0, &m, ZeroFastBand::ModelLimit).unwrap();
        assert!((eq.tau_eq - (0.4 + 1.3141629)).abs() < 1e-15);
        assert!(canonical_equivalent(0.0, 0.0, &m, ZeroFastBand::Passthrough).is_err());
    }

    #[test]
    fn mape_reference_values() {
        let a = FrequencyTrace::new(0.0, 1.0, vec![-1.0, -2.0]).unwrap();
        let b = FrequencyTrace::new(0.0, 1.0, vec![-1.1, -2.2]).unwrap();
        assert!((mape(&a, &b).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(mape(&a, &a).unwrap(), 0.0);

        let with_zero = FrequencyTrace::new(0.0, 1.0, vec![0.0, -1.0, -2.0]).unwrap();
        let approx = FrequencyTrace::new(0.0, 1.0, vec![0.5, -1.1, -2.2]).unwrap();
        assert!((mape(&with_zero, &approx).unwrap() - 10.0).abs() < 1e-12);

        let zeros = FrequencyTrace::new(0.0, 1.0, vec![0.0, 0.0]).unwrap();
        assert!(matches!(mape(&zeros, &zeros), Err(SfrError::UndefinedMape(_))));
        let other_grid = FrequencyTrace::new(0.0, 0.5, vec![-1.0, -2.0]).unwrap();
        assert!(mape(&a, &other_grid).is_err());
    }

    #[test]
    fn mape_map_single_cell_and_fast_only() {
        let sys = base_system();
        let m = TauSurfaceModel::CANONICAL;
        let times = TimeGrid::default();
        let grid = PfrGrid { cells: vec![(130.0, 80.0)] };
        let rep = mape_map(&sys, 0.4, 2.0, &grid, &m, &times, ZeroFastBand::Passthrough).unwrap();
        let direct = mape_cell(&sys, 0.4, 2.0, 130.0, 80.0, &m, &times, ZeroFastBand::Passthrough).unwrap();
        assert_eq!(rep.cells[0].mape, direct);
        assert_eq!(rep.mean, direct);
        assert_eq!(rep.max, direct);

        let fast_only = mape_cell(&sys, 0.4, 2.0, 210.0, 0.0, &m, &times, ZeroFastBand::Passthrough).unwrap();
        assert!(fast_only < 1e-9, "{fast_only}");
        let slow_only = mape_cell(&sys, 0.4, 2.0, 0.0, 210.0, &m, &times, ZeroFastBand::Passthrough).unwrap();
        assert!(slow_only < 1e-9, "{slow_only}");
        let slow_forced = mape_cell(&sys, 0.4, 2.0, 0.0, 210.0, &m, &times, ZeroFastBand::ModelLimit).unwrap();
        assert!(slow_forced > 0.1, "{slow_forced}");
    }

    #[test]
    fn identical_bands_degenerate_surface() {
        let v = PfrGrid::range(20.0, 200.0, 60.0);
        let fit = build_tau_surface(0.7, 0.7, &PfrGrid::rectangular(&v, &v), &TimeGrid::default()).unwrap();
        assert!(fit.model.a.abs() < 1e-6, "{:?}", fit.model);
        for (_, _, eq) in &fit.cells {
            assert!((eq.tau_eq - 0.7).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_ratio_row_reproduced() {
        let grid = PfrGrid::rectangular(&[50.0, 100.0, 150.0], &[0.0]);
        let fit = build_tau_surface(0.4, 2.0, &grid, &TimeGrid::default()).unwrap();
        for (_, _, eq) in &fit.cells {
            assert!((eq.tau_eq - 0.4).abs() < 1e-6);
        }
        assert!((fit.model.tau_at_ratio(0.0) - 0.4).abs() < 1e-15);
        assert!(fit.rms_residual < 1e-6);
    }

    #[test]
    fn zero_fast_cells_are_skipped() {
        let grid = PfrGrid::rectangular(&[0.0, 100.0, 200.0], &[50.0, 100.0]);
        let fit = build_tau_surface(0.4, 2.0, &grid, &TimeGrid::default()).unwrap();
        assert_eq!(fit.skipped_cells, 2);
        assert_eq!(fit.cells.len(), 4);
        let all_zero = PfrGrid::rectangular(&[0.0], &[50.0, 100.0]);
        assert!(build_tau_surface(0.4, 2.0, &all_zero, &TimeGrid::default()).is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(PfrGrid::default_fit().cells.len(), 400);
        let m = PfrGrid::default_mape();
        assert_eq!(m.cells.len(), 22);
        assert_eq!(m.cells[0], (0.0, 210.0));
        assert_eq!(m.cells[21], (210.0, 0.0));
        assert!(m.cells.iter().all(|(a, b)| (a + b - 210.0).abs() < 1e-9));
        assert_eq!(PfrGrid::range(0.2, 1.0, 0.2).len(), 5);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn surface_model_monotone_and_bounded(r in 0.0..50.0f64, dr in 1e-3..5.0f64) {
            let m = TauSurfaceModel::CANONICAL;
            let (lo, hi) = (m.tau_at_ratio(r), m.tau_at_ratio(r + dr));
            prop_assert!(hi >= lo);
            // Strict where the increment is resolvable in f64.
            let step = m.a * (-m.b * r).exp() * -(-m.b * dr).exp_m1();
            if step > 1e-12 {
                prop_assert!(hi > lo);
            }
            prop_assert!(m.tau_at_ratio(r) <= m.tau_limit());
            prop_assert!(m.tau_at_ratio(r) >= m.tau1);
        }

        #[test]
        fn mape_of_self_is_zero(v in proptest::collection::vec(-5.0..5.0f64, 1..50)) {
            prop_assume!(v.iter().any(|x| *x != 0.0));
            let tr = FrequencyTrace::new(0.0, 0.1, v).unwrap();
            prop_assert_eq!(mape(&tr, &tr).unwrap(), 0.0);
        }
    }
}
