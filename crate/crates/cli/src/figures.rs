//! Data tables behind each figure target, on fixed built-in conditions.

use clap::ValueEnum;

use sfrkit::applications::{max_contingency_factor, max_contingency, asymptotic_max_contingency, required_ffr_share, SecurityPolicy};
use sfrkit::band_approx::{
    build_tau_surface, canonical_equivalent, mape_map, mape_tau_sweep, MapeReport, PfrGrid, TauSurfaceModel,
    TauSweepConfig, TauSweepReport, TimeGrid, ZeroFastBand,
};
use sfrkit::closed_form;
use sfrkit::model::{LagBand, PfrBands, RampBand};
use sfrkit::oracle::{integrate, IntegrationSpec};
use sfrkit::{Result, SfrError, SfrSystem, SystemConditions};

use crate::table::{traces_csv, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    Fig1,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Fig9,
    Fig10,
    Fig11,
}

/// Computation step for traces; output is written every `STRIDE` steps.
const DT: f64 = 0.001;
const STRIDE: usize = 10;
const T_END: f64 = 30.0;

fn base_system(p_cont: f64) -> SfrSystem {
    SfrSystem::new(SystemConditions::new(50.0, 9000.0, 2000.0, 0.04, p_cont)).expect("built-in system is valid")
}

fn contingency_system() -> SfrSystem {
    SfrSystem::new(SystemConditions::new(50.0, 7000.0, 2500.0, 0.04, 0.0)).expect("built-in system is valid")
}

fn lag_trace(sys: &SfrSystem, bands: Vec<LagBand>) -> Result<Vec<f64>> {
    Ok(closed_form::trace(sys, &PfrBands::Lag(bands), T_END, DT)?.decimate(STRIDE).samples)
}

pub fn render(fig: Figure) -> Result<String> {
    match fig {
        Figure::Fig1 => ramp_traces(),
        Figure::Fig3 => lag_family(),
        Figure::Fig4 => fitted_surface(),
        Figure::Fig5 => lag_vs_oracle(),
        Figure::Fig6 => asymptotic_and_two_band(),
        Figure::Fig7 => exact_vs_approx(),
        Figure::Fig8 => Ok(mape_csv(&mape_map(
            &base_system(300.0),
            0.4,
            2.0,
            &PfrGrid::default_mape(),
            &TauSurfaceModel::CANONICAL,
            &TimeGrid::default(),
            ZeroFastBand::Passthrough,
        )?)),
        Figure::Fig9 => contingency_vs_tau(),
        Figure::Fig10 => Ok(sweep_csv(&mape_tau_sweep(&base_system(300.0), &TauSweepConfig::default())?)),
        Figure::Fig11 => universal_surface(),
    }
}

/// Ramp closed form next to the clamped-ramp oracle for three ramp times.
fn ramp_traces() -> Result<String> {
    let sys = base_system(300.0);
    let mut names = Vec::new();
    let mut cols = Vec::new();
    for t_r in [6.0, 3.0, 1.0] {
        let band = RampBand::new(270.0, t_r);
        let closed = closed_form::trace(&sys, &PfrBands::Ramp(vec![band]), T_END, DT)?;
        let oracle = integrate(&sys, |t| band.value(t).unwrap_or(0.0), &IntegrationSpec::rk4(T_END))?;
        names.push(format!("closed_tr{t_r}_hz"));
        names.push(format!("oracle_tr{t_r}_hz"));
        cols.push(closed.decimate(STRIDE).samples);
        cols.push(oracle.decimate(STRIDE).samples);
    }
    Ok(columns_csv(&names, &cols))
}

fn lag_family() -> Result<String> {
    let sys = base_system(300.0);
    let taus = [0.4, 1.0, 2.0, 4.0, 8.0];
    let names: Vec<String> = taus.iter().map(|t| format!("tau{t}_hz")).collect();
    let cols = taus
        .iter()
        .map(|&tau| lag_trace(&sys, vec![LagBand::new(270.0, tau)]))
        .collect::<Result<Vec<_>>>()?;
    Ok(columns_csv(&names, &cols))
}

/// Fitted equivalent band per grid cell plus the fitted surface model.
fn fitted_surface() -> Result<String> {
    let fit = build_tau_surface(0.4, 2.0, &PfrGrid::default_fit(), &TimeGrid::default())?;
    let mut t = Table::new(&["pfr1_mw", "pfr2_mw", "pfr_eq_mw", "tau_eq_s", "tau_model_s"]);
    for (p1, p2, eq) in &fit.cells {
        t.values(&[*p1, *p2, eq.pfr_eq, eq.tau_eq, fit.model.tau_at_ratio(p2 / p1)]);
    }
    Ok(t.finish())
}

fn lag_vs_oracle() -> Result<String> {
    let sys = base_system(300.0);
    let band = LagBand::new(270.0, 2.0);
    let closed = lag_trace(&sys, vec![band])?;
    let oracle = integrate(&sys, |t| band.value(t).unwrap_or(0.0), &IntegrationSpec::rk4(T_END))?;
    Ok(traces_csv(
        DT * STRIDE as f64,
        &[("closed_form_hz", &closed), ("oracle_hz", &oracle.decimate(STRIDE).samples)],
    ))
}

/// (a) a fast band too small for an interior nadir; (b) two bands and
/// their canonical single-band equivalent.
fn asymptotic_and_two_band() -> Result<String> {
    let sys = base_system(300.0);
    let single = lag_trace(&sys, vec![LagBand::new(210.0, 0.4)])?;
    let exact = lag_trace(&sys, vec![LagBand::new(130.0, 0.4), LagBand::new(80.0, 2.0)])?;
    let eq = canonical_equivalent(130.0, 80.0, &TauSurfaceModel::CANONICAL, ZeroFastBand::Passthrough)?;
    let approx = lag_trace(&sys, vec![eq.band()])?;
    Ok(traces_csv(
        DT * STRIDE as f64,
        &[
            ("single_band_hz", &single),
            ("two_band_exact_hz", &exact),
            ("two_band_equivalent_hz", &approx),
        ],
    ))
}

/// 210 MW split between the bands, exact against the equivalent band.
fn exact_vs_approx() -> Result<String> {
    let sys = base_system(300.0);
    let mut names = Vec::new();
    let mut cols = Vec::new();
    for p1 in [0.0, 70.0, 140.0, 210.0] {
        let p2 = 210.0 - p1;
        let eq = canonical_equivalent(p1, p2, &TauSurfaceModel::CANONICAL, ZeroFastBand::Passthrough)?;
        names.push(format!("exact_pfr1_{p1}_hz"));
        names.push(format!("approx_pfr1_{p1}_hz"));
        cols.push(lag_trace(&sys, vec![LagBand::new(p1, 0.4), LagBand::new(p2, 2.0)])?);
        cols.push(lag_trace(&sys, vec![eq.band()])?);
    }
    Ok(columns_csv(&names, &cols))
}

/// Max contingency against equivalent τ. Below the interior-nadir
/// boundary the asymptotic cap applies; the FFR share is left empty where
/// the surface model cannot reach τ.
fn contingency_vs_tau() -> Result<String> {
    let sys = contingency_system();
    let policy = SecurityPolicy::wem(-1.25);
    let cap = asymptotic_max_contingency(sys.d_prime(), policy.k_policy, policy.delta_f_max)?;
    let mut t = Table::new(&["tau_s", "max_contingency_mw", "ffr_share"]);
    for i in 2..=60 {
        let tau = i as f64 / 20.0;
        let p = match max_contingency(&sys, &policy, tau) {
            Err(SfrError::Asymptotic(_)) => cap,
            other => other?,
        };
        let share = required_ffr_share(&TauSurfaceModel::CANONICAL, tau).ok();
        t.row([Some(tau), Some(p), share]);
    }
    Ok(t.finish())
}

fn universal_surface() -> Result<String> {
    let mut t = Table::new(&["A", "K", "f_AK"]);
    for ki in 10..=30 {
        let k = ki as f64 / 10.0;
        for ai in 1..=40 {
            let a = ai as f64 / 20.0;
            let f = match max_contingency_factor(a, k, -1.25) {
                Err(SfrError::Unbounded(_)) => None,
                other => Some(other?),
            };
            t.row([Some(a), Some(k), f]);
        }
    }
    Ok(t.finish())
}

fn columns_csv(names: &[String], cols: &[Vec<f64>]) -> String {
    let pairs: Vec<(&str, &[f64])> = names.iter().map(String::as_str).zip(cols.iter().map(Vec::as_slice)).collect();
    traces_csv(DT * STRIDE as f64, &pairs)
}

pub fn mape_csv(rep: &MapeReport) -> String {
    let mut t = Table::new(&["pfr1_mw", "pfr2_mw", "mape_pct"]);
    for c in &rep.cells {
        t.values(&[c.pfr1, c.pfr2, c.mape]);
    }
    t.finish()
}

pub fn sweep_csv(rep: &TauSweepReport) -> String {
    let mut t = Table::new(&["tau1_s", "tau2_s", "mean_mape_pct", "max_mape_pct"]);
    for c in &rep.cells {
        t.values(&[c.tau1, c.tau2, c.mean_mape, c.max_mape]);
    }
    t.finish()
}
