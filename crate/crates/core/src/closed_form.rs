//! Exact solutions of the SFR equation for ramp and lag PFR.
//!
//! Notation used throughout: `α = D'/2H` is the natural decay rate,
//! `K = P_cont/PFR`, `A = D'τ/2H`, `B = 1 + K(A − 1)` and `C = A/(A − 1)`.
//! A single lag band has an interior frequency minimum iff `B > 0`;
//! otherwise the frequency settles monotonically at `(PFR − P_cont)/D'`.

use serde::Serialize;

use crate::applications::NadirConstants;
use crate::error::{invalid, Result, SfrError};
use crate::model::{check_time, LagBand, PfrBands, RampBand, SfrSystem};
use crate::trace::FrequencyTrace;
use crate::SINGULAR_EPS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NadirKind {
    InteriorMinimum,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NadirResult {
    pub kind: NadirKind,
    /// Absent for the asymptotic case.
    pub t_nadir: Option<f64>,
    pub delta_f_nadir: f64,
    pub max_rocof: f64,
}

/// `1 − e^(−αt)`
#[inline]
fn natural_rise(alpha: f64, t: f64) -> f64 {
    -(-alpha * t).exp_m1()
}

/// Ramp closed form. Exact only while the ramp is still rising (`t ≤ t_r`);
/// the saturation at `pfr` is deliberately not modelled.
pub fn ramp_delta_f(sys: &SfrSystem, band: &RampBand, t: f64) -> Result<f64> {
    multi_ramp_delta_f(sys, std::slice::from_ref(band), t)
}

/// Multi-band ramp closed form, exact up to the shortest ramp time.
pub fn multi_ramp_delta_f(sys: &SfrSystem, bands: &[RampBand], t: f64) -> Result<f64> {
    sys.require_damping()?;
    check_time(t)?;
    if bands.is_empty() {
        return invalid("at least one ramp band is required");
    }
    for b in bands {
        b.validate()?;
    }
    let rate: f64 = bands.iter().map(RampBand::rate).sum();
    Ok(ramp_unchecked(sys, rate, t))
}

#[inline]
fn ramp_unchecked(sys: &SfrSystem, rate: f64, t: f64) -> f64 {
    let d = sys.d_prime();
    let h = sys.h();
    rate * t / d - (2.0 * rate * h / (d * d) + sys.p_cont() / d) * natural_rise(sys.damping_rate(), t)
}

/// `PFR·τ/(D'τ − 2H)·(e^(−t/τ) − e^(−αt))`, with its removable singularity
/// at `D'τ = 2H` replaced by the limit `PFR·t·e^(−αt)/2H`.
#[inline]
fn lag_transient(sys: &SfrSystem, band: &LagBand, t: f64) -> f64 {
    let d = sys.d_prime();
    let two_h = 2.0 * sys.h();
    let alpha = sys.damping_rate();
    let denom = d * band.tau - two_h;
    if denom.abs() <= SINGULAR_EPS * two_h {
        return band.pfr * t * (-alpha * t).exp() / two_h;
    }
    let gap = alpha * t - t / band.tau;
    // e^(−t/τ) − e^(−αt) = e^(−αt)·(e^(αt − t/τ) − 1)
    let diff = if gap.abs() < 1.0 {
        (-alpha * t).exp() * gap.exp_m1()
    } else {
        (-t / band.tau).exp() - (-alpha * t).exp()
    };
    band.pfr * band.tau / denom * diff
}

/// Single lag band closed form, valid for all `t ≥ 0`.
pub fn lag_delta_f(sys: &SfrSystem, band: &LagBand, t: f64) -> Result<f64> {
    multi_lag_delta_f(sys, std::slice::from_ref(band), t)
}

/// Closed form for any number of lag bands.
pub fn multi_lag_delta_f(sys: &SfrSystem, bands: &[LagBand], t: f64) -> Result<f64> {
    sys.require_damping()?;
    check_time(t)?;
    if bands.is_empty() {
        return invalid("at least one lag band is required");
    }
    for b in bands {
        b.validate()?;
    }
    Ok(multi_lag_unchecked(sys, bands, t))
}

fn multi_lag_unchecked(sys: &SfrSystem, bands: &[LagBand], t: f64) -> f64 {
    let total: f64 = bands.iter().map(|b| b.pfr).sum();
    let settle = (total - sys.p_cont()) / sys.d_prime() * natural_rise(sys.damping_rate(), t);
    settle - bands.iter().map(|b| lag_transient(sys, b, t)).sum::<f64>()
}

fn nadir_preconditions(sys: &SfrSystem, band: &LagBand) -> Result<()> {
    sys.require_damping()?;
    band.validate()?;
    sys.check_band_sign(band.pfr)?;
    if sys.p_cont() == 0.0 {
        return invalid("a nadir requires a non-zero contingency");
    }
    Ok(())
}

/// True when the single-band response has an interior minimum, i.e.
/// `PFR > P_cont·(1 − D'τ/2H)` (for under-frequency), equivalently `B > 0`.
/// The boundary `B = 0` puts the minimum at infinity and counts as
/// asymptotic.
pub fn nadir_solvable(sys: &SfrSystem, band: &LagBand) -> Result<bool> {
    nadir_preconditions(sys, band)?;
    if band.pfr == 0.0 {
        return Ok(false);
    }
    let nc = NadirConstants::from_system(sys, band.pfr, band.tau)?;
    Ok(nc.b > SINGULAR_EPS)
}

fn asymptotic_error(sys: &SfrSystem, band: &LagBand) -> SfrError {
    SfrError::Asymptotic(format!(
        "PFR {} MW with tau {} s does not satisfy PFR > P_cont(1 - D'tau/2H) for P_cont {} MW; \
         the frequency settles at the asymptotic nadir (PFR - P_cont)/D'",
        band.pfr,
        band.tau,
        sys.p_cont()
    ))
}

fn solvable_constants(sys: &SfrSystem, band: &LagBand) -> Result<NadirConstants> {
    if !nadir_solvable(sys, band)? {
        return Err(asymptotic_error(sys, band));
    }
    NadirConstants::from_system(sys, band.pfr, band.tau)
}

/// Time of the frequency nadir,
/// `ln[1 + (P_cont/PFR)(D'τ/2H − 1)] / (D'/2H − 1/τ)`.
///
/// At `A = 1` the limit `K·τ` is returned.
pub fn lag_nadir_time(sys: &SfrSystem, band: &LagBand) -> Result<f64> {
    let nc = solvable_constants(sys, band)?;
    if nc.is_singular() {
        return Ok(nc.k * band.tau);
    }
    let ratio = sys.p_cont() / band.pfr;
    let a = sys.d_prime() * band.tau / (2.0 * sys.h());
    let num = (1.0 + ratio * (a - 1.0)).ln();
    Ok(num / (sys.damping_rate() - 1.0 / band.tau))
}

/// Same nadir time written in the normalised constants, `τ·ln B/(A − 1)`.
pub fn lag_nadir_time_normalised(sys: &SfrSystem, band: &LagBand) -> Result<f64> {
    let nc = solvable_constants(sys, band)?;
    if nc.is_singular() {
        return Ok(nc.k * band.tau);
    }
    Ok(band.tau * nc.b.ln() / (nc.a - 1.0))
}

/// Bracket of the nadir formula,
/// `(C + K − 1)·B^(−C) − C·B^(−C/A) − K + 1`, so that
/// `Δf_nadir = (PFR/D')·bracket`.
///
/// Requires `B > 0`. At `A = 1` the limit `1 − K − e^(−K)` is used.
pub fn nadir_bracket(k: f64, a: f64) -> Result<f64> {
    if !(k.is_finite() && a.is_finite() && k > 0.0 && a > 0.0) {
        return invalid(format!("nadir constants must be positive, got K={k}, A={a}"));
    }
    if (a - 1.0).abs() <= SINGULAR_EPS {
        return Ok(1.0 - k - (-k).exp());
    }
    let b = 1.0 + k * (a - 1.0);
    if b <= SINGULAR_EPS {
        return Err(SfrError::Asymptotic(format!(
            "A = {a} is below 1 - 1/K = {} for K = {k}",
            1.0 - 1.0 / k
        )));
    }
    let c = a / (a - 1.0);
    Ok((c + k - 1.0) * b.powf(-c) - c * b.powf(-c / a) - k + 1.0)
}

/// Nadir deviation in closed form, `(PFR/D')·[(C+K−1)B^(−C) − C·B^(−C/A) − K + 1]`.
pub fn lag_nadir_deviation(sys: &SfrSystem, band: &LagBand) -> Result<f64> {
    let nc = solvable_constants(sys, band)?;
    if nc.is_singular() {
        return lag_delta_f(sys, band, nc.k * band.tau);
    }
    Ok(band.pfr / sys.d_prime() * nadir_bracket(nc.k, nc.a)?)
}

/// Settling value `(PFR − P_cont)/D'`, the nadir when there is no interior
/// minimum.
pub fn asymptotic_nadir(sys: &SfrSystem, total_pfr: f64) -> Result<f64> {
    sys.require_damping()?;
    if !total_pfr.is_finite() {
        return invalid("total PFR must be finite");
    }
    Ok((total_pfr - sys.p_cont()) / sys.d_prime())
}

/// `−P_cont/2H`, attained at `t = 0`.
pub fn max_rocof(sys: &SfrSystem) -> f64 {
    -sys.p_cont() / (2.0 * sys.h())
}

/// Classifies a single lag band and evaluates its nadir.
pub fn lag_nadir(sys: &SfrSystem, band: &LagBand) -> Result<NadirResult> {
    let rocof = max_rocof(sys);
    if nadir_solvable(sys, band)? {
        Ok(NadirResult {
            kind: NadirKind::InteriorMinimum,
            t_nadir: Some(lag_nadir_time(sys, band)?),
            delta_f_nadir: lag_nadir_deviation(sys, band)?,
            max_rocof: rocof,
        })
    } else {
        Ok(NadirResult {
            kind: NadirKind::Asymptotic,
            t_nadir: None,
            delta_f_nadir: asymptotic_nadir(sys, band.pfr)?,
            max_rocof: rocof,
        })
    }
}

/// Samples the closed form for `bands` at `t = 0, dt, …, t_end`.
pub fn trace(sys: &SfrSystem, bands: &PfrBands, t_end: f64, dt: f64) -> Result<FrequencyTrace> {
    sys.require_damping()?;
    bands.validate(sys)?;
    match bands {
        PfrBands::Lag(b) => FrequencyTrace::sample(t_end, dt, |t| multi_lag_unchecked(sys, b, t)),
        PfrBands::Ramp(b) => {
            let rate: f64 = b.iter().map(RampBand::rate).sum();
            FrequencyTrace::sample(t_end, dt, |t| ramp_unchecked(sys, rate, t))
        }
    }
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::model::SystemConditions;
    use proptest::prelude::*;

    fn system() -> impl Strategy<Value = SfrSystem> {
        (1000.0..20000.0f64, 500.0..5000.0f64, 0.01..0.08f64, 50.0..800.0f64).prop_map(
            |(ke, load, d, p)| SfrSystem::new(SystemConditions::new(50.0, ke, load, d, p)).unwrap(),
        )
    }

    proptest! {
        #[test]
        fn bracket_matches_reduced_form(k in 0.2..4.0f64, a in 0.05..5.0f64) {
            let b = 1.0 + k * (a - 1.0);
            prop_assume!(b > 1e-3 && (a - 1.0).abs() > 1e-6);
            let reduced = 1.0 - k - b.powf(1.0 / (1.0 - a));
            let full = nadir_bracket(k, a).unwrap();
            prop_assert!((full - reduced).abs() <= 1e-9 * (1.0 + reduced.abs()), "{full} vs {reduced}");
        }

        #[test]
        fn limit_branch_continuous_in_tau(sys in system(), share in 0.3..1.5f64, t in 0.0..30.0f64) {
            let tau0 = 2.0 * sys.h() / sys.d_prime();
            let pfr = share * sys.p_cont();
            let at = lag_delta_f(&sys, &LagBand::new(pfr, tau0), t).unwrap();
            let lo = lag_delta_f(&sys, &LagBand::new(pfr, tau0 * (1.0 - 1e-7)), t).unwrap();
            let hi = lag_delta_f(&sys, &LagBand::new(pfr, tau0 * (1.0 + 1e-7)), t).unwrap();
            // The slope in τ cancels in the midpoint, so any jump shows up here.
            prop_assert!((0.5 * (lo + hi) - at).abs() <= 1e-6, "{lo} {hi} vs {at}");
            // Each side on its own moves by up to about 0.54·PFR·H/D'²·1e-7.
            if 0.54 * pfr * sys.h() / sys.d_prime().powi(2) * 1e-7 <= 5e-7 {
                for near in [lo, hi] {
                    prop_assert!((near - at).abs() <= 1e-6, "{near} vs {at}");
                }
            }
        }

        #[test]
        fn nadir_is_stationary(sys in system(), share in 0.3..1.5f64, tau in 0.05..15.0f64) {
            let band = LagBand::new(share * sys.p_cont(), tau);
            prop_assume!(nadir_solvable(&sys, &band).unwrap());
            let t = lag_nadir_time(&sys, &band).unwrap();
            prop_assume!(t > 1e-3);
            let h = 1e-4;
            let lo = lag_delta_f(&sys, &band, (t - h).max(0.0)).unwrap();
            let hi = lag_delta_f(&sys, &band, t + h).unwrap();
            prop_assert!(((hi - lo) / (2.0 * h)).abs() <= 1e-6);
        }
    }
}
