//! Security calculators built on the single-band nadir formula: maximum
//! allowable contingency, the universal `f(A, K)` metric, the asymptotic
//! cap, the practical lower bound on τ and the contingency sensitivities.
//!
//! Under a PFR adequacy policy `PFR ≥ P_cont/K` the constants `K` and
//! `A = D'τ/2H` do not depend on the contingency size, so the maximum
//! contingency is explicit; no fixed-point iteration is involved.

use log::info;
use serde::{Deserialize, Serialize};

use crate::band_approx::TauSurfaceModel;
use crate::closed_form::nadir_bracket;
use crate::error::{invalid, Result, SfrError};
use crate::model::SfrSystem;
use crate::SINGULAR_EPS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NadirRegion {
    /// `B > 0`: interior minimum at a finite time.
    Interior,
    /// `B = 0` (within tolerance): `A = 1 − 1/K`, nadir time infinite.
    Boundary,
    /// `B < 0`: monotone decay to the asymptotic nadir.
    Asymptotic,
}

/// Normalised nadir constants `K = P_cont/PFR`, `A = D'τ/2H`,
/// `B = 1 + K(A − 1)`, `C = A/(A − 1)`.
///
/// `c` is infinite at `A = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NadirConstants {
    pub k: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl NadirConstants {
    pub fn from_ratios(k: f64, a: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return invalid(format!("K must be positive and finite, got {k}"));
        }
        if !(a > 0.0 && a.is_finite()) {
            return invalid(format!("A must be positive and finite, got {a}"));
        }
        let c = if (a - 1.0).abs() <= SINGULAR_EPS {
            f64::INFINITY
        } else {
            a / (a - 1.0)
        };
        Ok(Self {
            k,
            a,
            b: 1.0 + k * (a - 1.0),
            c,
        })
    }

    pub fn from_system(sys: &SfrSystem, pfr: f64, tau: f64) -> Result<Self> {
        sys.require_damping()?;
        if pfr == 0.0 || !pfr.is_finite() {
            return invalid(format!("PFR must be non-zero and finite, got {pfr}"));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return invalid(format!("tau must be positive, got {tau}"));
        }
        Self::from_ratios(sys.p_cont() / pfr, a_ratio(sys, tau))
    }

    pub fn is_singular(&self) -> bool {
        (self.a - 1.0).abs() <= SINGULAR_EPS
    }

    pub fn region(&self) -> NadirRegion {
        if self.b > SINGULAR_EPS {
            NadirRegion::Interior
        } else if self.b >= -SINGULAR_EPS {
            NadirRegion::Boundary
        } else {
            NadirRegion::Asymptotic
        }
    }
}

/// `A = D'τ/2H`
pub fn a_ratio(sys: &SfrSystem, tau: f64) -> f64 {
    sys.d_prime() * tau / (2.0 * sys.h())
}

/// PFR adequacy policy and frequency limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityPolicy {
    /// PFR must be at least `P_cont/k_policy`.
    pub k_policy: f64,
    /// Largest allowed deviation, Hz (negative for under-frequency).
    pub delta_f_max: f64,
}

impl SecurityPolicy {
    /// PFR of at least 70 % of the largest contingency.
    pub fn wem(delta_f_max: f64) -> Self {
        Self {
            k_policy: 1.0 / 0.7,
            delta_f_max,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.k_policy > 0.0 && self.k_policy.is_finite()) {
            return invalid(format!("policy K must be positive, got {}", self.k_policy));
        }
        if self.delta_f_max == 0.0 || !self.delta_f_max.is_finite() {
            return invalid("maximum frequency deviation must be non-zero and finite");
        }
        Ok(())
    }
}

fn asymptotic_region(k: f64, a: f64) -> SfrError {
    SfrError::Asymptotic(format!(
        "A = {a} < 1 - 1/K = {}; use the asymptotic cap Δf_max/(1/K - 1)·D'",
        1.0 - 1.0 / k
    ))
}

/// Largest contingency whose nadir stays within `Δf_max` when the PFR is
/// exactly `P_cont/K`:
/// `K·D'·Δf_max / [(C+K−1)B^(−C) − C·B^(−C/A) − K + 1]`.
///
/// On the boundary `A = 1 − 1/K` this returns the asymptotic cap; below it
/// the caller must use [`asymptotic_max_contingency`].
pub fn max_contingency(sys: &SfrSystem, policy: &SecurityPolicy, tau: f64) -> Result<f64> {
    sys.require_damping()?;
    policy.validate()?;
    if !(tau > 0.0 && tau.is_finite()) {
        return invalid(format!("tau must be positive, got {tau}"));
    }
    let nc = NadirConstants::from_ratios(policy.k_policy, a_ratio(sys, tau))?;
    match nc.region() {
        NadirRegion::Interior => Ok(policy.k_policy * sys.d_prime() * policy.delta_f_max / nadir_bracket(nc.k, nc.a)?),
        NadirRegion::Boundary => asymptotic_max_contingency(sys.d_prime(), policy.k_policy, policy.delta_f_max),
        NadirRegion::Asymptotic => Err(asymptotic_region(nc.k, nc.a)),
    }
}

/// `f(A, K)` with `P_cont ≤ f(A, K)·D'`; system independent.
pub fn universal_max_contingency_factor(a: f64, k: f64, delta_f_max: f64) -> Result<f64> {
    let nc = NadirConstants::from_ratios(k, a)?;
    match nc.region() {
        NadirRegion::Interior => Ok(k * delta_f_max / nadir_bracket(k, a)?),
        NadirRegion::Boundary => asymptotic_max_contingency(1.0, k, delta_f_max),
        NadirRegion::Asymptotic => Err(asymptotic_region(k, a)),
    }
}

/// `f(A, K)` where defined, otherwise the asymptotic cap per unit `D'`.
pub fn max_contingency_factor(a: f64, k: f64, delta_f_max: f64) -> Result<f64> {
    match universal_max_contingency_factor(a, k, delta_f_max) {
        Err(SfrError::Asymptotic(_)) => asymptotic_max_contingency(1.0, k, delta_f_max),
        other => other,
    }
}

/// Cap in the asymptotic region, `Δf_max/(1/K − 1)·D'`.
///
/// `K = ∞` (no PFR) gives pure load-relief containment `−Δf_max·D'`.
pub fn asymptotic_max_contingency(d_prime: f64, k_policy: f64, delta_f_max: f64) -> Result<f64> {
    if !(d_prime > 0.0 && d_prime.is_finite()) {
        return invalid(format!("D' must be positive, got {d_prime}"));
    }
    if k_policy.is_nan() || k_policy <= 1.0 {
        return Err(SfrError::Unbounded(format!(
            "K = {k_policy} <= 1: the asymptotic nadir is never below zero, so no contingency cap exists"
        )));
    }
    Ok(delta_f_max / (1.0 / k_policy - 1.0) * d_prime)
}

/// `(1 − 1/K)·2H/D'`: below this τ the nadir is asymptotic and faster
/// response no longer improves it. Negative values are clamped to 0.
pub fn min_effective_tau(sys: &SfrSystem, k: f64) -> Result<f64> {
    sys.require_damping()?;
    if !(k > 0.0) {
        return invalid(format!("K must be positive, got {k}"));
    }
    let tau = (1.0 - 1.0 / k) * 2.0 * sys.h() / sys.d_prime();
    if tau < 0.0 {
        info!("K = {k} < 1: every tau yields an interior nadir; lower bound clamped to 0");
        return Ok(0.0);
    }
    Ok(tau)
}

/// `A^(1/(A−1))`, equal to `e` at `A = 1`.
fn unit_k_factor(a: f64) -> f64 {
    let x = a - 1.0;
    if x.abs() <= 1e-12 {
        std::f64::consts::E
    } else {
        (x.ln_1p() / x).exp()
    }
}

/// `(A − 1 − A·ln A)/(A − 1)²`, equal to `−1/2` at `A = 1`.
fn sensitivity_bracket(a: f64) -> f64 {
    let x = a - 1.0;
    if x.abs() < 1e-3 {
        -0.5 + x / 6.0 - x * x / 12.0 + x * x * x / 20.0
    } else {
        (x - a * x.ln_1p()) / (x * x)
    }
}

fn special_case(d_prime: f64, h: f64, delta_f_max: f64, tau: f64) -> f64 {
    let a = d_prime * tau / (2.0 * h);
    -d_prime * delta_f_max * unit_k_factor(a)
}

fn check_special(sys: &SfrSystem, delta_f_max: f64, tau: f64) -> Result<()> {
    sys.require_damping()?;
    if delta_f_max == 0.0 || !delta_f_max.is_finite() {
        return invalid("maximum frequency deviation must be non-zero and finite");
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return invalid(format!("tau must be positive, got {tau}"));
    }
    Ok(())
}

/// Maximum contingency with PFR equal to the contingency (`K = 1`):
/// `−D'·Δf_max / A^(−1/(A−1))`.
pub fn special_case_max_contingency(sys: &SfrSystem, delta_f_max: f64, tau: f64) -> Result<f64> {
    check_special(sys, delta_f_max, tau)?;
    Ok(special_case(sys.d_prime(), sys.h(), delta_f_max, tau))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcontSensitivity {
    /// ∂P_cont/∂τ, MW/s
    pub dp_dtau: f64,
    /// ∂P_cont/∂H, MW per MW·s/Hz
    pub dp_dh: f64,
}

/// Partial derivatives of the `K = 1` maximum contingency with respect to
/// τ and H:
///
/// ```text
/// ∂P/∂τ = −(D'Δf_max/τ)·S(A)·A^(1/(A−1))
/// ∂P/∂H =  (D'Δf_max/H)·S(A)·A^(1/(A−1)),   S(A) = (A − 1 − A ln A)/(A − 1)²
/// ```
pub fn sensitivity_pcont(sys: &SfrSystem, delta_f_max: f64, tau: f64) -> Result<PcontSensitivity> {
    check_special(sys, delta_f_max, tau)?;
    let a = a_ratio(sys, tau);
    let common = sys.d_prime() * delta_f_max * sensitivity_bracket(a) * unit_k_factor(a);
    Ok(PcontSensitivity {
        dp_dtau: -common / tau,
        dp_dh: common / sys.h(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauSensitivity {
    /// ∂τ'/∂PFR₁, s/MW (≤ 0)
    pub dtau_dpfr1: f64,
    /// ∂τ'/∂PFR₂, s/MW (≥ 0)
    pub dtau_dpfr2: f64,
}

/// Derivatives of the τ surface model with respect to the band magnitudes.
pub fn sensitivity_tau_bands(model: &TauSurfaceModel, pfr1: f64, pfr2: f64) -> Result<TauSensitivity> {
    if pfr1 == 0.0 {
        return Err(SfrError::SingularRatio(
            "PFR1 = 0 leaves the ratio PFR2/PFR1 undefined".into(),
        ));
    }
    if !(pfr1 > 0.0 && pfr2 >= 0.0 && pfr1.is_finite() && pfr2.is_finite()) {
        return invalid("band magnitudes must be finite with PFR1 > 0 and PFR2 >= 0");
    }
    let ab = model.a * model.b;
    let e = (-model.b * pfr2 / pfr1).exp();
    Ok(TauSensitivity {
        dtau_dpfr1: -ab * pfr2 / (pfr1 * pfr1) * e,
        dtau_dpfr2: ab / pfr1 * e,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSensitivity {
    pub dp_dpfr1: f64,
    pub dp_dpfr2: f64,
}

/// `∂P_cont/∂PFRᵢ = ∂P_cont/∂τ · ∂τ'/∂PFRᵢ` in the `K = 1` regime, with τ'
/// given by the surface model.
///
/// Only the τ channel is included; the direct dependence of the `K = 1`
/// constraint on total PFR is not.
pub fn sensitivity_pcont_bands(
    sys: &SfrSystem,
    delta_f_max: f64,
    model: &TauSurfaceModel,
    pfr1: f64,
    pfr2: f64,
) -> Result<BandSensitivity> {
    let dtau = sensitivity_tau_bands(model, pfr1, pfr2)?;
    let tau = model.tau_at_ratio(pfr2 / pfr1);
    let dp = sensitivity_pcont(sys, delta_f_max, tau)?;
    Ok(BandSensitivity {
        dp_dpfr1: dp.dp_dtau * dtau.dtau_dpfr1,
        dp_dpfr2: dp.dp_dtau * dtau.dtau_dpfr2,
    })
}

/// Central difference `(f(x+h) − f(x−h))/2h` with `h = rel_step·|x|`.
pub fn central_difference<F: Fn(f64) -> Result<f64>>(f: F, x: f64, rel_step: f64) -> Result<f64> {
    let h = rel_step * x.abs().max(f64::MIN_POSITIVE);
    Ok((f(x + h)? - f(x - h)?) / (2.0 * h))
}

/// ∂P_cont/∂K of [`max_contingency`], by central differences (no closed
/// form is used for general K).
pub fn dp_dk_finite_difference(sys: &SfrSystem, policy: &SecurityPolicy, tau: f64) -> Result<f64> {
    central_difference(
        |k| {
            max_contingency(
                sys,
                &SecurityPolicy {
                    k_policy: k,
                    ..*policy
                },
                tau,
            )
        },
        policy.k_policy,
        1e-5,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeCheck {
    pub analytic: f64,
    pub finite_difference: f64,
    pub rel_error: f64,
}

impl DerivativeCheck {
    fn new(analytic: f64, finite_difference: f64) -> Self {
        let scale = analytic.abs().max(finite_difference.abs());
        let rel_error = if scale == 0.0 {
            0.0
        } else {
            (analytic - finite_difference).abs() / scale
        };
        Self {
            analytic,
            finite_difference,
            rel_error,
        }
    }
}

/// All six derivatives with finite-difference checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub tau: f64,
    pub p_cont: f64,
    pub dp_dtau: DerivativeCheck,
    pub dp_dh: DerivativeCheck,
    pub dtau_dpfr1: DerivativeCheck,
    pub dtau_dpfr2: DerivativeCheck,
    pub dp_dpfr1: DerivativeCheck,
    pub dp_dpfr2: DerivativeCheck,
}

pub fn sensitivity_report(
    sys: &SfrSystem,
    delta_f_max: f64,
    model: &TauSurfaceModel,
    pfr1: f64,
    pfr2: f64,
) -> Result<SensitivityReport> {
    const REL_STEP: f64 = 1e-5;
    let tau_of = |p1: f64, p2: f64| model.tau_at_ratio(p2 / p1);
    let tau = tau_of(pfr1, pfr2);
    let d = sys.d_prime();
    let h = sys.h();
    let p = special_case_max_contingency(sys, delta_f_max, tau)?;
    let dp = sensitivity_pcont(sys, delta_f_max, tau)?;
    let dtau = sensitivity_tau_bands(model, pfr1, pfr2)?;
    let dpb = sensitivity_pcont_bands(sys, delta_f_max, model, pfr1, pfr2)?;

    let fd_tau = central_difference(|t| Ok(special_case(d, h, delta_f_max, t)), tau, REL_STEP)?;
    let fd_h = central_difference(|hh| Ok(special_case(d, hh, delta_f_max, tau)), h, REL_STEP)?;
    let fd_t1 = central_difference(|p1| Ok(tau_of(p1, pfr2)), pfr1, REL_STEP)?;
    let fd_p1 = central_difference(|p1| Ok(special_case(d, h, delta_f_max, tau_of(p1, pfr2))), pfr1, REL_STEP)?;
    // PFR₂ may be zero, so its step is taken relative to PFR₁.
    let step2 = REL_STEP * pfr1;
    let fd2 = |f: &dyn Fn(f64) -> f64| (f(pfr2 + step2) - f(pfr2 - step2)) / (2.0 * step2);
    let fd_t2 = fd2(&|p2| tau_of(pfr1, p2));
    let fd_p2 = fd2(&|p2| special_case(d, h, delta_f_max, tau_of(pfr1, p2)));

    Ok(SensitivityReport {
        tau,
        p_cont: p,
        dp_dtau: DerivativeCheck::new(dp.dp_dtau, fd_tau),
        dp_dh: DerivativeCheck::new(dp.dp_dh, fd_h),
        dtau_dpfr1: DerivativeCheck::new(dtau.dtau_dpfr1, fd_t1),
        dtau_dpfr2: DerivativeCheck::new(dtau.dtau_dpfr2, fd_t2),
        dp_dpfr1: DerivativeCheck::new(dpb.dp_dpfr1, fd_p1),
        dp_dpfr2: DerivativeCheck::new(dpb.dp_dpfr2, fd_p2),
    })
}

/// Share of fast response `PFR₁/(PFR₁ + PFR₂)` that yields an equivalent
/// time constant `tau_target`, by inverting the surface model.
pub fn required_ffr_share(model: &TauSurfaceModel, tau_target: f64) -> Result<f64> {
    let lo = model.tau1;
    let hi = model.tau_limit();
    if !(tau_target >= lo && tau_target < hi) || model.a <= 0.0 || model.b <= 0.0 {
        return Err(SfrError::Infeasible(format!(
            "tau {tau_target} s is outside the attainable range [{lo}, {hi}) s"
        )));
    }
    let ratio = -(-(tau_target - lo) / model.a).ln_1p() / model.b;
    Ok(1.0 / (1.0 + ratio))
}
