//! Domain types: grid conditions, derived parameters and PFR band shapes.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Grid state at the instant of a contingency.
///
/// `d_relief` is the load relief factor expressed as a fraction of load per
/// Hz (0.04 means 4 % of `p_load` per Hz). A positive `p_cont` is a
/// generation loss (under-frequency event); a negative one is a load loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConditions {
    pub f_n: f64,
    pub ke: f64,
    pub p_load: f64,
    pub d_relief: f64,
    pub p_cont: f64,
}

/// Load damping `D' = D·P_load` (MW/Hz) and system inertia `H = KE/f_n`
/// (MW·s/Hz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub d_prime: f64,
    pub h: f64,
}

impl SystemConditions {
    pub fn new(f_n: f64, ke: f64, p_load: f64, d_relief: f64, p_cont: f64) -> Self {
        Self {
            f_n,
            ke,
            p_load,
            d_relief,
            p_cont,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.f_n, self.ke, self.p_load, self.d_relief, self.p_cont]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return invalid("system conditions must be finite");
        }
        if self.f_n <= 0.0 {
            return invalid(format!("nominal frequency must be positive, got {}", self.f_n));
        }
        if self.ke <= 0.0 {
            return invalid(format!("kinetic energy must be positive, got {}", self.ke));
        }
        if self.p_load <= 0.0 {
            return invalid(format!("system load must be positive, got {}", self.p_load));
        }
        if self.d_relief < 0.0 {
            return invalid(format!("load relief factor must be non-negative, got {}", self.d_relief));
        }
        Ok(())
    }

    pub fn derive_params(&self) -> Result<DerivedParams> {
        self.validate()?;
        Ok(DerivedParams {
            d_prime: self.d_relief * self.p_load,
            h: self.ke / self.f_n,
        })
    }

    pub fn with_p_cont(mut self, p_cont: f64) -> Self {
        self.p_cont = p_cont;
        self
    }
}

/// Validated conditions bundled with their derived parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SfrSystem {
    pub conditions: SystemConditions,
    pub derived: DerivedParams,
}

impl SfrSystem {
    pub fn new(conditions: SystemConditions) -> Result<Self> {
        let derived = conditions.derive_params()?;
        Ok(Self { conditions, derived })
    }

    pub fn p_cont(&self) -> f64 {
        self.conditions.p_cont
    }

    pub fn d_prime(&self) -> f64 {
        self.derived.d_prime
    }

    pub fn h(&self) -> f64 {
        self.derived.h
    }

    /// Decay rate of the natural response, `D'/2H` (1/s).
    pub fn damping_rate(&self) -> f64 {
        self.derived.d_prime / (2.0 * self.derived.h)
    }

    /// Fails unless `D' > 0`; every closed form divides by it.
    pub fn require_damping(&self) -> Result<()> {
        if self.derived.d_prime > 0.0 {
            Ok(())
        } else {
            invalid(format!(
                "load damping D' = D·P_load must be positive, got {}",
                self.derived.d_prime
            ))
        }
    }

    /// Checks that a band magnitude has the same sign as the contingency.
    pub(crate) fn check_band_sign(&self, pfr: f64) -> Result<()> {
        let p = self.conditions.p_cont;
        if !pfr.is_finite() {
            return invalid("band magnitude must be finite");
        }
        if pfr != 0.0 && p != 0.0 && pfr.signum() != p.signum() {
            return invalid(format!(
                "band magnitude {pfr} MW must share the sign of the contingency {p} MW"
            ));
        }
        Ok(())
    }
}

/// First-order lag response `p(t) = pfr·(1 − e^(−t/τ))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagBand {
    pub pfr: f64,
    pub tau: f64,
}

impl LagBand {
    pub fn new(pfr: f64, tau: f64) -> Self {
        Self { pfr, tau }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.pfr.is_finite() {
            return invalid("lag band magnitude must be finite");
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return invalid(format!("lag time constant must be positive, got {}", self.tau));
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        self.validate()?;
        check_time(t)?;
        Ok(self.value_unchecked(t))
    }

    #[inline]
    pub(crate) fn value_unchecked(&self, t: f64) -> f64 {
        -self.pfr * (-t / self.tau).exp_m1()
    }
}

/// Linear ramp to `pfr` over `t_r` seconds, held flat afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampBand {
    pub pfr: f64,
    pub t_r: f64,
}

impl RampBand {
    pub fn new(pfr: f64, t_r: f64) -> Self {
        Self { pfr, t_r }
    }

    /// Ramp rate `R = pfr/t_r` in MW/s.
    pub fn rate(&self) -> f64 {
        self.pfr / self.t_r
    }

    pub fn validate(&self) -> Result<()> {
        if !self.pfr.is_finite() {
            return invalid("ramp band magnitude must be finite");
        }
        if !(self.t_r > 0.0 && self.t_r.is_finite()) {
            return invalid(format!("ramp time must be positive, got {}", self.t_r));
        }
        Ok(())
    }

    /// Clamped ramp value. The closed form in [`crate::closed_form`] does not
    /// clamp; only the numerical oracle sees the saturation.
    pub fn value(&self, t: f64) -> Result<f64> {
        self.validate()?;
        check_time(t)?;
        Ok(self.value_unchecked(t))
    }

    #[inline]
    pub(crate) fn value_unchecked(&self, t: f64) -> f64 {
        if t >= self.t_r {
            self.pfr
        } else {
            self.rate() * t
        }
    }
}

/// Sum of two lag bands.
pub fn two_band_pfr_value(b1: &LagBand, b2: &LagBand, t: f64) -> Result<f64> {
    Ok(b1.value(t)? + b2.value(t)?)
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        invalid(format!("time must be finite and non-negative, got {t}"))
    }
}

/// A set of PFR providers, all of one shape.
#[derive(Debug, Clone, PartialEq)]
pub enum PfrBands {
    Lag(Vec<LagBand>),
    Ramp(Vec<RampBand>),
}

impl PfrBands {
    pub fn len(&self) -> usize {
        match self {
            PfrBands::Lag(b) => b.len(),
            PfrBands::Ramp(b) => b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn total_pfr(&self) -> f64 {
        match self {
            PfrBands::Lag(b) => b.iter().map(|b| b.pfr).sum(),
            PfrBands::Ramp(b) => b.iter().map(|b| b.pfr).sum(),
        }
    }

    /// Aggregate PFR at time `t`. Ramp bands saturate at their magnitude.
    pub fn value(&self, t: f64) -> f64 {
        match self {
            PfrBands::Lag(b) => b.iter().map(|b| b.value_unchecked(t)).sum(),
            PfrBands::Ramp(b) => b.iter().map(|b| b.value_unchecked(t)).sum(),
        }
    }

    pub fn validate(&self, sys: &SfrSystem) -> Result<()> {
        if self.is_empty() {
            return invalid("at least one PFR band is required");
        }
        match self {
            PfrBands::Lag(bands) => {
                for b in bands {
                    b.validate()?;
                    sys.check_band_sign(b.pfr)?;
                }
            }
            PfrBands::Ramp(bands) => {
                for b in bands {
                    b.validate()?;
                    sys.check_band_sign(b.pfr)?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn derive_params_footnote_system() {
        let dp = SystemConditions::new(50.0, 9000.0, 2000.0, 0.04, 300.0)
            .derive_params()
            .unwrap();
        assert!(close(dp.d_prime, 80.0, 1e-12));
        assert!(close(dp.h, 180.0, 1e-12));
    }

    #[test]
    fn derive_params_contingency_example_system() {
        let dp = SystemConditions::new(50.0, 7000.0, 2500.0, 0.04, 400.0)
            .derive_params()
            .unwrap();
        assert!(close(dp.d_prime, 100.0, 1e-12));
        assert!(close(dp.h, 140.0, 1e-12));
    }

    #[test]
    fn zero_damping_is_representable_but_rejected_downstream() {
        let sys = SfrSystem::new(SystemConditions::new(50.0, 50.0, 1.0, 0.0, 1.0)).unwrap();
        assert_eq!(sys.d_prime(), 0.0);
        assert!(sys.require_damping().is_err());
    }

    #[test]
    fn derive_params_rejects_non_positive() {
        for sc in [
            SystemConditions::new(0.0, 9000.0, 2000.0, 0.04, 300.0),
            SystemConditions::new(50.0, -1.0, 2000.0, 0.04, 300.0),
            SystemConditions::new(50.0, 9000.0, 0.0, 0.04, 300.0),
            SystemConditions::new(50.0, 9000.0, 2000.0, -0.01, 300.0),
            SystemConditions::new(f64::NAN, 9000.0, 2000.0, 0.04, 300.0),
        ] {
            assert!(sc.derive_params().is_err(), "{sc:?}");
        }
    }

    #[test]
    fn lag_values() {
        assert_eq!(LagBand::new(100.0, 0.4).value(0.0).unwrap(), 0.0);
        let v = LagBand::new(100.0, 0.4).value(1.0).unwrap();
        assert!(close(v, 100.0 * (1.0 - (-2.5f64).exp()), 1e-12));
        assert!(close(v, 91.79, 5e-3));
        let v2 = LagBand::new(100.0, 2.0).value(5.0).unwrap();
        assert!(close(v, v2, 1e-12));
        assert!(LagBand::new(100.0, 0.4).value(-1.0).is_err());
        assert!(LagBand::new(100.0, 0.0).value(1.0).is_err());
    }

    #[test]
    fn ramp_values() {
        let r = RampBand::new(270.0, 6.0);
        assert_eq!(r.rate(), 45.0);
        assert!(close(r.value(3.0).unwrap(), 135.0, 1e-12));
        assert_eq!(r.value(0.0).unwrap(), 0.0);
        assert_eq!(r.value(10.0).unwrap(), 270.0);
        assert!(r.value(-0.1).is_err());
    }

    #[test]
    fn two_band_values() {
        let b1 = LagBand::new(130.0, 0.4);
        let b2 = LagBand::new(80.0, 2.0);
        assert_eq!(two_band_pfr_value(&b1, &b2, 0.0).unwrap(), 0.0);
        assert!(close(two_band_pfr_value(&b1, &b2, 1e6).unwrap(), 210.0, 1e-9));
        let expected = 130.0 * (1.0 - (-2.5f64).exp()) + 80.0 * (1.0 - (-0.5f64).exp());
        let v = two_band_pfr_value(&b1, &b2, 1.0).unwrap();
        assert!(close(v, expected, 1e-12));
        assert!(close(v, 150.81, 5e-3));
    }

    #[test]
    fn band_sign_must_match_contingency() {
        let sys = SfrSystem::new(SystemConditions::new(50.0, 9000.0, 2000.0, 0.04, -300.0)).unwrap();
        assert!(PfrBands::Lag(vec![LagBand::new(270.0, 2.0)]).validate(&sys).is_err());
        assert!(PfrBands::Lag(vec![LagBand::new(-270.0, 2.0)]).validate(&sys).is_ok());
        assert!(PfrBands::Ramp(vec![]).validate(&sys).is_err());
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn band_values_monotone_and_bounded(
            pfr in 0.0..1000.0f64, tau in 0.01..20.0f64, t in 0.0..100.0f64, dt in 0.0..10.0f64,
        ) {
            let lag = LagBand::new(pfr, tau);
            let ramp = RampBand::new(pfr, tau);
            prop_assert!(lag.value(t + dt).unwrap() >= lag.value(t).unwrap());
            prop_assert!(ramp.value(t + dt).unwrap() >= ramp.value(t).unwrap());
            prop_assert!(lag.value(t).unwrap() <= pfr);
            prop_assert!(ramp.value(t).unwrap() <= pfr);
        }

        #[test]
        fn two_band_commutes(
            p1 in 0.0..500.0f64, t1 in 0.05..10.0f64, p2 in 0.0..500.0f64, t2 in 0.05..10.0f64,
            t in 0.0..60.0f64,
        ) {
            let (a, b) = (LagBand::new(p1, t1), LagBand::new(p2, t2));
            prop_assert_eq!(two_band_pfr_value(&a, &b, t).unwrap(), two_band_pfr_value(&b, &a, t).unwrap());
        }

        #[test]
        fn derived_params_exact(d in 0.001..0.2f64, load in 1.0..1e5f64, ke in 1.0..1e6f64, f_n in 1.0..100.0f64) {
            let dp = SystemConditions::new(f_n, ke, load, d, 0.0).derive_params().unwrap();
            prop_assert!((dp.d_prime * f_n / (d * load * f_n) - 1.0).abs() <= 4.0 * f64::EPSILON);
            prop_assert_eq!(dp.h, ke / f_n);
        }
    }
}
