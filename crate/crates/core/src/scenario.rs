//! Scenario files: system conditions, PFR bands and simulation grid.
//!
//! ```json
//! {
//!   "system": {"f_n_hz": 50, "ke_mws": 9000, "p_load_mw": 2000,
//!              "d_relief": 0.04, "p_cont_mw": 300},
//!   "bands": [{"kind": "lag", "pfr_mw": 270, "tau_s": 2.0}],
//!   "sim": {"t_end_s": 30, "dt_s": 0.001}
//! }
//! ```
//!
//! Overrides address fields by dotted path (`system.ke_mws=7000`,
//! `bands.0.tau_s=1.5`) and are applied to the raw JSON before it is typed.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{invalid, Result, SfrError};
use crate::model::{LagBand, PfrBands, RampBand, SfrSystem, SystemConditions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub f_n_hz: f64,
    pub ke_mws: f64,
    pub p_load_mw: f64,
    pub d_relief: f64,
    pub p_cont_mw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BandSpec {
    Lag { pfr_mw: f64, tau_s: f64 },
    Ramp { pfr_mw: f64, t_r_s: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub t_end_s: f64,
    pub dt_s: f64,
}

impl Default for SimSpec {
    fn default() -> Self {
        Self {
            t_end_s: 30.0,
            dt_s: 0.001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub system: SystemSpec,
    #[serde(default)]
    pub bands: Vec<BandSpec>,
    #[serde(default)]
    pub sim: SimSpec,
}

impl Scenario {
    /// Parses scenario JSON, applying `key=value` overrides first.
    pub fn from_json_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: Value = serde_json::from_str(text)
            .map_err(|e| SfrError::InvalidInput(format!("malformed scenario JSON: {e}")))?;
        for ov in overrides {
            apply_override(&mut value, ov)?;
        }
        let scenario: Scenario = serde_json::from_value(value)
            .map_err(|e| SfrError::InvalidInput(format!("invalid scenario: {e}")))?;
        scenario.system()?;
        for b in &scenario.bands {
            b.validate()?;
        }
        Ok(scenario)
    }

    pub fn conditions(&self) -> SystemConditions {
        let s = &self.system;
        SystemConditions::new(s.f_n_hz, s.ke_mws, s.p_load_mw, s.d_relief, s.p_cont_mw)
    }

    pub fn system(&self) -> Result<SfrSystem> {
        SfrSystem::new(self.conditions())
    }

    /// Bands as a single-shape set; mixed lag and ramp lists are rejected.
    pub fn pfr_bands(&self) -> Result<PfrBands> {
        if self.bands.is_empty() {
            return invalid("scenario has no PFR bands");
        }
        let lags: Vec<LagBand> = self
            .bands
            .iter()
            .filter_map(|b| match *b {
                BandSpec::Lag { pfr_mw, tau_s } => Some(LagBand::new(pfr_mw, tau_s)),
                _ => None,
            })
            .collect();
        let ramps: Vec<RampBand> = self
            .bands
            .iter()
            .filter_map(|b| match *b {
                BandSpec::Ramp { pfr_mw, t_r_s } => Some(RampBand::new(pfr_mw, t_r_s)),
                _ => None,
            })
            .collect();
        let bands = match (lags.is_empty(), ramps.is_empty()) {
            (false, true) => PfrBands::Lag(lags),
            (true, false) => PfrBands::Ramp(ramps),
            _ => return invalid("closed forms need all bands of one kind (lag or ramp)"),
        };
        bands.validate(&self.system()?)?;
        Ok(bands)
    }

    /// Aggregate PFR as a function of time, any band mix; ramps saturate.
    pub fn pfr_function(&self) -> impl Fn(f64) -> f64 + '_ {
        move |t| {
            self.bands
                .iter()
                .map(|b| match *b {
                    BandSpec::Lag { pfr_mw, tau_s } => LagBand::new(pfr_mw, tau_s).value_unchecked(t),
                    BandSpec::Ramp { pfr_mw, t_r_s } => RampBand::new(pfr_mw, t_r_s).value_unchecked(t),
                })
                .sum()
        }
    }

    pub fn total_pfr(&self) -> f64 {
        self.bands
            .iter()
            .map(|b| match *b {
                BandSpec::Lag { pfr_mw, .. } | BandSpec::Ramp { pfr_mw, .. } => pfr_mw,
            })
            .sum()
    }

    /// Checks every band's shape and its sign against the contingency.
    pub fn validate_bands(&self) -> Result<()> {
        let sys = self.system()?;
        for b in &self.bands {
            b.validate()?;
            match *b {
                BandSpec::Lag { pfr_mw, .. } | BandSpec::Ramp { pfr_mw, .. } => sys.check_band_sign(pfr_mw)?,
            }
        }
        Ok(())
    }
}

impl BandSpec {
    fn validate(&self) -> Result<()> {
        match *self {
            BandSpec::Lag { pfr_mw, tau_s } => LagBand::new(pfr_mw, tau_s).validate(),
            BandSpec::Ramp { pfr_mw, t_r_s } => RampBand::new(pfr_mw, t_r_s).validate(),
        }
    }
}

/// Applies one `dotted.path=value` override. The value is parsed as JSON
/// when possible and kept as a string otherwise.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| SfrError::InvalidInput(format!("override `{assignment}` is not key=value")))?;
    let new_value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return invalid(format!("override path `{path}` has an empty segment"));
    }
    let mut node = root;
    for (depth, key) in keys.iter().enumerate() {
        let last = depth + 1 == keys.len();
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(key.to_string(), new_value);
                    return Ok(());
                }
                map.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = key
                    .parse()
                    .map_err(|_| SfrError::InvalidInput(format!("`{key}` in `{path}` is not an array index")))?;
                let len = items.len();
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| SfrError::InvalidInput(format!("index {idx} in `{path}` is out of range ({len})")))?;
                if last {
                    *slot = new_value;
                    return Ok(());
                }
                slot
            }
            _ => return invalid(format!("`{path}` descends into a scalar")),
        };
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "system": {"f_n_hz": 50, "ke_mws": 9000, "p_load_mw": 2000, "d_relief": 0.04, "p_cont_mw": 300},
        "bands": [{"kind": "lag", "pfr_mw": 270, "tau_s": 2.0}],
        "sim": {"t_end_s": 30, "dt_s": 0.001}
    }"#;

    #[test]
    fn parses_schema() {
        let sc = Scenario::from_json_str(BASE, &[]).unwrap();
        let sys = sc.system().unwrap();
        assert_eq!(sys.d_prime(), 80.0);
        assert_eq!(sys.h(), 180.0);
        assert_eq!(sc.pfr_bands().unwrap(), PfrBands::Lag(vec![LagBand::new(270.0, 2.0)]));
        assert_eq!(sc.sim.dt_s, 0.001);
    }

    #[test]
    fn overrides() {
        let sc = Scenario::from_json_str(
            BASE,
            &["system.ke_mws=7000".into(), "bands.0.tau_s=1.5".into(), "sim.t_end_s=10".into()],
        )
        .unwrap();
        assert_eq!(sc.system.ke_mws, 7000.0);
        assert_eq!(sc.bands[0], BandSpec::Lag { pfr_mw: 270.0, tau_s: 1.5 });
        assert_eq!(sc.sim.t_end_s, 10.0);

        let ramp = Scenario::from_json_str(
            BASE,
            &[r#"bands.0={"kind":"ramp","pfr_mw":270,"t_r_s":6}"#.into()],
        )
        .unwrap();
        assert!(matches!(ramp.pfr_bands().unwrap(), PfrBands::Ramp(_)));
    }

    #[test]
    fn rejects_bad_input() {
        for (text, ov) in [
            ("", vec![]),
            ("{}", vec![]),
            (BASE, vec!["system.ke_mws=-1".to_string()]),
            (BASE, vec!["system.bogus=1".to_string()]),
            (BASE, vec!["bands.3.tau_s=1".to_string()]),
            (BASE, vec!["bands.0.tau_s=0".to_string()]),
            (BASE, vec!["no_equals".to_string()]),
            (BASE, vec!["bands.0.kind=step".to_string()]),
        ] {
            let err = Scenario::from_json_str(text, &ov).unwrap_err();
            assert!(err.is_validation(), "{text:?} {ov:?}: {err}");
        }
    }

    #[test]
    fn mixed_bands_only_for_oracle() {
        let sc = Scenario::from_json_str(
            BASE,
            &[r#"bands=[{"kind":"lag","pfr_mw":100,"tau_s":1},{"kind":"ramp","pfr_mw":100,"t_r_s":2}]"#.into()],
        )
        .unwrap();
        assert!(sc.pfr_bands().is_err());
        let p = sc.pfr_function();
        assert!((p(100.0) - 200.0).abs() < 1e-9);
        assert_eq!(sc.total_pfr(), 200.0);
    }

    #[test]
    fn error_mentions_missing_field() {
        let text = r#"{"system": {"f_n_hz": 50, "p_load_mw": 2000, "d_relief": 0.04, "p_cont_mw": 300}}"#;
        let err = Scenario::from_json_str(text, &[]).unwrap_err().to_string();
        assert!(err.contains("ke_mws"), "{err}");
    }
}
