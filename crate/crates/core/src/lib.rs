//! Low-order system frequency response (SFR) toolkit.
//!
//! The SFR model is a single-machine equivalent of a power system:
//!
//! ```text
//! dΔf/dt + (D'/2H)·Δf = (p(t) − P_cont) / 2H
//! ```
//!
//! with `D' = D·P_load` and `H = KE/f_n`. This crate provides exact
//! closed-form solutions for lag and ramp primary frequency response (PFR),
//! nadir and RoCoF calculators, a fixed-step numerical oracle, a two-band to
//! single-band lag approximation and the maximum-contingency / sensitivity
//! calculators built on top of them.
//!
//! All computations are pure functions over immutable values.

pub mod applications;
pub mod band_approx;
pub mod closed_form;
pub mod error;
pub mod format;
pub mod lm;
pub mod model;
pub mod oracle;
pub mod scenario;
pub mod trace;

pub use error::{Result, SfrError};
pub use model::{DerivedParams, LagBand, RampBand, SfrSystem, SystemConditions};
pub use trace::FrequencyTrace;

/// Relative threshold used by every removable-singularity guard.
pub const SINGULAR_EPS: f64 = 1e-9;
