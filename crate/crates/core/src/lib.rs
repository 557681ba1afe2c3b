//! Simulation and security analysis of continuous-variable quantum key
//! distribution with binary-phase-shift-keyed coherent polarization states
//! over a lossy free-space link.
//!
//! * [`qstate`]: coherent-state overlaps, Stokes relations, outcome normalization
//! * [`channel`]: transmittance, excess noise and detector unbalance
//! * [`homodyne`]: Monte Carlo homodyne outcomes, vacuum calibration, noise estimation
//! * [`security`]: postselected error rates, Holevo bound and key rate
//! * [`optimizer`]: optimal postselection threshold and signal amplitude
//! * [`montecarlo`]: end-to-end simulated runs checked against the analytic model

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod homodyne;
pub mod montecarlo;
pub mod numerics;
pub mod optimizer;
pub mod qstate;
pub mod security;

pub use error::{Error, Result};
