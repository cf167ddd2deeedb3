//! Measurement-induced localization of relative degrees of freedom.
//!
//! Two bosonic modes (optical cavities, or the two momentum components of a
//! split condensate) start in states with *no* defined relative phase; photon
//! or atom detections behind a beam splitter gradually localize the relative
//! phase Δ, and an analogous story localizes the relative *position* of two
//! scatterers. This crate implements both sides of that story and makes each
//! validate the other:
//!
//! - [`focksim`] — exact quantum-trajectory engine on a truncated two-mode
//!   Fock grid: detection/leakage Kraus updates, record sampling, exact
//!   record-probability enumeration.
//! - [`phaseloc`] — the analytic machinery: detection kernels
//!   sin^{2l}·cos^{2r} over Δ, peak locations and Gaussian asymptotics,
//!   closed-form record probabilities for Fock/Poissonian/thermal inputs.
//! - [`visibility`] — interference visibility of conditional states, with
//!   closed forms and expected-visibility curves.
//! - [`bec`] — condensate interference: position-dependent detections, the
//!   two-setting reduction, likely-event enumeration, fringe simulation.
//! - [`posloc`] — relative-position localization: rubber-cavity kernels,
//!   coarse-grained photon scattering, Bessel patterns, thermal priors.
//! - [`numkernel`] — shared log-domain special functions and quadrature.
//!
//! Everything that fans out over trajectories or ensemble members can run on
//! a rayon pool (feature `parallel`, on by default) with a serial fallback
//! that produces bit-identical results.

pub mod numkernel;
pub mod phaseloc;
pub mod focksim;
pub mod visibility;
pub mod bec;
pub mod posloc;
pub(crate) mod par;

use thiserror::Error;

/// Crate-wide error taxonomy. The CLI maps these onto exit codes, so keep
/// the split between configuration problems, truncation problems, and
/// numerical-contract violations.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A structurally invalid or unsupported configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// Requested state does not fit in the Fock-space truncation.
    #[error("cutoff overflow: {0}")]
    CutoffOverflow(String),
    /// A density has no usable interior peak.
    #[error("no peak: {0}")]
    NoPeak(String),
    /// Visibility of an identically-zero intensity curve.
    #[error("visibility undefined: {0}")]
    UndefinedVisibility(String),
    /// A computed quantity violates a numerical contract (normalization,
    /// cross-check mismatch, ...).
    #[error("validation failed: {0}")]
    Validation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
