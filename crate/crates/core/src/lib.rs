//! Coupling, contraction and propagation-of-chaos machinery for Lévy-driven
//! kinetic Langevin dynamics of McKean-Vlasov type.
//!
//! The crate is organised around five modules:
//!
//! * [`levy`]: jump measures, truncated sampling, overlap masses and the
//!   σ-envelope used to build the contraction metric.
//! * [`metrics`]: the drift model, the distances r_s / r_l / ρ and the full
//!   constants pipeline (rate, prefactor, interaction threshold, moment bound).
//! * [`dynamics`]: event-driven simulation of interacting particle systems and
//!   of law-proxy clouds.
//! * [`coupling`]: the refined basic / synchronous switching coupling for pairs
//!   of trajectories and for particle systems against independent copies.
//! * [`wasserstein`]: empirical W1 estimators and the two-sample KS test.

pub mod coupling;
pub mod dynamics;
pub mod levy;
pub mod metrics;
pub mod quadrature;
pub mod rng;
pub mod stats;
pub mod wasserstein;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("jump families are only available in dimension 1 (got {dim})")]
    UnsupportedDimension { dim: usize },
    #[error("overlap ratio queried at z = {z} where the density vanishes")]
    OutsideSupport { z: f64 },
    #[error("quadrature did not converge: achieved {achieved:e}, wanted {target:e}")]
    Quadrature { achieved: f64, target: f64 },
    #[error("no power envelope validates; the overlap bound vanishes at r = {r}")]
    EnvelopeInfeasible { r: f64 },
    #[error("friction condition fails: L_b^2/gamma^2 = {lhs} is not below 3*theta/4 = {rhs}")]
    FrictionCondition { lhs: f64, rhs: f64 },
    #[error("degenerate metric comparison: {0}")]
    DegenerateMetric(&'static str),
    #[error("non-finite state at t = {t}")]
    BlowUp { t: f64 },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("assignment size {n} exceeds the cap {cap}; use the entropic estimator")]
    SizeCap { n: usize, cap: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
