//! Steklov spectra of conformal factors on the unit circle.
//!
//! The crate computes, at finite Fourier truncation:
//!
//! - the Dirichlet-to-Neumann operator `Λ_a = a^{1/2} Λ a^{1/2}` of a positive
//!   normalized weight `a` on the circle, together with its Steklov spectrum;
//! - the regularized zeta difference `ζ_a(s) − 2ζ_R(s)` and the closed-form
//!   routes to the same quantities (Kogan's integral for `ζ_a(−1)`, the
//!   algebraic invariants `ζ_a(−2m)`);
//! - first and second variation formulas of `ζ_a` under deformations of `a`;
//! - the zeta-decreasing deformation flow
//!   `∂α/∂τ = −α(Λα) + (Hα)(Dα)` that drives any admissible `a` to the
//!   constant function `1`, with conservation and monotonicity monitors.
//!
//! Functions on the circle are trigonometric polynomials ([`TrigPoly`]);
//! operators are dense Hermitian matrices on the Fourier modes `|k| ≤ N`
//! ([`dtn::TruncatedOperator`]).

pub mod dtn;
pub mod flow;
pub mod harmonics;
pub mod zeta;

pub use harmonics::{ConformalFactor, HarmonicsError, MobiusParameter, Orientation, TrigPoly};

pub mod fixtures;
