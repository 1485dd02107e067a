//! Numerical construction of multi-solitary waves for the focusing,
//! mass-subcritical nonlinear Schrödinger equation
//!
//! ```text
//! i u_t + Δ u = -|u|^{p-1} u   in Ω = R^d \ Θ,   u = 0 on ∂Ω,
//! ```
//!
//! outside a convex obstacle `Θ` (d = 1 or 2). The crate builds ground states,
//! the cutoff soliton ansatz, integrates the final-data problem backward with a
//! conservative Crank–Nicolson scheme, extracts modulation parameters and
//! measures the coercivity of the linearized energy functional.

pub mod ansatz;
pub mod error;
pub mod evolver;
pub mod experiments;
pub mod functionals;
pub mod geometry;
pub mod groundstate;
pub mod io;
pub mod linalg;
pub mod modulation;

pub use error::{Error, Result};
pub use num_complex::Complex64;
