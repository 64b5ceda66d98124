//! Oscillation criteria and numerical cross-validation for linear matrix
//! Hamiltonian systems
//!
//! ```text
//! Φ' = A(t)Φ + B(t)Ψ,   Ψ' = C(t)Φ − A*(t)Ψ,   B = B* ⪰ 0,  C = C*
//! ```
//!
//! The crate evaluates sufficient oscillation criteria (including the case of
//! singular `B`) and checks their verdicts against direct simulation.

pub mod criteria;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod func;
pub mod linalg;
pub mod matfun;
pub mod oracle;
pub mod ode;
pub mod quad;
pub mod reduction;
pub mod system;

pub use error::{Error, Result};
