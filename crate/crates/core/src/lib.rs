//! Linear SL(2,R) cocycles over the Bernoulli shift on {0,1}^Z.
//!
//! Long products, Lyapunov exponents, first-return induced cocycles and exact moduli of
//! continuity for locally constant cocycles, including the perturbations B_k and L_k of the
//! diagonal cocycle A_{σ1}.

pub mod cocycle;
pub mod error;
pub mod events;
pub mod experiments;
pub mod exponent;
pub mod induction;
pub mod mat2;
pub mod modulus;
pub mod scan;
pub mod shift;
pub mod stats;

pub use error::{Error, Result};
