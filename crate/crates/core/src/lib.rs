//! Certified covering, packing, entropy and convex-separation numbers for
//! centrally symmetric convex bodies in low dimension, together with chaining
//! (γ_p) estimates and an experiment harness for polar-duality relations.
//!
//! Every upper bound on a covering number comes with an explicit set of
//! centers that [`certificate::verify`] can re-check from scratch, and every
//! lower bound comes either from a closed-form volume ratio or from an
//! explicit separated point set.

pub mod bodies;
pub mod bracket;
pub mod certificate;
pub mod covering;
pub mod duality_lab;
pub mod effort;
pub mod error;
pub mod gamma;
pub mod linalg;
pub mod lp;
pub mod nets;
#[cfg(test)]
mod proptests;
pub mod selftest;
pub mod separation;

pub use bodies::ConvexBody;
pub use bracket::Bracket;
pub use effort::Effort;
pub use error::{Error, Result};
