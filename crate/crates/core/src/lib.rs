//! Γ-calculus, heat semigroups, Bakry-Émery curvature and Bobkov-type
//! inequality checks on finite reversible Markov triples.

pub mod calculus;
pub mod curvature;
pub mod error;
pub mod field;
pub mod gauss;
pub mod io;
pub mod semigroup;
pub mod spaces;
pub mod triple;
pub mod verifiers;

#[cfg(any(test, feature = "oracles"))]
pub mod oracles;

pub use curvature::{CurvatureReport, CurvatureValue};
pub use error::{Error, Invariant, Result};
pub use field::ScalarField;
pub use semigroup::SpectralCache;
pub use triple::{Edge, MarkovTriple, TripleOptions};
