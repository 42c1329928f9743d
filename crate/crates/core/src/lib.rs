//! Riemannian optimization on the unit sphere of the p-norm.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod csvio;
pub mod error;
pub mod geomcheck;
pub mod instances;
pub mod kernels;
pub mod manifold;
pub mod optimizer;
pub mod par;
pub mod problems;
mod roots;

pub use error::{Error, Result};
pub use kernels::RealVec;
pub use manifold::{InverseCheck, Point, RetractionKind, SpherePNorm, Tangent, TransportKind};
pub use optimizer::{Problem, SolveResult, SolverConfig};
