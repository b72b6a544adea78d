//! Numerical laboratory for the weighted Neumann-to-Dirichlet (Poincaré–Steklov)
//! eigenvalue problem of divergence-form elliptic operators on planar Lipschitz
//! domains.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: polygonal domains, graph charts, triangulation and the
//!   boundary-straightening map;
//! - [`assembly`]: coefficient fields and the P1 energy / boundary-weight forms;
//! - [`eigensolve`]: the generalized symmetric pencil `B x = μ A x`, counting
//!   functions and tail fits;
//! - [`weyl`]: the pointwise Weyl density and the integrated asymptotic
//!   coefficient;
//! - [`potentials`]: Nyström single/double layer operators and the
//!   Neumann-to-Dirichlet operator built from them;
//! - [`harness`]: experiment configuration, orchestration and reports.

pub mod assembly;
pub mod eigensolve;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod potentials;
pub mod sparse;
pub mod weyl;

pub use error::{Error, Result};
