//! Constructive extension of Lipschitz maps from a compact point cloud
//! `Z ⊂ ℝ^m` into the Heisenberg group (or a Euclidean space), together
//! with the numerical certification suite for the construction's
//! geometric and integrability guarantees.
//!
//! Pipeline: Whitney cube decomposition of the complement of `Z`
//! ([`whitney`]) → simplicial subdivision with quality bounds
//! ([`triangulate`]) → Lipschitz extension over the n-skeleton and radial
//! homogenization ([`extend`]) → slope sampling, Sobolev-norm estimates,
//! and contact-equation residuals ([`analyze`]). Group arithmetic lives
//! in [`heis`], the target-space abstraction in [`oracle`].

pub mod analyze;
pub mod error;
pub mod extend;
pub mod heis;
pub mod io;
pub mod oracle;
pub mod par;
pub mod rng;
pub mod triangulate;
pub mod whitney;

pub use error::{Error, Result};
