//! Anisotropic Riemannian manifold graphs on the Lie groups SE(2) and SO(3).
//!
//! The crate samples vertices on the group (with the isotropic plane and
//! sphere as degenerate cases), connects them by K nearest neighbours under
//! a left-invariant log-norm distance, and assembles the symmetric
//! normalized Laplacian. On top of that it provides Chebyshev filtering,
//! heat diffusion, eigenmaps, permutation-equivariance audits and a small
//! hand-differentiated Chebyshev network.

pub mod error;
pub mod graph;
pub mod io;
pub mod lie_group;
pub mod network;
pub mod rng;
pub mod sampling;
pub mod sparse;
pub mod spectral;

pub use error::{Error, Result};
pub use graph::{GraphConfig, Laplacian, ManifoldGraph};
pub use lie_group::{AlgebraVector, GroupElement, GroupKind, Metric};
pub use sampling::{GridKind, GridSpec, VertexSet};
pub use sparse::Csr;
