//! Numerical constructions of fractal separating vector fields and the
//! generalized Orlicz energies they defeat.
//!
//! The crate builds, for a cube `Ω = (-1,1)^d`, a bounded function `u`, a
//! skew-symmetric matrix field `A` and the divergence-free field `b = div A`
//! whose singularities live on a Cantor-type contact set. On top of these it
//! provides the energy models (variable exponent, double phase, weighted
//! p-energy), adaptive quadrature, the separating functionals, a Lavrentiev
//! gap scan, a convex-duality certificate and a discrete energy minimizer.

pub mod cantor;
pub mod error;
pub mod fields;
pub mod integrate;
pub mod minimize;
pub mod orlicz;
pub mod util;
pub mod verify;

pub use cantor::{CantorParams, CantorSet, FractalConfig, Regime};
pub use error::{Error, Result};
pub use fields::{FieldSample, Fields, LocalizedSample};
pub use integrate::{QuadPolicy, QuadResult, TailMajorant};
pub use minimize::{GridFunction, MinimizeResult, SolverPolicy};
pub use orlicz::OrliczModel;
pub use verify::{Certificate, CertificateScan, GapReport};

/// Maximum ambient dimension supported at runtime.
pub const MAX_DIM: usize = 3;

/// Fixed-size point/vector used throughout; only the first `d` entries are
/// meaningful.
pub type Point = [f64; MAX_DIM];

/// Skew-symmetric matrix storage, `a[i][j]`.
pub type Matrix = [[f64; MAX_DIM]; MAX_DIM];
