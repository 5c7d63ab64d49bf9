//! Casimir energy between rigid 3-D obstacles.
//!
//! The library discretizes the single-layer boundary operator at imaginary
//! wavenumbers with continuous piecewise-linear boundary elements, evaluates
//! the log-determinant ratio `xi(k) = log det(V(ik) Vt(ik)^-1)` (where `Vt`
//! is the block-diagonal part of `V`) with dense and Krylov-subspace solvers,
//! and integrates over the wavenumber with a decay-informed trapezoid plan
//! and Richardson extrapolation over mesh sizes.
//!
//! Modules mirror the stages of that pipeline:
//!
//! * [`geometry`] — triangulated multi-body scenes (generators, transforms,
//!   exact inter-body distance, OFF file I/O)
//! * [`bem`] — Galerkin assembly of the block operator matrix
//! * [`solvers`] — dense, Arnoldi and inverse-free Krylov log-det solvers,
//!   plus the subspace-recycled sweep over a wavenumber sequence
//! * [`energy`] — decay fit, cutoff selection, quadrature plan, full energy
//!   pipeline and Richardson extrapolation
//! * [`asymptotics`] — independent large-separation reference series for
//!   sphere pairs and the exponential decay bound
//! * [`driver`] — batch front end behind the `casimir` binary (JSON configs,
//!   CSV reports)
//!
//! All numerical kernels are generic over the scalar type through the
//! [`Real`] trait; `f64` is what the CLI and the test suite use.

pub mod asymptotics;
pub mod bem;
pub mod driver;
pub mod energy;
pub mod geometry;
pub mod linalg;
pub mod solvers;

use num_traits::{FromPrimitive, ToPrimitive};

/// Scalar type the whole pipeline is generic over.
///
/// `nalgebra::RealField` supplies the field operations and elementary
/// functions; the `num-traits` bounds give checked conversions from and to
/// `f64` for constants and reporting.
pub trait Real:
    nalgebra::RealField + FromPrimitive + ToPrimitive + Copy + Send + Sync + 'static
{
    /// Convert an `f64` constant into the scalar type.
    #[inline]
    fn c(x: f64) -> Self {
        Self::from_f64(x).expect("constant not representable in scalar type")
    }

    /// Lossy conversion to `f64` for reporting.
    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Errors shared by every module of the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid scene: {0}")]
    SceneInvalid(String),
    #[error("invalid transform: {0}")]
    InvalidTransform(String),
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("singular kernel evaluation: {0}")]
    SingularEval(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub use bem::{BlockMatrix, ImagWavenumber, P1Space};
pub use energy::{CasimirResult, DecayFit, QuadraturePlan};
pub use geometry::{Scene, SurfaceMesh};
pub use solvers::{EigenPairSet, SolverReport};

/// Concrete aliases for the default double-precision instantiation.
pub type Mesh64 = SurfaceMesh<f64>;
pub type Scene64 = Scene<f64>;
pub type BlockMatrix64 = BlockMatrix<f64>;
pub type SolverReport64 = SolverReport<f64>;
pub type CasimirResult64 = CasimirResult<f64>;

/// Single-precision aliases, mostly exercised by tests of the generic path.
pub type Mesh32 = SurfaceMesh<f32>;
pub type Scene32 = Scene<f32>;
pub type BlockMatrix32 = BlockMatrix<f32>;
