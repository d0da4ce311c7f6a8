//! Optimization-based coupling of a meshfree linear peridynamic solid (LPS)
//! model with trilinear hexahedral linear elasticity.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the experiment layer uses.

pub mod coupling;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod geometry;
pub mod io;
pub mod linsolve;
pub mod lps;
pub mod optim;
pub mod scalar;
pub mod sparse;
pub mod verification;

pub use error::{Error, Result};
pub use scalar::{Real, Vec3};

pub type BoxUnion = geometry::BoxUnion<f64>;
pub type Aabb = geometry::Aabb<f64>;
pub type PointCloud = geometry::PointCloud<f64>;
pub type HexMesh = geometry::HexMesh<f64>;
pub type Family = geometry::Family<f64>;
pub type PrenotchPlane = geometry::PrenotchPlane<f64>;
pub type Decomposition = geometry::Decomposition<f64>;
pub type MaterialParams = lps::MaterialParams<f64>;
pub type InfluenceFunction = lps::InfluenceFunction<f64>;
pub type SparseOperator = sparse::SparseOperator<f64>;
pub type CouplingProblem = coupling::CouplingProblem<f64>;
pub type ControlVector = coupling::ControlVector<f64>;
pub type LoadSpec = fem::LoadSpec<f64>;
pub type MmsCase = verification::MmsCase<f64>;

pub use experiments::{ExperimentConfig, ExperimentKind};
