//! Compact three-level fourth-order scheme for the 1D wave equation with
//! nonsmooth data, a spectral reference for harmonic data and an experiment
//! harness.

pub mod data;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod operators;
pub mod oracle;
pub mod quadrature;
pub mod reference;
pub mod scheme;

pub use data::{DataSpec, Forcing, NodeConvention, PiecewisePolynomial, Profile, TimeProfile, U1Variant};
pub use error::{Error, Result};
pub use grid::{GridFn, MeshSpec, SpaceNorm, TimeAggregate, Trajectory};
pub use operators::{ImplicitOperator, SpatialOp};
pub use scheme::{evolve, evolve_grid, evolve_with, ErrorMode, ErrorReport, ExactSolution, SchemeRun, V0Mode};
pub use oracle::{DispersionRecord, HarmonicCoefficients, HarmonicDataKind};
