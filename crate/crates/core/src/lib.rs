//! Numerical toolkit for nonlocal Neumann problems driven by the fractional
//! p-Laplacian: singular-kernel quadrature over the cross-shaped pair set,
//! the nonlocal energy and its first variation, numerical multiplicity
//! certificates with admissible λ-intervals, and a deflated multistart
//! search for distinct discrete weak solutions.
//!
//! All numerics are generic over the floating scalar (`f32`/`f64`) via
//! [`real::Real`]; the `*64` aliases below cover the common case.

pub mod certify;
pub mod energy;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod mesh;
pub mod model;
pub mod real;
pub mod report;
pub mod solve;
pub mod space;

pub use error::{Error, Result};
pub use real::{real, Real};

pub type FracParams64 = mesh::FracParams<f64>;
pub type Domain64 = mesh::Domain<f64>;
pub type Mesh64 = mesh::Mesh<f64>;
pub type QuadratureTable64 = kernel::QuadratureTable<f64>;
pub type DiscreteFunction64 = space::DiscreteFunction<f64>;
pub type Coefficient64 = model::Coefficient<f64>;
pub type Nonlinearity64 = model::Nonlinearity<f64>;
pub type Certificate64 = certify::Certificate<f64>;
pub type Instance64 = solve::Instance<f64>;
pub type SolveConfig64 = solve::SolveConfig<f64>;
pub type SolveReport64 = solve::SolveReport<f64>;
