//! Second-kind boundary integral solvers for multiply connected exterior
//! problems in the plane: electrostatic capacitance/elastance and Stokes
//! resistance/mobility for collections of rigid bodies.

pub mod error;
pub mod geometry;
pub mod kernels;
pub mod linsolve;
pub mod operators;
pub mod problems;
pub mod quadrature;
pub mod rules;
pub mod scenarios;

pub use error::{Error, Result};

/// Library version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use geometry::{perp, Body, BodySpec, Curve, Discretization, Point, Scheme};
