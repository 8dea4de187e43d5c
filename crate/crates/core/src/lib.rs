//! Adaptive piecewise-linear finite elements for control-constrained elliptic
//! optimal control problems on planar domains.
//!
//! The control is discretized variationally: it is never stored as a finite
//! element function but evaluated pointwise from the discrete adjoint state
//! through the projection `u = max{a, min{b, -p/alpha}}`. Adaptivity is driven
//! by L2-norm residual indicators (element weight `h_T^4`, edge weight `h_E^3`),
//! Dörfler marking and newest-vertex bisection.
//!
//! Module map:
//!
//! * [`mesh`]: conforming triangulations, newest-vertex bisection, mesh-size function
//! * [`quadrature`]: Gauss rules on triangles and edges, kink-adapted element rules
//! * [`fe`]: assembly, Dirichlet elimination, SPD solves, interpolation, norms
//! * [`control`]: the discrete optimality system and its solvers
//! * [`estimator`]: residual indicators, data oscillation, effectivity
//! * [`adapt`]: marking, the SOLVE-ESTIMATE-MARK-REFINE loop, EOC and contraction reports
//! * [`problems`]: built-in benchmark problems
//! * [`vtk`], [`activeset`], [`compare`]: output used by the command line front end

pub mod activeset;
pub mod adapt;
pub mod compare;
pub mod control;
pub mod error;
pub mod estimator;
pub mod fe;
pub mod mesh;
pub mod problems;
pub mod quadrature;
pub mod vtk;

pub use error::{Error, Result};

/// A point in the plane.
pub type Point = [f64; 2];
