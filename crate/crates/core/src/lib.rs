//! Solvers for the prescribed Jacobian equation `det ∇φ = f` on grid domains,
//! with `φ = id` near the boundary whenever `f = 1` there.
//!
//! Modules, bottom up:
//! - [`field_core`]: grid fields, difference operators, quadrature, Hölder
//!   norms, mollification and serialization.
//! - [`domain_geom`]: domains, signed distance, collars and exhaustion.
//! - [`div_solver`]: `div u = h` with `u = 0` on a collar.
//! - [`flow_transport`]: map interpolation, composition, inversion and the
//!   Moser flow.
//! - [`jacobian_solver`]: fixed-point, measure-corrected, general-domain and
//!   one-dimensional solvers plus volume correction.
//! - [`samples`]: manufactured densities and maps.

pub mod div_solver;
pub mod domain_geom;
pub mod error;
pub mod field_core;
pub mod flow_transport;
pub mod jacobian_solver;
pub mod samples;
pub mod tolerances;

pub use error::{Error, Result};
