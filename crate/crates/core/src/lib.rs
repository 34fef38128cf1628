//! Interval-constrained ODE models: contraction and paving of parameter
//! domains, conflict explanation, steady-state sampling, simulation and STL
//! monitoring.
//!
//! ```
//! use steadyscan::iron::builtin_iron_model;
//! use steadyscan::propagate::{propagate_fixpoint, DEFAULT_TOL};
//!
//! let m = builtin_iron_model();
//! let b = propagate_fixpoint(m.constraints(), &m.domain_box(), DEFAULT_TOL);
//! assert!(b.dims().iter().all(|d| !d.is_empty()));
//! ```

pub mod explain;
pub mod expr;
pub mod interval;
pub mod iron;
pub mod model;
pub mod ode;
pub mod parse;
pub mod propagate;
pub mod sampler;
pub mod stl;
pub mod trace;
