//! Numerical toolkit for Brascamp–Lieb data: finiteness, gaussian
//! extremisers, quadrature of the functional, nonlinear localized checks and
//! the scale schedule of the induction-on-scales argument.

pub mod cli;
pub mod datum;
pub mod error;
pub mod finiteness;
pub mod functional;
pub mod gaussian;
pub mod io;
pub mod linalg;
pub mod nonlinear;
pub mod schedule;

pub use error::{Error, Result};
