//! Pseudospectral simulation and verification of three non-local curvature
//! flows of closed immersed plane curves: the area-preserving flow, the
//! length-preserving flow, and the isoperimetric-ratio flow.
//!
//! A curve of rotation number n >= 1 is stored as uniformly spaced arc-length
//! samples of the complexified position f = f1 + i f2. The library provides
//! the geometric layer ([`geometry`]), the Fourier-side functionals and
//! identity/inequality checks ([`spectral`]), the adaptive flow integrator
//! ([`flow`]), quantitative verdicts for the conservation, blow-up and
//! convergence statements the flows satisfy ([`theorems`]), and an
//! independent finite-difference/quadrature oracle ([`oracle`]) used to
//! cross-check every spectral result through a separate computational route.

pub mod error;
pub mod fourier;
pub mod geometry;
pub mod oracle;
pub mod report;
pub mod spectral;
pub mod flow;
pub mod theorems;

pub use error::{Error, Result};

/// Scalar type used throughout the crate.
pub type Real = f64;
/// Complexified plane point, f = x + i y.
pub type Cx = num_complex::Complex64;
