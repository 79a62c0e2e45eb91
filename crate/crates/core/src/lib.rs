//! Numerical gauge theory on discretized elliptic fibrations.
//!
//! The crate is organised by the objects it manipulates:
//!
//! - [`fiber`]: flat 2-tori `C/(Z + tau Z)` sampled on a uniform periodic grid,
//!   matrix-valued forms on them and spectral exterior/covariant calculus.
//! - [`gauge`]: unitary and Hermitian gauge actions, the covariant Laplacian
//!   spectrum, Yang–Mills gradient flow, gauge fixing and the Poincaré ratio.
//! - [`fibration`]: the total space `U x T^2` over a rectangular base patch, the
//!   semi-flat Kähler form, the holomorphic symplectic form, curvature
//!   decomposition into fiber/mixed/base parts and the residuals built on it.
//! - [`spectral`]: local spectral-cover data, the associated flat connection
//!   families, the Fourier–Mukai connection with its cocycle data and
//!   special-Lagrangian residuals.
//! - [`oracles`]: slow, independent reference implementations used by tests.
//!
//! Conventions used everywhere:
//!
//! - fiber coordinates `(y1, y2)` in `[0,1)^2` with `z = y1 + tau*y2`;
//! - the fiber area form is `dy1^dy2`, so every fiber has unit area;
//! - the four-dimensional orientation is `dx1^dx2^dy1^dy2`;
//! - holonomy is the ordered exponential of `+A` (inverse of parallel transport).

pub mod convergence;
pub mod error;
pub mod fibration;
pub mod fiber;
pub mod gauge;
pub mod linalg;
pub mod oracles;
pub mod poly;
pub mod sampling;
pub mod spectral;

pub use error::{LabError, Result};
pub use num_complex::Complex64 as C64;
