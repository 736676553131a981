//! Axisymmetric Euler (no swirl) vortex dynamics in dimensions 3 to 6, with a
//! numerical harness for the velocity and vorticity inequalities that control
//! vortex stretching.

pub mod biot_savart;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod field;
pub mod inequalities;
pub mod kernels;
pub mod quadrature;
pub mod sum;

pub use error::{Error, Result};
