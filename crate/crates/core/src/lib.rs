//! Stationary profiles of the infinitesimal model in the small-variance regime.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod error;
pub mod fixed_point;
pub mod gamma;
pub mod grid;
pub mod limit;
pub mod march;
pub mod mortality;
pub mod operator;
pub mod quadrature;

pub use error::{Error, Result, Stage};
pub use grid::{AlphaParameter, GridFunction};
pub use mortality::{MortalityModel, Polynomial, Preset};
pub use quadrature::QuadratureRule;
