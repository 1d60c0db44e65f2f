//! Numerical laboratory for DT-operators.
//!
//! The crate samples the upper triangular random-matrix models of
//! DT-operators, estimates their Brown measures, evaluates Dyson volumes and
//! Selberg-type box integrals in log domain, and assembles these into a
//! finite-size lower-bound curve for the microstates free entropy dimension.
//!
//! ```
//! use dtlab::ensembles::{sample_dt, DTParams};
//! use dtlab::linalg::norm2;
//! use dtlab::measures::CompactMeasure;
//! use num_complex::Complex64;
//!
//! let mu = CompactMeasure::dirac(Complex64::new(0.0, 0.0));
//! let z = sample_dt(&DTParams::new(mu, 1.0, 512, 7)?)?;
//! assert!((norm2(&z)?.powi(2) - 0.5).abs() < 0.05);
//! # Ok::<(), dtlab::Error>(())
//! ```

// `!(x > 0.0)` is how NaN-rejecting preconditions are spelled here.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod brown;
pub mod dimension;
pub mod dyson;
pub mod ensembles;
mod error;
pub mod linalg;
pub mod measures;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod stats;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/matrices.md")]
    mod matrices {}
    #[doc = include_str!("../../../book/src/brown.md")]
    mod brown {}
    #[doc = include_str!("../../../book/src/box-integrals.md")]
    mod box_integrals {}
    #[doc = include_str!("../../../book/src/scan.md")]
    mod scan {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
