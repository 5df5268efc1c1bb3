//! Regression correction of Longley-Rice path-loss predictions from field
//! measurements.
//!
//! The crate covers the closed-form propagation quantities
//! ([`propagation`]), measurement ingestion and filtering ([`dataset`]),
//! OLS and least-absolute-residual fitting ([`regression`]), the residual
//! diagnostic battery ([`diagnostics`]) and the end-to-end correction
//! workflow ([`pipeline`]).

pub mod dataset;
pub mod diagnostics;
pub mod error;
pub mod pipeline;
pub mod propagation;
pub mod regression;

pub use error::{Error, Result};
