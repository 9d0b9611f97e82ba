//! Lyapunov certificates, weighted super-Poincare profiles and heat kernel
//! bound verification for the diffusion generator L f = f'' - U' f'.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod exec;
pub mod grid;
pub mod kernel;
pub mod linalg;
pub mod lyapunov;
pub mod montecarlo;
pub mod pipeline;
pub mod potentials;
pub mod report;
pub mod spi;

pub use error::{Error, Result};
pub use exec::Execution;
