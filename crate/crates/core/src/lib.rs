//! Numerical laboratory for the stochastic Abelian-Higgs equations on `T²`.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod noise;
pub mod resonance;
pub mod sah;
pub mod cli;
pub mod covheat;
pub mod diagnostics;
pub mod spectral;
pub mod wick;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
