//! Computational free probability: exact Weingarten calculus, free moments via
//! non-crossing partitions, spectral measures, and a random-matrix laboratory
//! for checking asymptotic freeness of Wishart (and Wigner) matrices from
//! independent Hermitian matrices.

pub mod error;
pub mod experiments;
pub mod freemoments;
pub mod laws;
pub mod ncpart;
pub mod perm;
mod quadrature;
pub mod rmt;
pub mod spectra;
pub mod weingarten;

pub use error::{Error, Result};
