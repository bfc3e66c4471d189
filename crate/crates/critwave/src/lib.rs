pub mod bessel;
pub mod config;
pub mod conformal;
pub mod diagnostics;
pub mod error;
pub mod evolve;
pub mod field;
pub mod nonlin;
pub mod report;
pub mod scatter;
pub mod suites;

pub use error::{CritError, Result};
