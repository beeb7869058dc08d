pub mod diagnostics;
pub mod error;
pub mod hf;
pub mod io;
pub mod models;
pub mod numerics;
pub mod rng;
pub mod scf;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
