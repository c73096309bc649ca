//! Tensor-Train linear algebra, structured operator builders, a
//! backward-error-driven TT-GMRES and bound diagnostics for all-in-one
//! parametric systems.
#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dense;
pub mod diagnostics;
pub mod dump;
pub mod error;
pub mod operators;
pub mod solver;
pub mod tt;

/// Crate version, echoed in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use dense::Mat;
pub use error::{Result, TtError};
pub use tt::*;
