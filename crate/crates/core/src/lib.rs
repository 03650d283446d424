//! Asymptotic-preserving solver for the linearized p-system.

pub mod elliptic;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod parallel;
pub mod recovery;
pub mod schemes;
pub mod verification;

pub use error::{Error, Result};
