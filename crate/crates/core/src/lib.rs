//! Order-robust derivative-free optimization over a hierarchical partition
//! of a box domain.

pub mod environments;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod learners;
pub mod partition;
pub mod rank;

pub use error::{Error, Result};
