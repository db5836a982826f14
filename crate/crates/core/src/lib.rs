//! MMSE single-crossing analysis for parallel Gaussian MIMO channels.

pub mod bc;
pub mod corpus;
pub mod crossing;
pub mod error;
pub mod immse;
pub mod input;
pub mod linalg;
pub mod matcher;
pub mod mmse;
pub mod path;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
