//! Round-based simulation and verification of randomized distributed
//! vertex splitting, q-dividing, and their coloring applications.

pub mod color;
pub mod divide;
pub mod error;
pub mod graph;
pub mod lll;
pub mod rng;
pub mod runner;
pub mod sim;
pub mod split;
pub mod verify;

pub use error::{Error, Result};
