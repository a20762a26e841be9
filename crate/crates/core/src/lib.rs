//! Evaluation stack for synthetic tabular data: fidelity metrics between a
//! real dataset and a synthetic imitation, a fitted convex combination of
//! those metrics, and a train-on-synthetic/test-on-real utility protocol,
//! plus the analysis and reporting layers that tie them together.

pub mod analysis;
pub mod data;
pub mod error;
pub mod fidelity;
pub mod generators;
pub mod report;
pub mod rng;
pub(crate) mod stats;
pub mod supermetric;
pub mod utility;

pub use error::{Error, Result};
