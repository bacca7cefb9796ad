//! Search for hazardous regions of a black-box parameter space.
//!
//! A partition tree is rebuilt over all samples each iteration; a UCB
//! descent picks the leaf to sample next, favoring high risk, sparse
//! coverage and hazard boundaries. Finished runs are condensed into
//! axis-aligned hazardous domains and, when ground truth exists, scored.

pub mod acquisition;
pub mod classifier;
pub mod density;
pub mod error;
pub mod harness;
pub mod identify;
pub mod metrics;
pub mod objectives;
pub mod space;
pub mod stopping;
pub mod tree;

pub use error::{Error, Result};
pub use space::{HazardBox, SamplePoint, SampleRecord, SearchSpace};
