//! Modulation-classification benchmark: synthetic signal generation, DFT
//! features, four neural classifier architectures trained from scratch,
//! l2 FGSM/BIM attacks, and the harness that measures how attacks crafted on
//! a time-domain model transfer to a frequency-domain one.

pub mod attacks;
pub mod dataset;
pub mod error;
pub mod evalharness;
pub mod features;
pub mod pipeline;
pub mod sigsynth;
pub mod tensorcore;
pub mod zoo;

pub use dataset::{Domain, LabeledDataset};
pub use error::{AmcError, Result};
