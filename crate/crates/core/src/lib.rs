//! Inactive-period filtering, possession labelling and threshold tuning for
//! basketball player-tracking data.

pub mod cli;
pub mod filters;
pub mod ground_truth;
pub mod ingest;
pub mod model;
pub mod possession;
pub mod synth;
pub mod tuning;
