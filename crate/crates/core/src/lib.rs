//! Late-fusion multimodal models for five-level emergency triage acuity.
//!
//! The crate is organised bottom-up:
//!
//! - [`ingest`]: CSV parsing, cleaning, cohort separation and stratified splits.
//! - [`gbdt`]: second-order gradient-boosted trees for the tabular vitals
//!   (multiclass softmax and ordinal squared-error variants).
//! - [`text`]: n-gram TF-IDF with a linear softmax classifier, a single-layer
//!   scaled dot-product attention classifier, and the probability-exchange
//!   file format for externally produced text probabilities.
//! - [`fusion`]: stacking of per-modality probability vectors, modality
//!   dropout and the logistic-regression meta-classifier.
//! - [`metrics`]: quadratic weighted kappa and the usual multiclass scores.
//! - [`synthgen`]: seeded synthetic adult/pediatric cohorts.
//! - [`experiment`]: the experiment runner behind the `triage` binary.
//!
//! Runnable walkthroughs of each capability live in the crate's `examples/`
//! directory.

pub mod error;
pub mod experiment;
pub mod fusion;
pub mod gbdt;
pub mod ingest;
pub mod metrics;
pub mod synthgen;
pub mod text;

mod linalg;
mod seed;

pub use error::{Error, Result};
pub use seed::derive_seed;

/// Number of acuity levels (ESI 1..=5).
pub const NUM_LEVELS: usize = 5;

/// Probability vector over the five acuity levels, index 0 = level 1.
pub type ProbVector = [f64; NUM_LEVELS];
