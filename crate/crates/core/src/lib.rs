//! Functional interpretability for 64-dimensional land cover embeddings.
//!
//! The pipeline runs many one-vs-rest classification experiments with
//! tree ensembles, ranks embedding dimensions by mean decrease in impurity,
//! retrains on progressively larger top-k subsets, and turns the resulting
//! log into an association matrix, per-class tipping points, and a
//! specialist/generalist taxonomy of dimensions.
//!
//! A synthetic world with planted dimensional roles stands in for real
//! embeddings and serves as the ground truth the analysis must recover.

pub mod analysis;
pub mod config;
pub mod data;
pub mod error;
pub mod fixture;
pub mod harness;
pub mod learners;
pub mod parallel;
pub mod report;
pub mod rng;
pub mod world;

pub use data::{DimensionId, EmbeddingSample, LandCoverClass, Metric, MetricVector, N_CLASSES, N_DIMS};
pub use error::{Error, Result};
