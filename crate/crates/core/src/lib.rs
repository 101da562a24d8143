//! Top-k spatial textual cluster (k-STC) retrieval.
//!
//! Objects carry a location in the unit square and a weighted term vector.
//! A query asks for the `k` density-based clusters of keyword-relevant
//! objects that best combine proximity to a query point with textual
//! relevance. [`engine::QueryEngine`] answers queries over prebuilt
//! [`engine::Indexes`]; [`harness`] covers dataset ingest, synthetic data and
//! benchmarking.

pub mod engine;
pub mod error;
pub mod harness;
pub mod irtree;
pub mod model;
pub mod sgpl;
pub mod textindex;

pub use engine::{Indexes, QueryEngine, Variant, VariantConfig};
pub use error::{Error, Result};
pub use model::{Cluster, GeoObject, GeoPoint, ScoringConfig, StcQuery, TermVector};
