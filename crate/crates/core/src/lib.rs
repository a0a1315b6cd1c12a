//! Document relevance classification with expert keyword knowledge.
//!
//! Keywords are scored on each document's word co-occurrence graph and the
//! resulting matrix is fed, next to the embedded text, into a two-branch
//! convolutional network. Numeric code is generic over the scalar type; the
//! aliases below fix it to `f64` (or `f32`).

pub mod centrality;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod graph;
pub mod nn;
pub mod pipeline;
pub mod scalar;

pub use error::{Error, ErrorKind, Result};
pub use scalar::{Scalar, Weight};

pub type Model = pipeline::Model<f64>;
pub type Model32 = pipeline::Model<f32>;
pub type ModelParams = nn::ModelParams<f64>;
pub type FeatureSet = pipeline::FeatureSet<f64>;
pub type EikMatrix = centrality::EikMatrix<f64>;
pub type Example = nn::Example<f64>;
