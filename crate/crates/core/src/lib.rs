//! Question answering over a knowledge graph by generating candidate core
//! chains, ranking them with trainable neural encoders, predicting auxiliary
//! constraints, and executing the assembled query graphs.
//!
//! The numeric substrate is generic over the scalar type (f32 or f64 through
//! [`Scalar`]); the aliases below pin the shipped pipeline to double
//! precision.

pub mod autodiff;
pub mod auxiliary;
pub mod candidates;
pub mod checkpoint;
pub mod dataset;
pub mod encoders;
pub mod error;
pub mod kg;
pub mod metrics;
pub mod pipeline;
pub mod query_graph;
pub mod scalar;
pub mod training;
pub mod vocab;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Scalar type of the shipped pipeline: double precision throughout, which
/// keeps the finite-difference gradient checks tight.
pub type Real = f64;

pub type Tensor = autodiff::Tensor<Real>;
pub type Tape = autodiff::Tape<Real>;
pub type ParamStore = autodiff::ParamStore<Real>;
pub type Gradients = autodiff::Gradients<Real>;
pub type AdamState = autodiff::AdamState<Real>;
pub type RankingModel = encoders::RankingModel<Real>;
pub type SequenceClassifier = auxiliary::SequenceClassifier<Real>;
pub type PipelineModels = pipeline::PipelineModels<Real>;
