//! Core library of the OrthoDoc engine: corpus ingestion, knowledge-graph
//! construction, graph-expanded BM25 retrieval, cross-modal fusion and
//! classification, grounded report generation and evaluation.

pub mod backend;
pub mod case;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod kgraph;
pub mod pipeline;
pub mod report;
pub mod retrieval;
pub mod scalar;
pub mod store;
pub mod text;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type FusionWeightsF64 = fusion::FusionWeights<f64>;
pub type FusionWeightsF32 = fusion::FusionWeights<f32>;
pub type ImageFeaturesF64 = fusion::ImageFeatures<f64>;
pub type TextEmbeddingF64 = fusion::TextEmbedding<f64>;
pub type ConditionPredictionF64 = fusion::ConditionPrediction<f64>;
pub type TrainingExampleF64 = fusion::TrainingExample<f64>;
