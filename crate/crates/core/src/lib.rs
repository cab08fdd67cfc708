//! Stance detection for headline/body pairs in the FNC-1 format.
//!
//! Numeric kernels (similarity, transport, topic divergences, boosting) are
//! generic over [`num::Scalar`]; the aliases below fix the precisions the
//! pipeline uses.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod gbdt;
pub mod num;
pub mod pipeline;
pub mod simil;
pub mod textproc;
pub mod topics;

pub use corpus::{ArticleBody, Dataset, Stance, StanceInstance};
pub use error::{Error, Result};
pub use eval::{fnc_score, ScoreReport};
pub use features::{FeatureResources, FeatureRow, FeatureVector};
pub use gbdt::TrainParams;
pub use pipeline::{StagePlan, TrainedPipeline, Variant};

/// Word vectors, kept in single precision to halve memory.
pub type Embeddings = simil::EmbeddingTable<f32>;
pub type FeatureMatrix = gbdt::DenseMatrix<f64>;
pub type Ensemble = gbdt::BoostedEnsemble<f64>;
pub type TransportProblem = simil::TransportProblem<f64>;
