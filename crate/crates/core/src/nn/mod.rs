//! Graph-to-grid cost map model: relational graph convolutions over the
//! scene graph, lattice extraction and a transposed-convolution decoder.

mod checkpoint;
mod config;
mod deconv;
mod gradcheck;
mod layout;
mod model;
mod rgcn;
mod topology;
mod train;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{transposed_out, Activation, ModelConfig, TrainConfig};
pub use deconv::ConvTranspose;
pub use layout::{ConvLayout, GraphLayerLayout, ParamLayout};
pub use model::{grid_extract, PreparedGraph, Sngnn2d};
pub use rgcn::{rgcn_backward, rgcn_forward, RgcnCache, RgcnWeights};
pub use topology::{GraphTopology, Group};
pub use gradcheck::{gradient_check, relative_error, GradCheckReport};
pub use train::{evaluate, prepare_samples, train, EpochRecord, PreparedSample, TrainHistory, TrainOutcome};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("graph structure: {0}")]
    Structure(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
}
