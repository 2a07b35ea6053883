//! Neural components: encoders, aggregator, event decoder and heads.

mod aggregate;
mod decoder;
mod generate;
mod graph;
mod heads;
mod layers;
mod model;
mod params;
mod text;

pub use aggregate::CoAttention;
pub use decoder::{Decoder, EventEmbedder, EventRow, MEMORIES};
pub use generate::StepTrace;
pub use graph::{EdgeIndex, GraphEncoder, TransformerConv};
pub use heads::{indicator, LabelHead, NodeHead, TypeHead};
pub use layers::{causal_mask, linear, masked_log_softmax, masked_softmax, Attention, FeedForward, LayerNorm};
pub use model::{AttributeMatrices, LabelSet, Model, ModelConfig, SnapshotTargets, TeacherOutputs};
pub use params::ParamStore;

pub use candle_core::{DType, Device};
pub use text::{position_table, TextEncoder, WordEmbedding};
