//! Dynamic knowledge-graph construction from text.
//!
//! A belief graph is built by generating sequences of timestamped graph
//! events (`node-add`, `node-delete`, `edge-add`, `edge-delete`) with a
//! temporal graph neural network conditioned on a textual observation and the
//! previous action. See the `book/` directory for a guided tour.

pub mod data;
pub mod embedding;
mod error;
pub mod eval;
pub mod graph;
pub mod nn;
pub mod train;

pub use error::{Error, Result};

// The guide's snippets run as doc-tests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/events.md")]
    mod events {}
    #[doc = include_str!("../../../book/src/commands.md")]
    mod commands {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/full-scale.md")]
    mod full_scale {}
}
