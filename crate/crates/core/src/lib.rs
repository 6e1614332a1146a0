//! Entity-enriched transformer re-ranking.
//!
//! A first-stage BM25 run over entity abstracts is re-ranked by a small
//! transformer encoder whose input sequence interleaves word pieces with
//! entity tokens. Entity tokens are embedded by a linear map fitted from a
//! joint word/entity embedding space into the encoder's token space.

pub mod alignment;
pub mod cli;
pub mod corpus;
pub mod embeddings;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod pipeline;
pub mod retrieval;
pub mod synth;
pub mod text;
pub mod tokenizer;

pub use error::{Error, Result};
