//! Deep-hashing toolkit built around hinge-clamped metric losses.
//!
//! The crate trains small feed-forward encoders to emit K-bit binary hash
//! codes, retrieves by exact Hamming distance over bit-packed codes, and
//! evaluates retrieval and quantization quality. The central piece is the
//! hinge modification of cosine-based metric losses: negative pairs stop
//! being pushed apart once their cosine similarity drops below an
//! inflection constant derived from binary linear code distance bounds, so
//! the metric objective stops fighting the quantization objective near the
//! binarization points.

// Index loops in the numeric kernels address several arrays at once;
// iterator rewrites obscure them.
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod code_bounds;
pub mod config;
pub mod datasets;
pub mod error;
pub mod experiment;
pub mod hamming;
pub mod losses;
pub mod metrics;
pub mod num;
pub mod rng;
pub mod train;

pub use error::{HhfError, Result};
