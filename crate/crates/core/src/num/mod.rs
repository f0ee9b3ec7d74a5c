//! Minimal dense numeric layer: matrices, forward operations, and analytic
//! gradients for the encoder and loss family. No general autodiff, no
//! broadcasting; shapes are always explicit.

pub mod gradcheck;
mod matrix;
mod ops;

pub use matrix::{format_f64, Matrix, Parameter};
pub use ops::{
    logsumexp_shifted, logsumexp_shifted_backward, matmul, matmul_backward, row_cosine,
    row_cosine_backward, sgn, Activation,
};
