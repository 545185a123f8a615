//! Minimal dense reverse-mode differentiation over `f64` tensors.
//!
//! Shapes must match exactly for elementwise ops; the only broadcast is
//! [`Tape::scalar_mul`]. Row broadcasting is expressed with [`Tape::gather`]
//! over repeated indices.

mod gradcheck;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, grad_check_with, relative_error, GradCheckReport, Stencil};
pub use tape::{Gradients, Indices, Tape, Var};
pub use tensor::Tensor;

use std::sync::Arc;

/// Build an [`Indices`] list.
pub fn indices(values: impl IntoIterator<Item = usize>) -> Indices {
    values.into_iter().collect::<Vec<_>>().into()
}

/// `n` copies of row 0, for broadcasting a `1 x d` row.
pub fn repeat_row(n: usize) -> Indices {
    Arc::from(vec![0usize; n])
}
