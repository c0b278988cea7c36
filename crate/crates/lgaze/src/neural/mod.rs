//! Residual MLPs with hand-written forward and backward passes.
//!
//! The two architectures (holistic and siamese) share a trunk of
//! Linear -> BatchNorm -> GELU residual blocks. Gradients are computed by
//! explicit reverse-mode passes over the fixed graph; there is no general
//! autodiff. Every layer owns its gradient buffers, and whole models expose
//! flat parameter/state vectors so the optimizer, checkpoints, and
//! finite-difference oracles all see one canonical ordering.

pub mod layers;
pub mod loss;
pub mod mlp;

pub use layers::Mode;
pub use loss::angular_loss_and_grad;
pub use mlp::{GazeMlp, HolisticMlp, MlpArch, SiameseMlp};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NeuralError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("train-mode forward needs a batch of at least 2 samples, got {0}")]
    BatchTooSmall(usize),
    #[error("prediction row {0} has near-zero norm")]
    ZeroPrediction(usize),
    #[error("tape does not match the current parameters or batch")]
    StaleTape,
    #[error("flat vector has wrong length: expected {expected}, got {got}")]
    BadFlatLength { expected: usize, got: usize },
}

/// Read cursor over a flat parameter/state vector.
pub(crate) struct Cursor<'a> {
    data: &'a [f64],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(data: &'a [f64]) -> Self {
        Self { data, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [f64], NeuralError> {
        if self.pos + n > self.data.len() {
            return Err(NeuralError::BadFlatLength { expected: self.pos + n, got: self.data.len() });
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn finish(&self) -> Result<(), NeuralError> {
        if self.pos != self.data.len() {
            return Err(NeuralError::BadFlatLength { expected: self.pos, got: self.data.len() });
        }
        Ok(())
    }
}
