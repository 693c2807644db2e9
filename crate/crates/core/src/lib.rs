//! Differentiable monotonic alignment through 1D optimal transport.
//!
//! - [`ot`]: the closed-form coupling between two weighted bin sequences and
//!   its gradient.
//! - [`sotd`]: the sequence transport distance built on that coupling.
//! - [`ottc`]: the transport-weighted classification loss.
//! - [`ctc`]: a reference CTC implementation.
//! - [`metrics`]: alignment-quality metrics.
//! - [`lab`]: a small synthetic training harness.

pub mod cli;
pub mod ctc;
pub mod error;
pub mod io;
pub mod lab;
pub mod metrics;
pub mod ot;
pub mod ottc;
pub mod seq;
pub mod sotd;

pub use error::{Error, Result};
pub use ot::{compute_coupling, SimplexWeights, SparseCoupling, StrictSimplexWeights};
pub use seq::{LabelSequence, PosteriorMatrix, Segmentation, Span};
