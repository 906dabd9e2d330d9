//! Proportion-regularized semi-supervised learning for class-imbalanced data.
//!
//! The crate covers the whole experimental loop at desk scale:
//!
//! - [`ltdata`]: long-tailed class sizes, labeled/unlabeled/validation/test
//!   splits, a Gaussian-mixture generator and CSV ingestion.
//! - [`hypergeom`]: exact multivariate hypergeometric sampling, used to
//!   perturb the per-batch proportion target.
//! - [`nn`]: a one-hidden-layer perceptron with hand-written gradients.
//! - [`losses`]: supervised cross-entropy, thresholded pseudo-label
//!   consistency and the proportion loss.
//! - [`trainer`]: the training loop, evaluation and seed aggregation.
//! - [`cli`]: configuration files, experiment commands and SVG reports.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod checkpoint;
pub mod cli;
mod error;
pub mod hypergeom;
pub mod losses;
pub mod ltdata;
mod matrix;
pub mod nn;
pub mod trainer;

pub use error::{Error, Result};
pub use hypergeom::{ClassCounts, ProportionVector};
pub use ltdata::{DatasetSplit, Sample, SplitSpec};
pub use matrix::Matrix;
pub use nn::{LayerSizes, ModelParams};
pub use trainer::{RunResult, TrainConfig};
