// SPDX-License-Identifier: Apache-2.0

//! Partially-regularized variational autoencoder for compressing massive-MIMO
//! CSI feedback sent over a noisy link.
//!
//! The crate covers the whole experimental loop:
//!
//! * [`numerics`]: tensors, reverse-mode autodiff, Adam, initializers.
//! * [`channel`]: synthetic multipath channels, angular-delay transform,
//!   normalization, datasets on disk.
//! * [`model`]: convolutional encoder/decoder, Gaussian codeword with
//!   reparameterization, the β-weighted loss, and the point-estimate baseline.
//! * [`trainer`]: minibatch training with KL annealing and β selection.
//! * [`evaluator`]: AWGN feedback channel, NMSE, and the sweep harnesses.
//! * [`cli`]: configuration, run manifests and the `prvnet` command.
//!
//! See `examples/` for one runnable program per capability.

pub mod channel;
pub mod cli;
pub mod error;
pub mod evaluator;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
