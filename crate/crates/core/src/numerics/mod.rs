// SPDX-License-Identifier: Apache-2.0

//! Dense `f32` tensors, the reverse-mode autodiff tape and its
//! finite-difference checker, Adam, and weight initializers.

mod adam;
mod gradcheck;
mod graph;
mod init;
mod kernels;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{gradcheck, GradCheck};
pub use graph::{Activation, Graph, Var};
pub use init::{he_init, lecun_init};
pub use tensor::{matmul, Tensor};
