//! k-strip: brain extraction performed directly on complex-valued MRI k-space.
//!
//! The crate is a small self-contained complex-valued deep learning stack:
//! tensors with an exact radix-2 FFT, a reverse-mode tape, the complex layers
//! of the k-strip U-Net, a synthetic phantom data pipeline, training and the
//! segmentation metrics used to score the reconstructed brain masks.

pub mod autograd;
pub mod ctensor;
pub mod error;
pub mod evaluation;
pub mod data;
pub mod layers;
pub mod mask;
pub mod model;
pub mod training;

pub use ctensor::{ComplexTensor, RealTensor};
pub use error::{Error, Result};
