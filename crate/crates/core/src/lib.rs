//! Convolutional segmentation engine for detecting magnetic skyrmions in
//! greyscale Kerr-microscopy images.
//!
//! The crate implements the full stack from scratch: a rank-4 tensor type
//! with hand-derived forward/backward passes for every layer primitive, a
//! padded U-Net encoder–decoder, cross-entropy training with label smoothing
//! and callback-style scheduling, a synthetic data generator for desk-scale
//! experiments, and the evaluation tools (Matthews correlation coefficient,
//! connected-component analysis, greyscale probing) used to compare 2-class
//! and 3-class models.
//!
//! All numeric code is generic over the scalar type via [`scalar::Scalar`];
//! training runs in `f32`, while the gradient-check harness re-instantiates
//! the same layers in `f64` for its shadow mode.

pub mod activation;
pub mod adam;
pub mod checkpoint;
pub mod concat;
pub mod conv;
pub mod dropout;
pub mod augment;
pub mod components;
pub mod dataset;
pub mod error;
pub mod gemm;
pub mod grey;
pub mod gradcheck;
pub mod loss;
pub mod imageio;
pub mod mask;
pub mod metrics;
pub mod pool;
pub mod probe;
pub mod reference;
pub mod scalar;
pub mod scratch;
pub mod seeds;
pub mod softmax;
pub mod synth;
pub mod tensor;
pub mod train;
pub mod tta;
pub mod unet;
pub mod upconv;

pub use error::{CheckpointError, Error, Result};
pub use scalar::Scalar;
pub use tensor::{Shape, Tensor};

/// Training-precision tensor.
pub type Tensor32 = Tensor<f32>;
/// Shadow-mode (gradient check) tensor.
pub type Tensor64 = Tensor<f64>;
