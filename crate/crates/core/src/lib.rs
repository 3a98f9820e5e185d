//! Quaternion convolutional networks for color images.
//!
//! Color pixels are treated as pure quaternions (0, r, g, b) instead of three
//! uncoupled scalars. Every filter tap rotates the color vector about the gray
//! axis (1,1,1) by a learned angle and scales it by a learned magnitude, so a
//! convolution mixes color structure instead of just weighting channels. The
//! rotation has a closed form: a circulant 3x3 matrix applied to (r, g, b),
//! which keeps the whole stack expressible as real GEMMs.
//!
//! The crate provides the algebra ([`quat`]), feature-map containers
//! ([`qtensor`]), forward/backward layer kernels ([`layers`]), network
//! assembly ([`net`]), training with checkpoints ([`training`]), finite
//! difference gradient verification ([`gradcheck`]), dataset loading and
//! corruption ([`data`]), evaluation metrics ([`metrics`]), and reference
//! architectures ([`presets`]).

pub mod data;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod metrics;
pub mod net;
pub mod num;
pub mod presets;
pub mod qtensor;
pub mod quat;
pub mod training;

pub use error::{Error, Result};
