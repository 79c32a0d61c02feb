//! Colorful diffuse intrinsic image decomposition at desk scale.
//!
//! An image `I` is explained as `A_d * S_d + R`: a diffuse albedo, a
//! colorful (RGB) diffuse shading and a signed non-diffuse residual. The
//! crate is organised bottom-up:
//!
//! - [`image`]: planar float images, sRGB transfer, luminance, IIDF/PNG I/O.
//! - [`formation`]: the grayscale, RGB and residual formation models and the
//!   bijections between their variables (chroma `C`, inverse shading `D`).
//! - [`synth`]: a procedural generator of ground-truth decompositions.
//! - [`nn`]: a small reverse-mode autodiff engine, layers, losses and Adam.
//! - [`pipeline`]: the staged gray → chroma → albedo → diffuse networks, the
//!   single-network baseline and the ablation variants.
//! - [`metrics`]: LMSE, RMSE, scale-invariant RMSE, SSIM and the
//!   intensity/chromaticity pair.
//! - [`apps`]: specularity removal, per-pixel white balance and highlight
//!   recovery on decomposed components.

pub mod apps;
pub mod error;
pub mod formation;
pub mod image;
pub mod kv;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
pub use formation::IntrinsicComponents;
pub use image::{ColorSpace, LinearImage};

/// Guard added to every division between intrinsic components.
pub const EPS: f32 = 1e-4;
