//! Image-formation models and the deterministic transforms between their
//! variables.
//!
//! Three models are related here:
//!
//! - grayscale diffuse: `I = A_g * S_g` with a single-channel shading,
//! - RGB diffuse: `I = A_c * S_c` with a three-channel shading,
//! - intrinsic residual: `I = A_d * S_d + R` with a signed residual.
//!
//! Shading chroma is carried as channel ratios `U = S_r / S_g`,
//! `V = S_b / S_g`, bounded into `C = [1/(U+1), 1/(V+1)]`. Diffuse shading
//! is predicted in the inverse space `D = 1/(S+1)`.
//!
//! All divisions between components use [`guarded_div`]: the divisor is
//! clamped from below at `eps`, which keeps the identities exact wherever
//! the divisor is at least `eps`.

mod components;

pub use components::{ComponentRole, IntrinsicComponents};

use crate::error::{Error, Result};
use crate::image::{luminance, upsample_bilinear, ColorSpace, LinearImage, LUMA_WEIGHTS};

/// Smallest distance a chroma value keeps from 0 and 1.
pub const CHROMA_MARGIN: f32 = 1e-6;

#[inline]
pub fn guarded_div(num: f32, den: f32, eps: f32) -> f32 {
    num / den.max(eps)
}

/// `num / max(den, eps)` elementwise, with single-channel broadcasting.
pub fn divide(num: &LinearImage, den: &LinearImage, eps: f32) -> Result<LinearImage> {
    num.zip_map(den, num.color_space(), |a, b| guarded_div(a, b, eps))
}

/// Two-channel shading chroma with both channels strictly inside (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct ChromaMap(LinearImage);

impl ChromaMap {
    pub fn new(img: LinearImage) -> Result<Self> {
        img.ensure_channels(2, "chroma map")?;
        if let Some(v) = img.data().iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
            return Err(Error::Domain(format!("chroma value {v} not inside (0, 1)")));
        }
        Ok(Self(img))
    }

    pub fn neutral(width: usize, height: usize) -> Self {
        Self(LinearImage::filled(width, height, 2, ColorSpace::Data, 0.5))
    }

    pub fn image(&self) -> &LinearImage {
        &self.0
    }

    pub fn into_image(self) -> LinearImage {
        self.0
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    pub fn upsample(&self, width: usize, height: usize) -> Result<ChromaMap> {
        ChromaMap::new(upsample_bilinear(&self.0, width, height)?)
    }
}

fn bound_ratio(ratio: f32) -> f32 {
    (1.0 / (ratio + 1.0)).clamp(CHROMA_MARGIN, 1.0 - CHROMA_MARGIN)
}

/// Splits an RGB shading into its luminance and bounded chroma.
pub fn shading_to_chroma(shading: &LinearImage, eps: f32) -> Result<(LinearImage, ChromaMap)> {
    shading.ensure_channels(3, "shading_to_chroma")?;
    if shading.data().iter().any(|&v| v < 0.0) {
        return Err(Error::Domain("shading must be non-negative".into()));
    }
    let lum = luminance(shading)?;
    let (r, g, b) = (shading.plane(0), shading.plane(1), shading.plane(2));
    let n = shading.pixels();
    let mut data = vec![0.0f32; 2 * n];
    for i in 0..n {
        let u = guarded_div(r[i], g[i], eps);
        let v = guarded_div(b[i], g[i], eps);
        data[i] = bound_ratio(u);
        data[n + i] = bound_ratio(v);
    }
    let c = LinearImage::from_vec(shading.width(), shading.height(), 2, ColorSpace::Data, data)?;
    Ok((lum.with_color_space(ColorSpace::Linear)?, ChromaMap(c)))
}

/// Rebuilds RGB shading from luminance and chroma: the ratios give the
/// direction `(U, 1, V)`, which is scaled so the luminance matches exactly.
pub fn chroma_to_shading(lum: &LinearImage, chroma: &ChromaMap) -> Result<LinearImage> {
    lum.ensure_channels(1, "chroma_to_shading luminance")?;
    lum.ensure_dims(chroma.image(), "chroma_to_shading")?;
    if lum.data().iter().any(|&v| v < 0.0) {
        return Err(Error::Domain("luminance must be non-negative".into()));
    }
    let c = chroma.image();
    let (cu, cv) = (c.plane(0), c.plane(1));
    let n = lum.pixels();
    let mut data = vec![0.0f32; 3 * n];
    let [wr, wg, wb] = LUMA_WEIGHTS;
    for (i, &l) in lum.data().iter().enumerate() {
        if cu[i] <= 0.0 || cu[i] >= 1.0 || cv[i] <= 0.0 || cv[i] >= 1.0 {
            return Err(Error::Domain(format!(
                "degenerate chroma ({}, {}) at pixel {i}",
                cu[i], cv[i]
            )));
        }
        let u = 1.0 / cu[i] - 1.0;
        let v = 1.0 / cv[i] - 1.0;
        let (r, g, b) = if u == 1.0 && v == 1.0 {
            (l, l, l)
        } else {
            let scale = l / (wr * u + wg + wb * v);
            (scale * u, scale, scale * v)
        };
        data[i] = r;
        data[n + i] = g;
        data[2 * n + i] = b;
    }
    LinearImage::from_vec(lum.width(), lum.height(), 3, ColorSpace::Linear, data)
}

/// `D = 1 / (S + 1)`.
pub fn inverse_shading(shading: &LinearImage) -> Result<LinearImage> {
    if shading.data().iter().any(|&v| v < 0.0) {
        return Err(Error::Domain("shading must be non-negative".into()));
    }
    shading.map(ColorSpace::Data, |s| (1.0 / (s as f64 + 1.0)) as f32)
}

/// `S = 1/D - 1` for `D` in (0, 1].
pub fn shading_from_inverse(inv: &LinearImage) -> Result<LinearImage> {
    if let Some(v) = inv.data().iter().find(|&&v| !(v > 0.0 && v <= 1.0)) {
        return Err(Error::Domain(format!("inverse shading {v} not in (0, 1]")));
    }
    inv.map(ColorSpace::Linear, |d| ((1.0 / d as f64) - 1.0).max(0.0) as f32)
}

/// The diffuse image `A_d * S_d`.
pub fn diffuse_image(albedo: &LinearImage, shading: &LinearImage) -> Result<LinearImage> {
    albedo.ensure_dims(shading, "diffuse image")?;
    albedo.zip_map(shading, ColorSpace::Linear, |a, s| a * s)
}

/// `R = I - A_d * S_d`, tagged as signed data.
pub fn compute_residual(image: &LinearImage, albedo: &LinearImage, shading: &LinearImage) -> Result<LinearImage> {
    image.ensure_channels(3, "residual image")?;
    let diffuse = diffuse_image(albedo, shading)?;
    diffuse.ensure_channels(3, "residual diffuse")?;
    image.zip_map(&diffuse, ColorSpace::Data, |i, d| i - d)
}

/// Grayscale decomposition implied by a known diffuse albedo:
/// `S_c = I / A_d`, `S_g = lum(S_c)`, `A_g = I / S_g`.
pub fn grayscale_oracle(image: &LinearImage, albedo: &LinearImage, eps: f32) -> Result<(LinearImage, LinearImage)> {
    image.ensure_channels(3, "grayscale oracle image")?;
    albedo.ensure_dims(image, "grayscale oracle")?;
    let rgb_shading = divide(image, albedo, eps)?;
    let gray_shading = luminance(&rgb_shading)?.with_color_space(ColorSpace::Linear)?;
    let gray_albedo = divide(image, &gray_shading, eps)?.with_color_space(ColorSpace::Linear)?;
    Ok((gray_albedo, gray_shading))
}

/// Colorizes grayscale shading with a (possibly low-resolution) chroma map
/// and derives the matching albedo: returns `(Â_c, Ŝ_c)`.
pub fn albedo_from_chroma(
    image: &LinearImage,
    gray_shading: &LinearImage,
    chroma_low: &ChromaMap,
    eps: f32,
) -> Result<(LinearImage, LinearImage)> {
    image.ensure_dims(gray_shading, "albedo_from_chroma")?;
    let chroma = chroma_low.upsample(image.width(), image.height())?;
    let shading = chroma_to_shading(gray_shading, &chroma)?;
    let albedo = divide(image, &shading, eps)?.with_color_space(ColorSpace::Linear)?;
    Ok((albedo, shading))
}
