use super::{ColorSpace, LinearImage};
use crate::error::{Error, Result};

/// Rec.709 / sRGB primaries luminance weights.
pub const LUMA_WEIGHTS: [f32; 3] = [0.2126, 0.7152, 0.0722];

/// sRGB electro-optical transfer function for a single value in [0, 1].
pub fn srgb_decode(v: f32) -> f32 {
    let v = v as f64;
    let out = if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    };
    out as f32
}

/// Inverse of [`srgb_decode`]; the input is clamped to [0, 1] first.
pub fn srgb_encode(v: f32) -> f32 {
    let v = (v as f64).clamp(0.0, 1.0);
    let out = if v <= 0.0031308 {
        v * 12.92
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    };
    out as f32
}

pub fn srgb_to_linear(img: &LinearImage) -> Result<LinearImage> {
    if let Some(v) = img.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Domain(format!("sRGB value {v} outside [0, 1]")));
    }
    img.map(ColorSpace::Linear, srgb_decode)
}

pub fn linear_to_srgb(img: &LinearImage) -> Result<LinearImage> {
    img.map(ColorSpace::Srgb, srgb_encode)
}

/// Per-pixel Rec.709 luminance of a 3-channel image.
pub fn luminance(img: &LinearImage) -> Result<LinearImage> {
    img.ensure_channels(3, "luminance")?;
    let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
    let [wr, wg, wb] = LUMA_WEIGHTS;
    let data = r
        .iter()
        .zip(g)
        .zip(b)
        .map(|((&r, &g), &b)| {
            if r == g && g == b {
                // keep gray pixels exact
                r
            } else {
                wr * r + wg * g + wb * b
            }
        })
        .collect();
    LinearImage::from_vec(img.width(), img.height(), 1, img.color_space(), data)
}
