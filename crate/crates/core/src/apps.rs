//! Illumination-aware edits on decomposed components.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::formation::{diffuse_image, IntrinsicComponents};
use crate::image::{linear_to_srgb, luminance, write_image, ColorSpace, LinearImage};

/// Residual below `-tau` in some channel marks a pixel as clipped.
pub const DEFAULT_TAU: f32 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EditOp {
    Despecularize,
    Whitebalance { keep_residual: bool },
    RecoverHighlights { exposure: f32, tau: f32 },
}

impl EditOp {
    pub fn validate(&self) -> Result<()> {
        if let EditOp::RecoverHighlights { exposure, tau } = *self {
            if !(exposure > 0.0 && exposure.is_finite()) {
                return Err(Error::Config(format!("exposure {exposure} must be positive")));
            }
            if !(tau >= 0.0 && tau.is_finite()) {
                return Err(Error::Config(format!("clip threshold {tau} must be non-negative")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditRequest {
    /// Components directory.
    pub components: PathBuf,
    pub op: EditOp,
    /// Output image; `.png` is written as 8-bit sRGB, anything else as IIDF.
    pub output: PathBuf,
}

fn clip01(img: &LinearImage) -> Result<LinearImage> {
    img.map(ColorSpace::Linear, |v| v.clamp(0.0, 1.0))
}

/// `clip(A_d * S_d, 0, 1)`, linear.
pub fn despecularize_linear(c: &IntrinsicComponents) -> Result<LinearImage> {
    clip01(&diffuse_image(&c.albedo, &c.shading)?)
}

/// The diffuse image, sRGB encoded.
pub fn despecularize(c: &IntrinsicComponents) -> Result<LinearImage> {
    linear_to_srgb(&despecularize_linear(c)?)
}

/// `A_d * lum(S_d)`, plus the positive residual if `keep_residual`,
/// linear and unclipped.
pub fn whitebalance_linear(c: &IntrinsicComponents, keep_residual: bool) -> Result<LinearImage> {
    let neutral = luminance(&c.shading)?.with_color_space(ColorSpace::Linear)?;
    let mut out = c.albedo.zip_map(&neutral, ColorSpace::Linear, |a, s| a * s)?;
    if keep_residual {
        out = out.zip_map(&c.residual, ColorSpace::Linear, |d, r| d + r.max(0.0))?;
    }
    Ok(out)
}

/// The white-balanced image clipped to [0, 1] and sRGB encoded.
pub fn whitebalance(c: &IntrinsicComponents, keep_residual: bool) -> Result<LinearImage> {
    linear_to_srgb(&clip01(&whitebalance_linear(c, keep_residual)?)?)
}

/// 1 where the residual drops below `-tau` in some channel.
pub fn clipped_mask(residual: &LinearImage, tau: f32) -> Result<LinearImage> {
    residual.ensure_channels(3, "clipped mask residual")?;
    let (r, g, b) = (residual.plane(0), residual.plane(1), residual.plane(2));
    let data = (0..residual.pixels())
        .map(|i| if r[i].min(g[i]).min(b[i]) < -tau { 1.0 } else { 0.0 })
        .collect();
    LinearImage::from_vec(residual.width(), residual.height(), 1, ColorSpace::Data, data)
}

/// Re-exposes the unclipped diffuse image: `clip(exposure * A_d * S_d)`,
/// linear, with the clipped-region mask.
pub fn recover_highlights_linear(
    c: &IntrinsicComponents,
    exposure: f32,
    tau: f32,
) -> Result<(LinearImage, LinearImage)> {
    EditOp::RecoverHighlights { exposure, tau }.validate()?;
    let hdr = diffuse_image(&c.albedo, &c.shading)?;
    let out = hdr.map(ColorSpace::Linear, |v| (exposure * v).clamp(0.0, 1.0))?;
    Ok((out, clipped_mask(&c.residual, tau)?))
}

pub fn recover_highlights(c: &IntrinsicComponents, exposure: f32, tau: f32) -> Result<(LinearImage, LinearImage)> {
    let (out, mask) = recover_highlights_linear(c, exposure, tau)?;
    Ok((linear_to_srgb(&out)?, mask))
}

/// Applies `op`; returns the encoded image and, for highlight recovery,
/// the mask.
pub fn apply_edit(c: &IntrinsicComponents, op: EditOp) -> Result<(LinearImage, Option<LinearImage>)> {
    op.validate()?;
    Ok(match op {
        EditOp::Despecularize => (despecularize(c)?, None),
        EditOp::Whitebalance { keep_residual } => (whitebalance(c, keep_residual)?, None),
        EditOp::RecoverHighlights { exposure, tau } => {
            let (img, mask) = recover_highlights(c, exposure, tau)?;
            (img, Some(mask))
        }
    })
}

/// Path of the mask written next to `output`.
pub fn mask_path(output: &Path) -> PathBuf {
    let stem = output
        .file_stem()
        .map_or("output".into(), |s| s.to_string_lossy().into_owned());
    let ext = output
        .extension()
        .map_or("iidf".into(), |s| s.to_string_lossy().into_owned());
    output.with_file_name(format!("{stem}_mask.{ext}"))
}

/// Loads the components, applies the edit and writes the result (and the
/// mask, as `<stem>_mask.<ext>`).
pub fn run_edit(req: &EditRequest) -> Result<()> {
    let c = IntrinsicComponents::load(&req.components)?;
    let (img, mask) = apply_edit(&c, req.op)?;
    write_image(&img, &req.output)?;
    if let Some(mask) = mask {
        write_image(&mask, &mask_path(&req.output))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn comps(image: [f32; 3], albedo: [f32; 3], shading: [f32; 3]) -> IntrinsicComponents {
        let img = |v: [f32; 3]| LinearImage::from_fn(2, 1, 3, ColorSpace::Linear, |c, _, _| v[c]).unwrap();
        IntrinsicComponents::from_diffuse(img(image), img(albedo), img(shading)).unwrap()
    }

    #[test]
    fn mask_threshold() {
        let c = comps([1.0, 1.0, 0.5], [0.5, 0.5, 0.5], [2.5, 2.0, 1.0]);
        assert_eq!(clipped_mask(&c.residual, 0.0).unwrap().data(), &[1.0, 1.0]);
        assert_eq!(clipped_mask(&c.residual, 0.25).unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn bad_parameters_are_rejected() {
        let c = comps([0.5; 3], [0.5; 3], [1.0; 3]);
        assert!(recover_highlights(&c, 0.0, 0.02).is_err());
        assert!(recover_highlights(&c, 1.0, -1.0).is_err());
    }

    #[test]
    fn mask_path_keeps_extension() {
        assert_eq!(mask_path(Path::new("/o/x.png")), PathBuf::from("/o/x_mask.png"));
    }
}
