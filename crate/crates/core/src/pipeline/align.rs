use crate::error::Result;
use crate::image::{luminance, LinearImage};
use crate::EPS;

/// Least-squares scale `argmin_a ||a·gt - reference||²` over raw values,
/// computed in `f64`. Falls back to 1 (with a warning) when `gt` has
/// energy below `EPS`.
pub fn scale_align(gt: &[f32], reference: &[f32]) -> f64 {
    assert_eq!(gt.len(), reference.len(), "scale_align operands differ in length");
    let (mut gr, mut gg) = (0.0f64, 0.0f64);
    for (&g, &r) in gt.iter().zip(reference) {
        gr += g as f64 * r as f64;
        gg += g as f64 * g as f64;
    }
    if gg < EPS as f64 {
        log::warn!("scale alignment on a near-zero target (energy {gg:.3e}); using 1");
        return 1.0;
    }
    gr / gg
}

/// Scale that best maps `gt` onto `reference`.
pub fn ls_scale_align(gt: &LinearImage, reference: &LinearImage) -> Result<f64> {
    gt.ensure_dims(reference, "scale alignment")?;
    Ok(scale_align(gt.data(), reference.data()))
}

/// Scale fitted on luminance, as used for shading-space targets.
pub fn ls_scale_align_luminance(gt: &LinearImage, reference: &LinearImage) -> Result<f64> {
    let lum = |img: &LinearImage| {
        if img.channels() == 3 {
            luminance(img)
        } else {
            Ok(img.clone())
        }
    };
    ls_scale_align(&lum(gt)?, &lum(reference)?)
}
