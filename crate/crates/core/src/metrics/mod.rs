//! Image comparison metrics.
//!
//! All metrics compare a prediction `P` against ground truth `G` of the same
//! shape and are accumulated in `f64`. Plain [`rmse`] is the only one that
//! is not invariant to a global rescaling of `P`.

mod report;

pub use report::{evaluate_dataset, evaluate_scene, MetricConfig, MetricReport, MetricRow, CSV_HEADER};

use crate::error::{Error, Result};
use crate::image::{LinearImage, LUMA_WEIGHTS};
use crate::pipeline::scale_align;

fn check_pair(p: &LinearImage, g: &LinearImage) -> Result<()> {
    p.ensure_same_shape(g, "metric operands")
}

/// Root mean squared error. Not scale-invariant.
pub fn rmse(p: &LinearImage, g: &LinearImage) -> Result<f64> {
    check_pair(p, g)?;
    Ok(rmse_scaled(p.data(), g.data(), 1.0))
}

fn rmse_scaled(p: &[f32], g: &[f32], alpha: f64) -> f64 {
    let sse: f64 = p
        .iter()
        .zip(g)
        .map(|(&a, &b)| (alpha * a as f64 - b as f64).powi(2))
        .sum();
    (sse / p.len().max(1) as f64).sqrt()
}

/// RMSE after scaling `P` by its least-squares fit onto `G`.
pub fn si_rmse(p: &LinearImage, g: &LinearImage) -> Result<f64> {
    check_pair(p, g)?;
    let alpha = scale_align(p.data(), g.data());
    Ok(rmse_scaled(p.data(), g.data(), alpha))
}

/// Default LMSE window for an image: an eighth of the shorter side, at
/// least 2.
pub fn lmse_window(width: usize, height: usize) -> usize {
    (width.min(height) / 8).max(2)
}

/// Local mean squared error.
///
/// Square windows of side `window` are placed every `window/2` pixels
/// (windows that would cross the border are dropped, all channels are
/// windowed together). In each window `P` is rescaled by its own
/// least-squares factor (zero when the window of `P` is empty); the summed
/// squared error is divided by the summed energy of `G` over the same
/// windows. Returns 0 when `G` has no energy.
pub fn lmse(p: &LinearImage, g: &LinearImage, window: usize) -> Result<f64> {
    check_pair(p, g)?;
    let (w, h) = (p.width(), p.height());
    if window < 2 || window > w || window > h {
        return Err(Error::Domain(format!(
            "LMSE window {window} does not fit a {w}x{h} image"
        )));
    }
    let stride = window / 2;
    let (mut err, mut energy) = (0.0f64, 0.0f64);
    let mut y0 = 0;
    while y0 + window <= h {
        let mut x0 = 0;
        while x0 + window <= w {
            let (mut pp, mut pg, mut gg) = (0.0f64, 0.0f64, 0.0f64);
            for c in 0..p.channels() {
                let (pc, gc) = (p.plane(c), g.plane(c));
                for y in y0..y0 + window {
                    for x in x0..x0 + window {
                        let (a, b) = (pc[y * w + x] as f64, gc[y * w + x] as f64);
                        pp += a * a;
                        pg += a * b;
                        gg += b * b;
                    }
                }
            }
            let alpha = if pp > 1e-12 { pg / pp } else { 0.0 };
            err += (alpha * alpha * pp - 2.0 * alpha * pg + gg).max(0.0);
            energy += gg;
            x0 += stride;
        }
        y0 += stride;
    }
    Ok(if energy > 0.0 { err / energy } else { 0.0 })
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn gaussian_weights(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let w: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Structural similarity with an 11×11 Gaussian window (σ 1.5), K1 0.01,
/// K2 0.03 and dynamic range `max(G) - min(G)` (1 if `G` is constant).
/// Only windows fully inside the image are used; images smaller than the
/// window use a window as large as their shorter side. The result is the
/// mean over window positions and channels.
pub fn ssim(p: &LinearImage, g: &LinearImage) -> Result<f64> {
    check_pair(p, g)?;
    let (w, h) = (p.width(), p.height());
    let size = SSIM_WINDOW.min(w).min(h);
    let k1d = gaussian_weights(size, SSIM_SIGMA);
    let (lo, hi) = g
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v as f64), hi.max(v as f64))
        });
    let range = if hi > lo { hi - lo } else { 1.0 };
    let c1 = (SSIM_K1 * range).powi(2);
    let c2 = (SSIM_K2 * range).powi(2);
    let (ow, oh) = (w - size + 1, h - size + 1);

    // Separable filtering of x, y, x², y², xy.
    let filter = |src: &[f64]| -> Vec<f64> {
        let mut tmp = vec![0.0; h * ow];
        for y in 0..h {
            for x in 0..ow {
                tmp[y * ow + x] = (0..size).map(|k| k1d[k] * src[y * w + x + k]).sum();
            }
        }
        let mut out = vec![0.0; oh * ow];
        for y in 0..oh {
            for x in 0..ow {
                out[y * ow + x] = (0..size).map(|k| k1d[k] * tmp[(y + k) * ow + x]).sum();
            }
        }
        out
    };
    let mut total = 0.0;
    for c in 0..p.channels() {
        let a: Vec<f64> = p.plane(c).iter().map(|&v| v as f64).collect();
        let b: Vec<f64> = g.plane(c).iter().map(|&v| v as f64).collect();
        let prod = |u: &[f64], v: &[f64]| -> Vec<f64> { u.iter().zip(v).map(|(x, y)| x * y).collect() };
        let (mu_a, mu_b) = (filter(&a), filter(&b));
        let (e_aa, e_bb, e_ab) = (filter(&prod(&a, &a)), filter(&prod(&b, &b)), filter(&prod(&a, &b)));
        for i in 0..oh * ow {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
    }
    Ok(total / (p.channels() * oh * ow) as f64)
}

/// Regions of identical ground-truth albedo colour with at least
/// `min_pixels` pixels, in order of first appearance. Falls back to a
/// single whole-image mask when no colour is frequent enough.
pub fn albedo_masks(g: &LinearImage, min_pixels: usize) -> Result<Vec<Vec<bool>>> {
    g.ensure_channels(3, "albedo masks")?;
    let n = g.pixels();
    let key = |i: usize| {
        [
            g.plane(0)[i].to_bits(),
            g.plane(1)[i].to_bits(),
            g.plane(2)[i].to_bits(),
        ]
    };
    let mut colours: Vec<([u32; 3], Vec<bool>)> = Vec::new();
    let mut index = std::collections::HashMap::new();
    for i in 0..n {
        let k = key(i);
        let slot = *index.entry(k).or_insert_with(|| {
            colours.push((k, vec![false; n]));
            colours.len() - 1
        });
        colours[slot].1[i] = true;
    }
    let masks: Vec<Vec<bool>> = colours
        .into_iter()
        .map(|(_, m)| m)
        .filter(|m| m.iter().filter(|&&b| b).count() >= min_pixels)
        .collect();
    Ok(if masks.is_empty() { vec![vec![true; n]] } else { masks })
}

/// Albedo intensity and chromaticity errors over masked regions.
///
/// One global least-squares scale maps `P` onto `G` over the union of the
/// masks. Intensity is the mean over masks of the squared difference of the
/// mean luminances of `αP` and `G`, times 100. Chromaticity is the mean over
/// masks of the angle in degrees between the mean RGB vectors of `P` and `G`.
pub fn intensity_chroma_error(p: &LinearImage, g: &LinearImage, masks: &[Vec<bool>]) -> Result<(f64, f64)> {
    check_pair(p, g)?;
    p.ensure_channels(3, "intensity/chromaticity")?;
    let n = p.pixels();
    if masks.is_empty() {
        return Err(Error::Domain("no masks given".into()));
    }
    if let Some(m) = masks.iter().find(|m| m.len() != n) {
        return Err(Error::Shape(format!("mask has {} entries for {n} pixels", m.len())));
    }
    let union: Vec<bool> = (0..n).map(|i| masks.iter().any(|m| m[i])).collect();
    let (mut pg, mut pp) = (0.0f64, 0.0f64);
    for c in 0..3 {
        for i in (0..n).filter(|&i| union[i]) {
            let (a, b) = (p.plane(c)[i] as f64, g.plane(c)[i] as f64);
            pg += a * b;
            pp += a * a;
        }
    }
    let alpha = if pp > 1e-12 { pg / pp } else { 1.0 };
    let (mut intensity, mut angle, mut used) = (0.0, 0.0, 0usize);
    for m in masks {
        let count = m.iter().filter(|&&b| b).count();
        if count == 0 {
            continue;
        }
        let mean = |img: &LinearImage| -> [f64; 3] {
            let mut out = [0.0; 3];
            for (c, o) in out.iter_mut().enumerate() {
                *o = (0..n).filter(|&i| m[i]).map(|i| img.plane(c)[i] as f64).sum::<f64>() / count as f64;
            }
            out
        };
        let (mp, mg) = (mean(p), mean(g));
        let lum = |v: [f64; 3]| (0..3).map(|c| LUMA_WEIGHTS[c] as f64 * v[c]).sum::<f64>();
        intensity += (alpha * lum(mp) - lum(mg)).powi(2);
        angle += vector_angle_deg(mp, mg);
        used += 1;
    }
    if used == 0 {
        return Err(Error::Domain("all masks are empty".into()));
    }
    Ok((100.0 * intensity / used as f64, angle / used as f64))
}

/// Angle between two RGB vectors in degrees; 0 if either is zero.
fn vector_angle_deg(a: [f64; 3], b: [f64; 3]) -> f64 {
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let cn = cross.iter().map(|v| v * v).sum::<f64>().sqrt();
    let dot: f64 = (0..3).map(|i| a[i] * b[i]).sum();
    if cn == 0.0 && dot == 0.0 {
        return 0.0;
    }
    cn.atan2(dot).to_degrees()
}
