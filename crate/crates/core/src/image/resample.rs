use super::LinearImage;
use crate::error::{Error, Result};

/// 2× box downsampling. Both dimensions must be even.
pub fn downsample2(img: &LinearImage) -> Result<LinearImage> {
    let (w, h) = (img.width(), img.height());
    if w % 2 != 0 || h % 2 != 0 {
        return Err(Error::Shape(format!("cannot halve a {w}x{h} image")));
    }
    let (ow, oh) = (w / 2, h / 2);
    LinearImage::from_fn(ow, oh, img.channels(), img.color_space(), |c, x, y| {
        let p = img.plane(c);
        let i = 2 * y * w + 2 * x;
        0.25 * (p[i] + p[i + 1] + p[i + w] + p[i + w + 1])
    })
}

/// Bilinear resampling with half-pixel centres and edge clamping.
pub fn upsample_bilinear(img: &LinearImage, width: usize, height: usize) -> Result<LinearImage> {
    if img.width() == width && img.height() == height {
        return Ok(img.clone());
    }
    let (sw, sh) = (img.width(), img.height());
    let sx = sw as f32 / width as f32;
    let sy = sh as f32 / height as f32;
    let taps = |dst: usize, scale: f32, src_len: usize| {
        let pos = ((dst as f32 + 0.5) * scale - 0.5).max(0.0);
        let i0 = (pos.floor() as usize).min(src_len - 1);
        let i1 = (i0 + 1).min(src_len - 1);
        (i0, i1, pos - i0 as f32)
    };
    LinearImage::from_fn(width, height, img.channels(), img.color_space(), |c, x, y| {
        let p = img.plane(c);
        let (x0, x1, fx) = taps(x, sx, sw);
        let (y0, y1, fy) = taps(y, sy, sh);
        // lerp form keeps constant regions exact
        let lerp = |a: f32, b: f32, t: f32| a + (b - a) * t;
        let top = lerp(p[y0 * sw + x0], p[y0 * sw + x1], fx);
        let bot = lerp(p[y1 * sw + x0], p[y1 * sw + x1], fx);
        lerp(top, bot, fy)
    })
}
