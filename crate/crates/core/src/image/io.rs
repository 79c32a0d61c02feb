//! Image files.
//!
//! Float components live in the IIDF container, little-endian throughout:
//!
//! ```text
//! "IIDF"            4 bytes
//! width             u32
//! height            u32
//! channels          u32
//! colorspace tag    u32   (0 = linear, 1 = srgb, 2 = data)
//! samples           width*height*channels f32, planar
//! ```
//!
//! Display images are 8-bit PNG. Reading a PNG yields an sRGB-tagged image
//! in [0, 1]; writing expects values already encoded for display.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{ColorSpace, LinearImage};
use crate::error::{Error, Result};

pub const IIDF_MAGIC: &[u8; 4] = b"IIDF";
const HEADER_LEN: usize = 20;

pub fn write_iidf(img: &LinearImage, path: &Path) -> Result<()> {
    let mut buf = Vec::with_capacity(HEADER_LEN + img.data().len() * 4);
    buf.extend_from_slice(IIDF_MAGIC);
    for v in [
        img.width() as u32,
        img.height() as u32,
        img.channels() as u32,
        img.color_space().tag(),
    ] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in img.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&buf)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_iidf(path: &Path) -> Result<LinearImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_iidf(&bytes).map_err(|reason| Error::format(path, reason))
}

fn decode_iidf(bytes: &[u8]) -> std::result::Result<LinearImage, String> {
    if bytes.len() < HEADER_LEN {
        return Err("truncated header".into());
    }
    if &bytes[..4] != IIDF_MAGIC {
        return Err("bad magic".into());
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let (width, height, channels, tag) = (word(0), word(1), word(2), word(3));
    let color_space = ColorSpace::from_tag(tag).ok_or(format!("unknown colorspace tag {tag}"))?;
    if !(1..=3).contains(&channels) {
        return Err(format!("unsupported channel count {channels}"));
    }
    let count = (width as u64)
        .checked_mul(height as u64)
        .and_then(|n| n.checked_mul(channels as u64))
        .filter(|&n| n <= (usize::MAX / 4) as u64)
        .ok_or("dimension overflow")? as usize;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != count * 4 {
        return Err(format!("expected {} payload bytes, found {}", count * 4, payload.len()));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    LinearImage::from_vec(width as usize, height as usize, channels as usize, color_space, data)
        .map_err(|e| e.to_string())
}

/// Writes an 8-bit PNG. Values are clamped to [0, 1] and quantised; no
/// transfer function is applied here.
pub fn write_png(img: &LinearImage, path: &Path) -> Result<()> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let q = |v: f32| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    let res = match img.channels() {
        1 => {
            let buf: Vec<u8> = img.plane(0).iter().map(|&v| q(v)).collect();
            image::GrayImage::from_raw(w, h, buf).map(|b| b.save(path))
        }
        3 => {
            let mut buf = Vec::with_capacity(img.pixels() * 3);
            for i in 0..img.pixels() {
                for c in 0..3 {
                    buf.push(q(img.plane(c)[i]));
                }
            }
            image::RgbImage::from_raw(w, h, buf).map(|b| b.save(path))
        }
        n => return Err(Error::Shape(format!("cannot write {n}-channel PNG"))),
    };
    match res {
        Some(Ok(())) => Ok(()),
        Some(Err(e)) => Err(Error::format(path, e.to_string())),
        None => Err(Error::Shape("PNG buffer size mismatch".into())),
    }
}

/// Reads an 8-bit RGB or RGBA PNG (alpha is dropped) as an sRGB image.
pub fn read_png(path: &Path) -> Result<LinearImage> {
    let decoded = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::format(path, other.to_string()),
    })?;
    let rgb = decoded.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let raw = rgb.into_raw();
    LinearImage::from_fn(w, h, 3, ColorSpace::Srgb, |c, x, y| {
        raw[(y * w + x) * 3 + c] as f32 / 255.0
    })
}

fn is_png(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

/// Reads an image, choosing the decoder from the file extension.
pub fn read_image(path: &Path) -> Result<LinearImage> {
    if is_png(path) {
        read_png(path)
    } else {
        read_iidf(path)
    }
}

/// Writes an image, choosing the encoder from the file extension.
pub fn write_image(img: &LinearImage, path: &Path) -> Result<()> {
    if is_png(path) {
        write_png(img, path)
    } else {
        write_iidf(img, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iidf_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.iidf");
        let data = vec![-0.0, 1.0e-30, -3.25, 7.0, f32::MIN_POSITIVE, 0.1];
        let img = LinearImage::from_vec(3, 1, 2, ColorSpace::Data, data).unwrap();
        write_iidf(&img, &path).unwrap();
        let back = read_iidf(&path).unwrap();
        assert_eq!(back.width(), 3);
        assert_eq!(back.color_space(), ColorSpace::Data);
        let bits = |i: &LinearImage| i.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&img), bits(&back));
    }

    #[test]
    fn header_layout() {
        let img = LinearImage::filled(2, 1, 1, ColorSpace::Srgb, 0.5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.iidf");
        write_iidf(&img, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"IIDF");
        assert_eq!(&bytes[4..8], &2u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &1u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &1u32.to_le_bytes());
        assert_eq!(&bytes[20..24], &0.5f32.to_le_bytes());
        assert_eq!(bytes.len(), 28);
    }

    #[test]
    fn malformed_containers() {
        let bad = |bytes: &[u8]| decode_iidf(bytes).unwrap_err();
        assert!(bad(b"IID").contains("truncated"));
        let mut hdr = b"XXXX".to_vec();
        hdr.extend_from_slice(&[0u8; 16]);
        assert!(bad(&hdr).contains("magic"));

        let mut overflow = b"IIDF".to_vec();
        for v in [u32::MAX, u32::MAX, 3, 0] {
            overflow.extend_from_slice(&v.to_le_bytes());
        }
        assert!(decode_iidf(&overflow).is_err());

        let mut chans = b"IIDF".to_vec();
        for v in [1u32, 1, 4, 0] {
            chans.extend_from_slice(&v.to_le_bytes());
        }
        chans.extend_from_slice(&[0u8; 16]);
        assert!(bad(&chans).contains("channel"));

        let mut short = b"IIDF".to_vec();
        for v in [2u32, 2, 1, 0] {
            short.extend_from_slice(&v.to_le_bytes());
        }
        short.extend_from_slice(&[0u8; 12]);
        assert!(bad(&short).contains("payload"));
    }

    #[test]
    fn png_round_trip_quantised() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        let img = LinearImage::from_fn(4, 3, 3, ColorSpace::Srgb, |c, x, y| {
            ((c * 12 + y * 4 + x) as f32 * 7.0) / 255.0
        })
        .unwrap();
        write_png(&img, &path).unwrap();
        let back = read_png(&path).unwrap();
        assert_eq!(back.color_space(), ColorSpace::Srgb);
        assert!(back.max_abs_diff(&img) < 1e-6);
    }

    #[test]
    fn rgba_alpha_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        let buf = image::RgbaImage::from_raw(1, 1, vec![255, 0, 51, 7]).unwrap();
        buf.save(&path).unwrap();
        let img = read_png(&path).unwrap();
        assert_eq!(img.channels(), 3);
        assert_eq!(img.data(), &[1.0, 0.0, 0.2]);
    }
}
