//! Planar float images and the primitive per-pixel operations on them.

mod color;
mod io;
mod resample;

pub use color::{linear_to_srgb, luminance, srgb_decode, srgb_encode, srgb_to_linear, LUMA_WEIGHTS};
pub use io::{read_iidf, read_image, read_png, write_iidf, write_image, write_png, IIDF_MAGIC};
pub use resample::{downsample2, upsample_bilinear};

use crate::error::{Error, Result};

/// Interpretation of the values stored in a [`LinearImage`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColorSpace {
    /// Linear radiometric values, non-negative.
    Linear,
    /// sRGB-encoded display values, non-negative.
    Srgb,
    /// Arbitrary signed data (residuals, network targets).
    Data,
}

impl ColorSpace {
    pub fn tag(self) -> u32 {
        match self {
            ColorSpace::Linear => 0,
            ColorSpace::Srgb => 1,
            ColorSpace::Data => 2,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Self> {
        match tag {
            0 => Some(ColorSpace::Linear),
            1 => Some(ColorSpace::Srgb),
            2 => Some(ColorSpace::Data),
            _ => None,
        }
    }

    fn allows_negative(self) -> bool {
        self == ColorSpace::Data
    }
}

/// A width × height image with 1–3 channels stored planar (channel-major).
///
/// Every constructor enforces that the buffer length matches the
/// dimensions, that all values are finite and that non-`Data` images are
/// non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
    color_space: ColorSpace,
}

impl LinearImage {
    pub fn zeros(width: usize, height: usize, channels: usize, color_space: ColorSpace) -> Self {
        Self::filled(width, height, channels, color_space, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, color_space: ColorSpace, value: f32) -> Self {
        assert!((1..=3).contains(&channels), "channels must be 1..=3");
        assert!(value.is_finite());
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
            color_space,
        }
    }

    pub fn from_vec(
        width: usize,
        height: usize,
        channels: usize,
        color_space: ColorSpace,
        data: Vec<f32>,
    ) -> Result<Self> {
        if !(1..=3).contains(&channels) {
            return Err(Error::Shape(format!("unsupported channel count {channels}")));
        }
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| Error::Shape("image dimensions overflow".into()))?;
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "{width}x{height}x{channels} image needs {expected} values, got {}",
                data.len()
            )));
        }
        let img = Self {
            width,
            height,
            channels,
            data,
            color_space,
        };
        img.validate()?;
        Ok(img)
    }

    /// Builds an image from per-pixel closures over (channel, x, y).
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        color_space: ColorSpace,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, x, y));
                }
            }
        }
        Self::from_vec(width, height, channels, color_space, data)
    }

    pub fn validate(&self) -> Result<()> {
        for &v in &self.data {
            if !v.is_finite() {
                return Err(Error::Domain(format!("non-finite pixel value {v}")));
            }
            if v < 0.0 && !self.color_space.allows_negative() {
                return Err(Error::Domain(format!(
                    "negative value {v} in {:?} image",
                    self.color_space
                )));
            }
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn color_space(&self) -> ColorSpace {
        self.color_space
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.pixels();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, x: usize, y: usize) -> f32 {
        self.data[c * self.pixels() + y * self.width + x]
    }

    /// Retags the image. Fails if the new tag forbids values already present.
    pub fn with_color_space(mut self, color_space: ColorSpace) -> Result<Self> {
        self.color_space = color_space;
        self.validate()?;
        Ok(self)
    }

    pub fn same_dims(&self, other: &LinearImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn ensure_dims(&self, other: &LinearImage, what: &str) -> Result<()> {
        if self.same_dims(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{what}: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }

    pub(crate) fn ensure_same_shape(&self, other: &LinearImage, what: &str) -> Result<()> {
        self.ensure_dims(other, what)?;
        other.ensure_channels(self.channels, what)
    }

    pub(crate) fn ensure_channels(&self, channels: usize, what: &str) -> Result<()> {
        if self.channels == channels {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{what}: expected {channels} channels, got {}",
                self.channels
            )))
        }
    }

    /// Applies `f` to every value, producing an image with the given tag.
    pub fn map(&self, color_space: ColorSpace, f: impl Fn(f32) -> f32) -> Result<LinearImage> {
        let data = self.data.iter().map(|&v| f(v)).collect();
        LinearImage::from_vec(self.width, self.height, self.channels, color_space, data)
    }

    /// Elementwise combination of two images. A single-channel operand is
    /// broadcast across the channels of the other.
    pub fn zip_map(
        &self,
        other: &LinearImage,
        color_space: ColorSpace,
        f: impl Fn(f32, f32) -> f32,
    ) -> Result<LinearImage> {
        self.ensure_dims(other, "elementwise operation")?;
        let n = self.pixels();
        let channels = self.channels.max(other.channels);
        if self.channels != other.channels && self.channels != 1 && other.channels != 1 {
            return Err(Error::Shape(format!(
                "cannot broadcast {} channels against {}",
                self.channels, other.channels
            )));
        }
        let mut data = Vec::with_capacity(n * channels);
        for c in 0..channels {
            let a = self.plane(if self.channels == 1 { 0 } else { c });
            let b = other.plane(if other.channels == 1 { 0 } else { c });
            data.extend(a.iter().zip(b).map(|(&x, &y)| f(x, y)));
        }
        LinearImage::from_vec(self.width, self.height, channels, color_space, data)
    }

    pub fn mul(&self, other: &LinearImage) -> Result<LinearImage> {
        let cs = if self.color_space == ColorSpace::Data || other.color_space == ColorSpace::Data {
            ColorSpace::Data
        } else {
            ColorSpace::Linear
        };
        self.zip_map(other, cs, |a, b| a * b)
    }

    /// `self / max(other, eps)`.
    pub fn div_eps(&self, other: &LinearImage, eps: f32) -> Result<LinearImage> {
        self.zip_map(other, self.color_space, |a, b| a / b.max(eps))
    }

    pub fn clamp(&self, lo: f32, hi: f32) -> LinearImage {
        let data = self.data.iter().map(|v| v.clamp(lo, hi)).collect();
        LinearImage { data, ..self.clone() }
    }

    /// Concatenates images along the channel axis into a raw planar buffer.
    /// The result may have more than three channels, so it is returned as a
    /// plain vector together with its channel count.
    pub fn stack(images: &[&LinearImage]) -> Result<(Vec<f32>, usize)> {
        let first = images.first().ok_or_else(|| Error::Shape("nothing to stack".into()))?;
        let mut out = Vec::new();
        let mut channels = 0;
        for img in images {
            first.ensure_dims(img, "channel stack")?;
            out.extend_from_slice(&img.data);
            channels += img.channels;
        }
        Ok((out, channels))
    }

    /// Builds a 3-channel image by repeating a single channel.
    pub fn broadcast3(&self) -> Result<LinearImage> {
        self.ensure_channels(1, "broadcast3")?;
        let mut data = Vec::with_capacity(self.data.len() * 3);
        for _ in 0..3 {
            data.extend_from_slice(&self.data);
        }
        LinearImage::from_vec(self.width, self.height, 3, self.color_space, data)
    }

    pub fn max_abs_diff(&self, other: &LinearImage) -> f32 {
        assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len().max(1) as f64
    }
}
