use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, NumAssign};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::{ColorSpace, LinearImage};

/// Element type of the autodiff engine. Training runs in `f32`; `f64` is
/// used as a low-noise reference for finite differences.
pub trait Scalar: Float + NumAssign + Sum + Debug + Default + Send + Sync + 'static {
    fn lit(v: f64) -> Self;

    /// `c = a·b + beta·c` with `a` m×k, `b` k×n, `c` m×n row-major, `a` and
    /// `b` given by (row, column) strides.
    ///
    /// # Safety
    /// The strides must keep every access inside the slices.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        a: *const Self,
        a_strides: (isize, isize),
        b: *const Self,
        b_strides: (isize, isize),
        beta: Self,
        c: *mut Self,
        rsc: isize,
    );
}

impl Scalar for f32 {
    fn lit(v: f64) -> Self {
        v as f32
    }

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        a: *const f32,
        (rsa, csa): (isize, isize),
        b: *const f32,
        (rsb, csb): (isize, isize),
        beta: f32,
        c: *mut f32,
        rsc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, beta, c, rsc, 1);
    }
}

impl Scalar for f64 {
    fn lit(v: f64) -> Self {
        v
    }

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        a: *const f64,
        (rsa, csa): (isize, isize),
        b: *const f64,
        (rsb, csb): (isize, isize),
        beta: f64,
        c: *mut f64,
        rsc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, beta, c, rsc, 1);
    }
}

/// Dense array in NCHW layout. Lower-rank values use size-1 axes; a
/// scalar has shape `[1, 1, 1, 1]`.
///
/// Gradient buffers live on the graph nodes that hold a tensor, not on the
/// tensor itself.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T = f32> {
    shape: [usize; 4],
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: [usize; 4]) -> Self {
        Self {
            shape,
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn full(shape: [usize; 4], value: T) -> Self {
        Self {
            shape,
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn scalar(value: T) -> Self {
        Self::full([1, 1, 1, 1], value)
    }

    pub fn from_vec(shape: [usize; 4], data: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn item(&self) -> T {
        assert_eq!(self.data.len(), 1, "item() on a non-scalar tensor");
        self.data[0]
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    pub fn channels(&self) -> usize {
        self.shape[1]
    }

    pub fn height(&self) -> usize {
        self.shape[2]
    }

    pub fn width(&self) -> usize {
        self.shape[3]
    }

    /// Stacks per-sample planar buffers of shape `C×H×W` into a batch.
    pub fn stack(samples: &[&[T]], channels: usize, height: usize, width: usize) -> Result<Self> {
        let per = channels * height * width;
        let mut data = Vec::with_capacity(per * samples.len());
        for s in samples {
            if s.len() != per {
                return Err(Error::Shape(format!("sample has {} values, expected {per}", s.len())));
            }
            data.extend_from_slice(s);
        }
        Self::from_vec([samples.len(), channels, height, width], data)
    }

    pub fn sample(&self, n: usize) -> &[T] {
        let per = self.shape[1] * self.shape[2] * self.shape[3];
        &self.data[n * per..(n + 1) * per]
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|v| U::lit(v.to_f64().unwrap())).collect(),
        }
    }
}

impl Tensor<f32> {
    /// Values drawn uniformly from `[lo, hi)` with a seeded ChaCha8 stream.
    pub fn uniform(shape: [usize; 4], lo: f32, hi: f32, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = shape.iter().product();
        Self {
            shape,
            data: (0..n).map(|_| rng.random_range(lo..hi)).collect(),
        }
    }

    /// A single-sample tensor holding the channels of the given images.
    pub fn from_images(images: &[&LinearImage]) -> Result<Self> {
        let (data, channels) = LinearImage::stack(images)?;
        let first = images[0];
        Self::from_vec([1, channels, first.height(), first.width()], data)
    }

    /// Copies channels `[c0, c0 + count)` of sample `n` into an image.
    pub fn to_image(&self, n: usize, c0: usize, count: usize, color_space: ColorSpace) -> Result<LinearImage> {
        let hw = self.shape[2] * self.shape[3];
        let s = self.sample(n);
        LinearImage::from_vec(
            self.shape[3],
            self.shape[2],
            count,
            color_space,
            s[c0 * hw..(c0 + count) * hw].to_vec(),
        )
    }
}
