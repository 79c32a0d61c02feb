//! Tape-style computation graph with reverse-mode differentiation.
//!
//! Every operation appends a node holding its forward value. Calling
//! [`Graph::backward`] walks the nodes in reverse creation order, which is
//! a valid topological order, and accumulates gradients into every node
//! that depends on a parameter. Shape mismatches between operands are
//! programming errors and panic.

use super::tensor::{Scalar, Tensor};

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    /// Negative slope 0.01.
    LeakyRelu,
    /// `alpha = 1`.
    Elu,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::LeakyRelu => "leaky_relu",
            Activation::Elu => "elu",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "leaky_relu" => Some(Activation::LeakyRelu),
            "elu" => Some(Activation::Elu),
            _ => None,
        }
    }

    fn apply<T: Scalar>(self, x: T) -> T {
        if x > T::zero() {
            return x;
        }
        match self {
            Activation::Relu => T::zero(),
            Activation::LeakyRelu => T::lit(LEAKY_SLOPE) * x,
            Activation::Elu => x.exp_m1(),
        }
    }

    fn derivative<T: Scalar>(self, x: T) -> T {
        if x > T::zero() {
            return T::one();
        }
        match self {
            Activation::Relu => T::zero(),
            Activation::LeakyRelu => T::lit(LEAKY_SLOPE),
            Activation::Elu => x.exp(),
        }
    }
}

const LEAKY_SLOPE: f64 = 0.01;

/// Sigmoid outputs are kept at least this far from 0 and 1.
pub const SIGMOID_MARGIN: f32 = 1e-6;

fn sigmoid<T: Scalar>(x: T) -> T {
    let x = x.to_f64().unwrap();
    let y = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    let m = SIGMOID_MARGIN as f64;
    T::lit(y.clamp(m, 1.0 - m))
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv2d { x: Var, w: Var, b: Var, k: usize },
    Act { x: Var, kind: Activation },
    Sigmoid { x: Var },
    AvgPool2 { x: Var },
    Upsample2 { x: Var },
    Concat { parts: Vec<Var> },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Square(Var),
    Mean(Var),
    Sum(Var),
    DiffX(Var),
    DiffY(Var),
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    grad: Option<Vec<T>>,
    requires_grad: bool,
    op: Op,
}

#[derive(Debug)]
pub struct Graph<T = f32> {
    nodes: Vec<Node<T>>,
}

impl<T> Default for Graph<T> {
    fn default() -> Self {
        Self { nodes: Vec::new() }
    }
}

/// `c = a·b + beta·c` for row-major views given by (row, column) strides.
#[allow(clippy::too_many_arguments)]
fn gemm<T: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    a_strides: (usize, usize),
    b: &[T],
    b_strides: (usize, usize),
    beta: T,
    c: &mut [T],
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |rows: usize, cols: usize, (rs, cs): (usize, usize)| (rows - 1) * rs + (cols - 1) * cs;
    if k > 0 {
        assert!(last(m, k, a_strides) < a.len() && last(k, n, b_strides) < b.len());
    }
    assert!(last(m, n, (n, 1)) < c.len());
    // SAFETY: the asserts above bound every index the kernel touches.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            a.as_ptr(),
            (a_strides.0 as isize, a_strides.1 as isize),
            b.as_ptr(),
            (b_strides.0 as isize, b_strides.1 as isize),
            beta,
            c.as_mut_ptr(),
            n as isize,
        );
    }
}

/// Unfolds one `C×H×W` sample into a `(C·k·k)×(H·W)` patch matrix with zero
/// padding `k/2`.
fn im2col<T: Scalar>(x: &[T], c: usize, h: usize, w: usize, k: usize, cols: &mut [T]) {
    let p = k / 2;
    let hw = h * w;
    for ci in 0..c {
        let src = &x[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = &mut cols[((ci * k + ky) * k + kx) * hw..][..hw];
                let x0 = p.saturating_sub(kx);
                let x1 = (w + p).saturating_sub(kx).min(w);
                for y in 0..h {
                    let dst = &mut row[y * w..(y + 1) * w];
                    let yy = y as isize + ky as isize - p as isize;
                    if yy < 0 || yy >= h as isize || x0 >= x1 {
                        dst.fill(T::zero());
                        continue;
                    }
                    let srow = &src[yy as usize * w..(yy as usize + 1) * w];
                    dst[..x0].fill(T::zero());
                    dst[x1..].fill(T::zero());
                    dst[x0..x1].copy_from_slice(&srow[x0 + kx - p..x1 + kx - p]);
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters patch gradients back onto the sample.
fn col2im<T: Scalar>(cols: &[T], c: usize, h: usize, w: usize, k: usize, dx: &mut [T]) {
    let p = k / 2;
    let hw = h * w;
    for ci in 0..c {
        let dst = &mut dx[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = &cols[((ci * k + ky) * k + kx) * hw..][..hw];
                let x0 = p.saturating_sub(kx);
                let x1 = (w + p).saturating_sub(kx).min(w);
                if x0 >= x1 {
                    continue;
                }
                for y in 0..h {
                    let yy = y as isize + ky as isize - p as isize;
                    if yy < 0 || yy >= h as isize {
                        continue;
                    }
                    let drow = &mut dst[yy as usize * w + x0 + kx - p..][..x1 - x0];
                    for (d, s) in drow.iter_mut().zip(&row[y * w + x0..y * w + x1]) {
                        *d += *s;
                    }
                }
            }
        }
    }
}

/// Bilinear 2× taps (half-pixel centres, clamped edges) for output index `o`.
fn upsample_taps<T: Scalar>(o: usize, len: usize) -> (usize, T, usize, T) {
    let i = o / 2;
    let (q, tq) = (T::lit(0.25), T::lit(0.75));
    if o.is_multiple_of(2) {
        (i.saturating_sub(1), q, i, tq)
    } else {
        (i, tq, (i + 1).min(len - 1), q)
    }
}

/// Sum accumulated in `f64` (exact enough for either element type).
fn sum_wide<T: Scalar>(v: &[T]) -> T {
    T::lit(v.iter().map(|x| x.to_f64().unwrap()).sum::<f64>())
}

impl Graph<f32> {
    pub fn new() -> Self {
        Self::default()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// A constant input.
    pub fn input(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// A leaf that receives a gradient.
    pub fn param(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.nodes[v.0].grad.as_deref()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn unary(&mut self, x: Var, op: Op, f: impl Fn(T) -> T) -> Var {
        let xv = self.value(x);
        let out = Tensor::from_vec(xv.shape(), xv.data().iter().map(|&v| f(v)).collect()).unwrap();
        let rg = self.needs(&[x]);
        self.push(out, op, rg)
    }

    fn binary(&mut self, a: Var, b: Var, op: Op, f: impl Fn(T, T) -> T) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.shape(), bv.shape(), "elementwise operands differ in shape");
        let data = av.data().iter().zip(bv.data()).map(|(&x, &y)| f(x, y)).collect();
        let out = Tensor::from_vec(av.shape(), data).unwrap();
        let rg = self.needs(&[a, b]);
        self.push(out, op, rg)
    }

    /// Stride-1 convolution with `k×k` kernels (k odd) and zero padding `k/2`.
    /// `w` has shape `[Co, Ci, k, k]`, `b` has shape `[1, Co, 1, 1]`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var) -> Var {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        let [n, ci, h, wd] = xv.shape();
        let [co, wci, k, k2] = wv.shape();
        assert!(k == k2 && k % 2 == 1, "kernel must be square and odd");
        assert_eq!(ci, wci, "conv input has {ci} channels, kernel expects {wci}");
        assert_eq!(bv.shape(), [1, co, 1, 1], "bias shape");
        let hw = h * wd;
        let kk = ci * k * k;
        let mut out = Tensor::zeros([n, co, h, wd]);
        let mut cols = if k == 1 { Vec::new() } else { vec![T::zero(); kk * hw] };
        for s in 0..n {
            let xs = xv.sample(s);
            let patches: &[T] = if k == 1 {
                xs
            } else {
                im2col(xs, ci, h, wd, k, &mut cols);
                &cols
            };
            let os = &mut out.data_mut()[s * co * hw..(s + 1) * co * hw];
            for (c, plane) in os.chunks_exact_mut(hw).enumerate() {
                plane.fill(bv.data()[c]);
            }
            gemm(co, kk, hw, wv.data(), (kk, 1), patches, (hw, 1), T::one(), os);
        }
        let rg = self.needs(&[x, w, b]);
        self.push(out, Op::Conv2d { x, w, b, k }, rg)
    }

    pub fn activation(&mut self, x: Var, kind: Activation) -> Var {
        self.unary(x, Op::Act { x, kind }, |v| kind.apply(v))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, Op::Sigmoid { x }, sigmoid)
    }

    /// 2×2 average pooling; height and width must be even.
    pub fn avg_pool2(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let [n, c, h, w] = xv.shape();
        assert!(h % 2 == 0 && w % 2 == 0, "avg_pool2 needs even dimensions, got {h}x{w}");
        let (oh, ow) = (h / 2, w / 2);
        let mut out = Tensor::zeros([n, c, oh, ow]);
        let src = xv.data();
        for (p, dst) in out.data_mut().chunks_exact_mut(oh * ow).enumerate() {
            let plane = &src[p * h * w..(p + 1) * h * w];
            for y in 0..oh {
                for xo in 0..ow {
                    let i = 2 * y * w + 2 * xo;
                    dst[y * ow + xo] = T::lit(0.25) * (plane[i] + plane[i + 1] + plane[i + w] + plane[i + w + 1]);
                }
            }
        }
        let rg = self.needs(&[x]);
        self.push(out, Op::AvgPool2 { x }, rg)
    }

    /// 2× bilinear upsampling.
    pub fn upsample2(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let [n, c, h, w] = xv.shape();
        let (oh, ow) = (2 * h, 2 * w);
        let mut out = Tensor::zeros([n, c, oh, ow]);
        let mut tmp = vec![T::zero(); h * ow];
        for (p, dst) in out.data_mut().chunks_exact_mut(oh * ow).enumerate() {
            let plane = &xv.data()[p * h * w..(p + 1) * h * w];
            for y in 0..h {
                for xo in 0..ow {
                    let (i0, w0, i1, w1) = upsample_taps::<T>(xo, w);
                    tmp[y * ow + xo] = w0 * plane[y * w + i0] + w1 * plane[y * w + i1];
                }
            }
            for yo in 0..oh {
                let (j0, w0, j1, w1) = upsample_taps::<T>(yo, h);
                for xo in 0..ow {
                    dst[yo * ow + xo] = w0 * tmp[j0 * ow + xo] + w1 * tmp[j1 * ow + xo];
                }
            }
        }
        let rg = self.needs(&[x]);
        self.push(out, Op::Upsample2 { x }, rg)
    }

    /// Concatenation along the channel axis.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let [n, _, h, w] = self.value(parts[0]).shape();
        let total: usize = parts
            .iter()
            .map(|&p| {
                let s = self.value(p).shape();
                assert!(s[0] == n && s[2] == h && s[3] == w, "concat operands differ in N/H/W");
                s[1]
            })
            .sum();
        let mut data = Vec::with_capacity(n * total * h * w);
        for s in 0..n {
            for &p in parts {
                data.extend_from_slice(self.value(p).sample(s));
            }
        }
        let out = Tensor::from_vec([n, total, h, w], data).unwrap();
        let rg = self.needs(parts);
        self.push(out, Op::Concat { parts: parts.to_vec() }, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let st = T::lit(s);
        self.unary(a, Op::Scale(a, s), |v| v * st)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, Op::Square(a), |v| v * v)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let m = sum_wide(v.data()) / T::lit(v.len() as f64);
        let rg = self.needs(&[a]);
        self.push(Tensor::scalar(m), Op::Mean(a), rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = sum_wide(self.value(a).data());
        let rg = self.needs(&[a]);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    /// Forward difference along x, same size, zero in the last column.
    pub fn diff_x(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let w = v.width();
        let mut out = Tensor::zeros(v.shape());
        for (dst, src) in out.data_mut().chunks_exact_mut(w).zip(v.data().chunks_exact(w)) {
            for x in 0..w - 1 {
                dst[x] = src[x + 1] - src[x];
            }
        }
        let rg = self.needs(&[a]);
        self.push(out, Op::DiffX(a), rg)
    }

    /// Forward difference along y, same size, zero in the last row.
    pub fn diff_y(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let [_, _, h, w] = v.shape();
        let mut out = Tensor::zeros(v.shape());
        for (dst, src) in out.data_mut().chunks_exact_mut(h * w).zip(v.data().chunks_exact(h * w)) {
            for i in 0..(h - 1) * w {
                dst[i] = src[i + w] - src[i];
            }
        }
        let rg = self.needs(&[a]);
        self.push(out, Op::DiffY(a), rg)
    }

    /// Backpropagates from a scalar node.
    pub fn backward(&mut self, loss: Var) {
        assert_eq!(
            self.value(loss).len(),
            1,
            "backward() needs a scalar; use backward_with"
        );
        self.backward_with(loss, vec![T::one()]);
    }

    /// Backpropagates an explicit output gradient.
    pub fn backward_with(&mut self, out: Var, seed: Vec<T>) {
        assert_eq!(seed.len(), self.value(out).len(), "seed gradient size");
        if !self.nodes[out.0].requires_grad {
            return;
        }
        self.accumulate(out, seed);
        for i in (0..=out.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = self.nodes[i].grad.take() else {
                continue;
            };
            let contribs = self.local_grads(i, &g);
            self.nodes[i].grad = Some(g);
            for (v, d) in contribs {
                self.accumulate(v, d);
            }
        }
    }

    fn accumulate(&mut self, v: Var, d: Vec<T>) {
        let node = &mut self.nodes[v.0];
        match &mut node.grad {
            Some(g) => g.iter_mut().zip(&d).for_each(|(a, b)| *a += *b),
            slot => *slot = Some(d),
        }
    }

    /// Gradients flowing from node `i` (with output gradient `g`) into its
    /// operands that require them.
    fn local_grads(&self, i: usize, g: &[T]) -> Vec<(Var, Vec<T>)> {
        let node = &self.nodes[i];
        let want = |v: Var| self.nodes[v.0].requires_grad;
        let val = |v: Var| self.value(v);
        let mut out = Vec::new();
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d { x, w, b, k } => {
                let (xv, wv) = (val(*x), val(*w));
                let [n, ci, h, wd] = xv.shape();
                let co = wv.shape()[0];
                let k = *k;
                let hw = h * wd;
                let kk = ci * k * k;
                if want(*b) {
                    let mut db = vec![T::zero(); co];
                    for s in 0..n {
                        for (c, plane) in g[s * co * hw..(s + 1) * co * hw].chunks_exact(hw).enumerate() {
                            db[c] += sum_wide(plane);
                        }
                    }
                    out.push((*b, db));
                }
                let mut dw = want(*w).then(|| vec![T::zero(); co * kk]);
                let mut dx = want(*x).then(|| vec![T::zero(); xv.len()]);
                let mut cols = vec![T::zero(); if k == 1 { 0 } else { kk * hw }];
                let mut dcols = vec![T::zero(); kk * hw];
                for s in 0..n {
                    let gs = &g[s * co * hw..(s + 1) * co * hw];
                    if let Some(dw) = dw.as_mut() {
                        let patches: &[T] = if k == 1 {
                            xv.sample(s)
                        } else {
                            im2col(xv.sample(s), ci, h, wd, k, &mut cols);
                            &cols
                        };
                        gemm(co, hw, kk, gs, (hw, 1), patches, (1, hw), T::one(), dw);
                    }
                    if let Some(dx) = dx.as_mut() {
                        let dxs = &mut dx[s * ci * hw..(s + 1) * ci * hw];
                        if k == 1 {
                            gemm(kk, co, hw, wv.data(), (1, kk), gs, (hw, 1), T::zero(), dxs);
                        } else {
                            gemm(kk, co, hw, wv.data(), (1, kk), gs, (hw, 1), T::zero(), &mut dcols);
                            col2im(&dcols, ci, h, wd, k, dxs);
                        }
                    }
                }
                if let Some(dw) = dw {
                    out.push((*w, dw));
                }
                if let Some(dx) = dx {
                    out.push((*x, dx));
                }
            }
            Op::Act { x, kind } => {
                let d = val(*x)
                    .data()
                    .iter()
                    .zip(g)
                    .map(|(&v, &gv)| gv * kind.derivative(v))
                    .collect();
                out.push((*x, d));
            }
            Op::Sigmoid { x } => {
                let d = node
                    .value
                    .data()
                    .iter()
                    .zip(g)
                    .map(|(&y, &gv)| gv * y * (T::one() - y))
                    .collect();
                out.push((*x, d));
            }
            Op::AvgPool2 { x } => {
                let [n, c, h, w] = val(*x).shape();
                let (oh, ow) = (h / 2, w / 2);
                let mut d = vec![T::zero(); n * c * h * w];
                for (p, dst) in d.chunks_exact_mut(h * w).enumerate() {
                    let gp = &g[p * oh * ow..(p + 1) * oh * ow];
                    for y in 0..oh {
                        for xo in 0..ow {
                            let q = T::lit(0.25) * gp[y * ow + xo];
                            let i = 2 * y * w + 2 * xo;
                            dst[i] = q;
                            dst[i + 1] = q;
                            dst[i + w] = q;
                            dst[i + w + 1] = q;
                        }
                    }
                }
                out.push((*x, d));
            }
            Op::Upsample2 { x } => {
                let [n, c, h, w] = val(*x).shape();
                let (oh, ow) = (2 * h, 2 * w);
                let mut d = vec![T::zero(); n * c * h * w];
                let mut tmp = vec![T::zero(); h * ow];
                for (p, dst) in d.chunks_exact_mut(h * w).enumerate() {
                    let gp = &g[p * oh * ow..(p + 1) * oh * ow];
                    tmp.fill(T::zero());
                    for yo in 0..oh {
                        let (j0, w0, j1, w1) = upsample_taps::<T>(yo, h);
                        for xo in 0..ow {
                            let gv = gp[yo * ow + xo];
                            tmp[j0 * ow + xo] += w0 * gv;
                            tmp[j1 * ow + xo] += w1 * gv;
                        }
                    }
                    for y in 0..h {
                        for xo in 0..ow {
                            let (i0, w0, i1, w1) = upsample_taps::<T>(xo, w);
                            let gv = tmp[y * ow + xo];
                            dst[y * w + i0] += w0 * gv;
                            dst[y * w + i1] += w1 * gv;
                        }
                    }
                }
                out.push((*x, d));
            }
            Op::Concat { parts } => {
                let [n, total, h, w] = node.value.shape();
                let hw = h * w;
                let mut offset = 0;
                for &p in parts {
                    let c = val(p).channels();
                    if want(p) {
                        let mut d = Vec::with_capacity(n * c * hw);
                        for s in 0..n {
                            let base = (s * total + offset) * hw;
                            d.extend_from_slice(&g[base..base + c * hw]);
                        }
                        out.push((p, d));
                    }
                    offset += c;
                }
            }
            Op::Add(a, b) => {
                if want(*a) {
                    out.push((*a, g.to_vec()));
                }
                if want(*b) {
                    out.push((*b, g.to_vec()));
                }
            }
            Op::Sub(a, b) => {
                if want(*a) {
                    out.push((*a, g.to_vec()));
                }
                if want(*b) {
                    out.push((*b, g.iter().map(|&v| -v).collect()));
                }
            }
            Op::Mul(a, b) => {
                if want(*a) {
                    out.push((*a, g.iter().zip(val(*b).data()).map(|(&x, &y)| x * y).collect()));
                }
                if want(*b) {
                    out.push((*b, g.iter().zip(val(*a).data()).map(|(&x, &y)| x * y).collect()));
                }
            }
            Op::Scale(a, s) => {
                let s = T::lit(*s);
                out.push((*a, g.iter().map(|&v| v * s).collect()));
            }
            Op::Square(a) => {
                out.push((*a, g.iter().zip(val(*a).data()).map(|(&gv, &x)| (x + x) * gv).collect()));
            }
            Op::Mean(a) => {
                let len = val(*a).len();
                out.push((*a, vec![g[0] / T::lit(len as f64); len]));
            }
            Op::Sum(a) => out.push((*a, vec![g[0]; val(*a).len()])),
            Op::DiffX(a) => {
                let w = val(*a).width();
                let mut d = vec![T::zero(); g.len()];
                for (dst, gr) in d.chunks_exact_mut(w).zip(g.chunks_exact(w)) {
                    for x in 0..w - 1 {
                        dst[x + 1] += gr[x];
                        dst[x] -= gr[x];
                    }
                }
                out.push((*a, d));
            }
            Op::DiffY(a) => {
                let [_, _, h, w] = val(*a).shape();
                let mut d = vec![T::zero(); g.len()];
                for (dst, gp) in d.chunks_exact_mut(h * w).zip(g.chunks_exact(h * w)) {
                    for i in 0..(h - 1) * w {
                        dst[i + w] += gp[i];
                        dst[i] -= gp[i];
                    }
                }
                out.push((*a, d));
            }
        }
        out
    }
}

/// Object-safe view of the graph operations, so that layers and losses can
/// be built on a graph of either element type.
pub trait Ops {
    /// Adds a constant converted from `f32`.
    fn constant(&mut self, t: &Tensor) -> Var;
    fn shape(&self, v: Var) -> [usize; 4];
    fn conv2d(&mut self, x: Var, w: Var, b: Var) -> Var;
    fn activation(&mut self, x: Var, kind: Activation) -> Var;
    fn sigmoid(&mut self, x: Var) -> Var;
    fn avg_pool2(&mut self, x: Var) -> Var;
    fn upsample2(&mut self, x: Var) -> Var;
    fn concat(&mut self, parts: &[Var]) -> Var;
    fn add(&mut self, a: Var, b: Var) -> Var;
    fn sub(&mut self, a: Var, b: Var) -> Var;
    fn mul(&mut self, a: Var, b: Var) -> Var;
    fn scale(&mut self, a: Var, s: f64) -> Var;
    fn square(&mut self, a: Var) -> Var;
    fn mean(&mut self, a: Var) -> Var;
    fn sum(&mut self, a: Var) -> Var;
    fn diff_x(&mut self, a: Var) -> Var;
    fn diff_y(&mut self, a: Var) -> Var;
}

impl<T: Scalar> Ops for Graph<T> {
    fn constant(&mut self, t: &Tensor) -> Var {
        Graph::input(self, t.cast())
    }

    fn shape(&self, v: Var) -> [usize; 4] {
        self.value(v).shape()
    }

    fn conv2d(&mut self, x: Var, w: Var, b: Var) -> Var {
        Graph::conv2d(self, x, w, b)
    }

    fn activation(&mut self, x: Var, kind: Activation) -> Var {
        Graph::activation(self, x, kind)
    }

    fn sigmoid(&mut self, x: Var) -> Var {
        Graph::sigmoid(self, x)
    }

    fn avg_pool2(&mut self, x: Var) -> Var {
        Graph::avg_pool2(self, x)
    }

    fn upsample2(&mut self, x: Var) -> Var {
        Graph::upsample2(self, x)
    }

    fn concat(&mut self, parts: &[Var]) -> Var {
        Graph::concat(self, parts)
    }

    fn add(&mut self, a: Var, b: Var) -> Var {
        Graph::add(self, a, b)
    }

    fn sub(&mut self, a: Var, b: Var) -> Var {
        Graph::sub(self, a, b)
    }

    fn mul(&mut self, a: Var, b: Var) -> Var {
        Graph::mul(self, a, b)
    }

    fn scale(&mut self, a: Var, s: f64) -> Var {
        Graph::scale(self, a, s)
    }

    fn square(&mut self, a: Var) -> Var {
        Graph::square(self, a)
    }

    fn mean(&mut self, a: Var) -> Var {
        Graph::mean(self, a)
    }

    fn sum(&mut self, a: Var) -> Var {
        Graph::sum(self, a)
    }

    fn diff_x(&mut self, a: Var) -> Var {
        Graph::diff_x(self, a)
    }

    fn diff_y(&mut self, a: Var) -> Var {
        Graph::diff_y(self, a)
    }
}
