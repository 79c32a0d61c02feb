use super::graph::{Graph, Ops, Var};
use super::tensor::Tensor;

/// Scales used by [`msg_loss`] unless configured otherwise.
pub const DEFAULT_MSG_SCALES: usize = 4;

/// Mean squared error over every element.
pub fn mse_loss(g: &mut dyn Ops, pred: Var, target: Var) -> Var {
    let d = g.sub(pred, target);
    let sq = g.square(d);
    g.mean(sq)
}

/// Number of scales actually used for an `h×w` input: halving stops once a
/// side becomes odd or smaller than 2.
pub fn msg_scales(h: usize, w: usize, requested: usize) -> usize {
    let (mut h, mut w, mut n) = (h, w, 1);
    while n < requested && h % 2 == 0 && w % 2 == 0 && h >= 4 && w >= 4 {
        h /= 2;
        w /= 2;
        n += 1;
    }
    n
}

/// Multi-scale gradient loss.
///
/// At every scale the forward differences of `pred - target` along x and y
/// (zero in the last column/row) are squared and averaged over elements;
/// the per-scale sums are averaged over scales. Each coarser scale is a 2×
/// average pool of the previous one.
pub fn msg_loss(g: &mut dyn Ops, pred: Var, target: Var, scales: usize) -> Var {
    assert!(scales >= 1, "msg_loss needs at least one scale");
    let [_, _, h, w] = g.shape(pred);
    let m = msg_scales(h, w, scales);
    let mut d = g.sub(pred, target);
    let mut total: Option<Var> = None;
    for l in 0..m {
        if l > 0 {
            d = g.avg_pool2(d);
        }
        let dx = g.diff_x(d);
        let dy = g.diff_y(d);
        let sx = g.square(dx);
        let sy = g.square(dy);
        let mx = g.mean(sx);
        let my = g.mean(sy);
        let term = g.add(mx, my);
        total = Some(match total {
            Some(t) => g.add(t, term),
            None => term,
        });
    }
    g.scale(total.unwrap(), 1.0 / m as f64)
}

/// `w_mse * mse + w_msg * msg`, skipping zero-weight terms.
pub fn combined_loss(g: &mut dyn Ops, pred: Var, target: Var, w_mse: f32, w_msg: f32, scales: usize) -> Var {
    let mut parts = Vec::new();
    if w_mse != 0.0 {
        let l = mse_loss(g, pred, target);
        parts.push(g.scale(l, w_mse as f64));
    }
    if w_msg != 0.0 {
        let l = msg_loss(g, pred, target, scales);
        parts.push(g.scale(l, w_msg as f64));
    }
    match parts.as_slice() {
        [] => g.constant(&Tensor::scalar(0.0)),
        [one] => *one,
        [a, b] => g.add(*a, *b),
        _ => unreachable!(),
    }
}

/// Eager [`mse_loss`] on plain tensors.
pub fn mse(pred: &Tensor, target: &Tensor) -> f32 {
    let mut g = Graph::new();
    let (p, t) = (g.input(pred.clone()), g.input(target.clone()));
    let l = mse_loss(&mut g, p, t);
    g.value(l).item()
}

/// Eager [`msg_loss`] on plain tensors.
pub fn msg(pred: &Tensor, target: &Tensor, scales: usize) -> f32 {
    let mut g = Graph::new();
    let (p, t) = (g.input(pred.clone()), g.input(target.clone()));
    let l = msg_loss(&mut g, p, t, scales);
    g.value(l).item()
}
