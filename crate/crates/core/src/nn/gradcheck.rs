use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::graph::{Graph, Ops, Var};
use super::network::Network;
use super::tensor::Tensor;

/// Central-difference step.
pub const FD_STEP: f32 = 1e-3;
/// Gradients smaller than this are compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-2;
/// Elements checked per tensor; smaller tensors are checked exhaustively.
pub const MAX_CHECKS_PER_TENSOR: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckEntry {
    pub name: String,
    pub max_rel_error: f64,
    pub checked: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradReport {
    pub entries: Vec<GradCheckEntry>,
}

impl GradReport {
    pub fn max_rel_error(&self) -> f64 {
        self.entries.iter().map(|e| e.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error() < tol
    }
}

impl std::fmt::Display for GradReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for e in &self.entries {
            writeln!(
                f,
                "{:<28} {:>4} checked  max rel err {:.3e}",
                e.name, e.checked, e.max_rel_error
            )?;
        }
        Ok(())
    }
}

fn weighted_sum(y: &[f64], w: &[f32]) -> f64 {
    y.iter().zip(w).map(|(&a, &b)| a * b as f64).sum()
}

/// Compares analytic and central-difference gradients of `L = Σ w·f(x)`,
/// with `w` a fixed standard-normal weighting drawn from `seed`, for every
/// named input tensor. `|a - n| / max(|a|, |n|, REL_FLOOR)` is reported.
///
/// Analytic gradients come from the `f32` graph. The differences are taken
/// on an `f64` graph built by the same code, so that `f32` rounding in the
/// forward pass does not swamp the quotient at step `FD_STEP`.
pub fn check_gradients<F>(inputs: &[(String, Tensor)], build: F, seed: u64) -> GradReport
where
    F: Fn(&mut dyn Ops, &[Var]) -> Var,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let run = |values: &[Tensor<f64>]| {
        let mut g = Graph::<f64>::default();
        let vars: Vec<Var> = values.iter().map(|t| g.input(t.clone())).collect();
        let y = build(&mut g, &vars);
        (g, y)
    };
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|(_, t)| g.param(t.clone())).collect();
    let y = build(&mut g, &vars);
    let weights: Vec<f32> = (0..g.value(y).len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    g.backward_with(y, weights.clone());
    let mut values: Vec<Tensor<f64>> = inputs.iter().map(|(_, t)| t.cast()).collect();

    let mut report = GradReport::default();
    for (k, (name, t)) in inputs.iter().enumerate() {
        let analytic = g
            .grad(vars[k])
            .map(|s| s.to_vec())
            .unwrap_or_else(|| vec![0.0; t.len()]);
        let idx: Vec<usize> = if t.len() <= MAX_CHECKS_PER_TENSOR {
            (0..t.len()).collect()
        } else {
            let mut v = rand::seq::index::sample(&mut rng, t.len(), MAX_CHECKS_PER_TENSOR).into_vec();
            v.sort_unstable();
            v
        };
        let mut worst = 0.0f64;
        for &i in &idx {
            let x0 = values[k].data()[i];
            let h = FD_STEP as f64;
            values[k].data_mut()[i] = x0 + h;
            let (gp, yp) = run(&values);
            let lp = weighted_sum(gp.value(yp).data(), &weights);
            values[k].data_mut()[i] = x0 - h;
            let (gm, ym) = run(&values);
            let lm = weighted_sum(gm.value(ym).data(), &weights);
            values[k].data_mut()[i] = x0;
            let numeric = (lp - lm) / (2.0 * h);
            let a = analytic[i] as f64;
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
            worst = worst.max(err);
        }
        report.entries.push(GradCheckEntry {
            name: name.clone(),
            max_rel_error: worst,
            checked: idx.len(),
        });
    }
    report
}

/// Gradient check of every parameter tensor of `net` at input `x`.
pub fn grad_check(net: &Network, x: &Tensor, seed: u64) -> GradReport {
    let inputs: Vec<(String, Tensor)> = net.params().iter().map(|p| (p.name.clone(), p.value.clone())).collect();
    check_gradients(
        &inputs,
        |g, params| {
            let xv = g.constant(x);
            net.forward(g, params, xv)
        },
        seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_passes_exhaustively() {
        let t = Tensor::from_vec([1, 1, 2, 2], vec![0.3, -0.2, 0.7, 1.1]).unwrap();
        let r = check_gradients(&[("x".into(), t)], |g, v| g.square(v[0]), 1);
        assert_eq!(r.entries.len(), 1);
        assert_eq!(r.entries[0].checked, 4);
        assert!(r.passes(1e-3), "{r}");
    }
}
