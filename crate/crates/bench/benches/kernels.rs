use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use intrinsic_core::metrics::{lmse, lmse_window, si_rmse, ssim};
use intrinsic_core::nn::{mse_loss, Graph, NetSpec, Network, Tensor};
use intrinsic_core::synth::{gen_scene, SceneParams};

fn conv(c: &mut Criterion) {
    let x = Tensor::uniform([8, 16, 32, 32], -1.0, 1.0, 1);
    let w = Tensor::uniform([16, 16, 3, 3], -0.1, 0.1, 2);
    let b = Tensor::uniform([1, 16, 1, 1], -0.1, 0.1, 3);
    c.bench_function("conv3x3_forward_8x16x32x32", |bench| {
        bench.iter(|| {
            let mut g = Graph::new();
            let (xv, wv, bv) = (g.input(x.clone()), g.param(w.clone()), g.param(b.clone()));
            black_box(g.conv2d(xv, wv, bv));
        })
    });
    c.bench_function("conv3x3_forward_backward_8x16x32x32", |bench| {
        bench.iter(|| {
            let mut g = Graph::new();
            let (xv, wv, bv) = (g.input(x.clone()), g.param(w.clone()), g.param(b.clone()));
            let y = g.conv2d(xv, wv, bv);
            let loss = g.mean(y);
            g.backward(loss);
            black_box(g.value(loss));
        })
    });
}

fn network_step(c: &mut Criterion) {
    let net = Network::new(NetSpec::new(7, 2, &[8, 16, 32, 64]).with_out_level(2), 0).unwrap();
    let x = Tensor::uniform([8, 7, 64, 64], 0.0, 1.0, 4);
    let t = Tensor::uniform([8, 2, 16, 16], 0.0, 1.0, 5);
    c.bench_function("chroma_net_train_step_batch8_64px", |bench| {
        bench.iter(|| {
            let mut g = Graph::new();
            let params = net.bind(&mut g, true);
            let xv = g.input(x.clone());
            let tv = g.input(t.clone());
            let y = net.forward(&mut g, &params, xv);
            let loss = mse_loss(&mut g, y, tv);
            g.backward(loss);
            black_box(g.value(loss));
        })
    });
}

fn metrics(c: &mut Criterion) {
    let params = SceneParams {
        resolution: 128,
        ..SceneParams::default()
    };
    let a = gen_scene(&params, 1).unwrap().components.albedo;
    let b = gen_scene(&params, 2).unwrap().components.albedo;
    let w = lmse_window(a.width(), a.height());
    c.bench_function("lmse_128px", |bench| bench.iter(|| black_box(lmse(&a, &b, w).unwrap())));
    c.bench_function("si_rmse_128px", |bench| {
        bench.iter(|| black_box(si_rmse(&a, &b).unwrap()))
    });
    c.bench_function("ssim_128px", |bench| bench.iter(|| black_box(ssim(&a, &b).unwrap())));
}

fn generator(c: &mut Criterion) {
    let params = SceneParams {
        resolution: 64,
        ..SceneParams::default()
    };
    let mut seed = 0;
    c.bench_function("gen_scene_64px", |bench| {
        bench.iter(|| {
            seed += 1;
            black_box(gen_scene(&params, seed).unwrap())
        })
    });
}

criterion_group!(benches, conv, network_step, metrics, generator);
criterion_main!(benches);
