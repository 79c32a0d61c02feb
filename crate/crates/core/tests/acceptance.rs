//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Reference values come from oracles written here (direct loops, line
//! searches, non-separable filters), not from the library under test.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use intrinsic_core::apps::{clipped_mask, despecularize_linear, whitebalance_linear};
use intrinsic_core::formation::{
    albedo_from_chroma, chroma_to_shading, divide, grayscale_oracle, inverse_shading, shading_from_inverse,
    shading_to_chroma, ChromaMap,
};
use intrinsic_core::kv::KvDoc;
use intrinsic_core::metrics::{albedo_masks, intensity_chroma_error, lmse, lmse_window, si_rmse, ssim};
use intrinsic_core::nn::{
    check_gradients, grad_check, mse_loss, msg, msg_loss, Activation, GradReport, NetSpec, Network, Ops, Tensor, Var,
};
use intrinsic_core::pipeline::{ablation_variants, ls_scale_align, run_ablation, train_stage, TREND_VARIANTS};
use intrinsic_core::synth::{gen_dataset, gen_scene, scene_seed, SceneParams};
use intrinsic_core::{ColorSpace, LinearImage, EPS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit: Duration) -> String {
    format!("{:.1}s of {:.0}s", elapsed.as_secs_f64(), limit.as_secs_f64())
}

fn random_image(w: usize, h: usize, c: usize, lo: f32, hi: f32, rng: &mut ChaCha8Rng) -> LinearImage {
    let data = (0..w * h * c).map(|_| rng.random_range(lo..hi)).collect();
    LinearImage::from_vec(w, h, c, ColorSpace::Linear, data).unwrap()
}

fn random_tensor(shape: [usize; 4], lo: f32, hi: f32, seed: u64) -> Tensor {
    Tensor::uniform(shape, lo, hi, seed)
}

// ---------------------------------------------------------------------------

fn formation_identities() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut e1, mut e_gray, mut e_rgb, mut e_hat) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let n_scenes = 1000;
    for i in 0..n_scenes {
        let params = SceneParams {
            resolution: 32,
            light_chroma_strength: rng.random_range(0.0..1.0),
            specular_strength: rng.random_range(0.0..1.0),
            clip_probability: 0.3,
            ..SceneParams::default()
        };
        let c = gen_scene(&params, scene_seed(99, i)).unwrap().components;
        let (img, a, s, r) = (c.image.data(), c.albedo.data(), c.shading.data(), c.residual.data());
        for j in 0..img.len() {
            let recon = (a[j] * s[j]) as f64 + r[j] as f64;
            e1 = e1.max((img[j] as f64 - recon).abs());
        }
        let (ga, gs) = grayscale_oracle(&c.image, &c.albedo, EPS).unwrap();
        let n = c.image.pixels();
        for ch in 0..3 {
            for p in 0..n {
                let sg = gs.data()[p];
                if sg >= EPS {
                    let v = (ga.plane(ch)[p] * sg) as f64;
                    e_gray = e_gray.max((c.image.plane(ch)[p] as f64 - v).abs());
                }
            }
        }
        let sc = divide(&c.image, &c.albedo, EPS).unwrap();
        for j in 0..img.len() {
            if a[j] >= EPS {
                e_rgb = e_rgb.max((img[j] as f64 - (a[j] * sc.data()[j]) as f64).abs());
            }
        }
        let (_, chroma) = shading_to_chroma(&sc, EPS).unwrap();
        let low = ChromaMap::new(intrinsic_core::pipeline::downsample_level(chroma.image(), 2).unwrap()).unwrap();
        let (ah, sh) = albedo_from_chroma(&c.image, &gs, &low, EPS).unwrap();
        for j in 0..img.len() {
            if sh.data()[j] >= EPS {
                e_hat = e_hat.max((img[j] as f64 - (ah.data()[j] * sh.data()[j]) as f64).abs());
            }
        }
    }
    let t = start.elapsed();
    check(
        e1 < 1e-6 && e_gray < 1e-5 && e_rgb < 1e-5 && e_hat < 1e-5 && t < Duration::from_secs(60),
        format!(
            "{n_scenes} scenes: residual model {e1:.2e} (< 1e-6), grayscale {e_gray:.2e}, RGB {e_rgb:.2e}, \
             chroma-based RGB {e_hat:.2e} (< 1e-5); {}",
            within(t, Duration::from_secs(60))
        ),
    )
}

fn bijection_round_trips() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n_px = 333_334;
    let s = random_image(n_px, 1, 3, 1e-3, 1.0, &mut rng);
    let (lum, c) = shading_to_chroma(&s, EPS).unwrap();
    let back = chroma_to_shading(&lum, &c).unwrap();
    let e_chroma = s.max_abs_diff(&back) as f64;

    let sd = random_image(1_000_000, 1, 1, 0.0, 4.0, &mut rng);
    let e_s = sd.max_abs_diff(&shading_from_inverse(&inverse_shading(&sd).unwrap()).unwrap()) as f64;
    let d = LinearImage::from_vec(
        1_000_000,
        1,
        1,
        ColorSpace::Data,
        (0..1_000_000).map(|_| 1.0 - rng.random_range(0.0f32..0.95)).collect(),
    )
    .unwrap();
    let e_d = d.max_abs_diff(&inverse_shading(&shading_from_inverse(&d).unwrap()).unwrap()) as f64;
    let t = start.elapsed();
    check(
        e_chroma < 1e-6 && e_s < 1e-6 && e_d < 1e-6,
        format!(
            "chroma {e_chroma:.2e} over {} values in [1e-3, 1); S->D->S {e_s:.2e} over 1e6 in [0, 4); \
             D->S->D {e_d:.2e} over 1e6 in (0.05, 1] (< 1e-6); {:.1}s",
            3 * n_px,
            t.as_secs_f64()
        ),
    )
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let r = random_tensor;
    let signed = |shape: [usize; 4], seed: u64| {
        let mut t = r(shape, 0.05, 1.0, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
        for v in t.data_mut() {
            if rng.random_bool(0.5) {
                *v = -*v;
            }
        }
        t
    };
    type Build = Box<dyn Fn(&mut dyn Ops, &[Var]) -> Var>;
    let cases: Vec<(&str, Vec<Tensor>, Build)> = vec![
        (
            "conv3x3",
            vec![
                r([2, 3, 8, 8], -1.0, 1.0, 1),
                r([4, 3, 3, 3], -0.5, 0.5, 2),
                r([1, 4, 1, 1], -0.5, 0.5, 3),
            ],
            Box::new(|g, v| g.conv2d(v[0], v[1], v[2])),
        ),
        (
            "conv1x1",
            vec![
                r([1, 3, 8, 8], -1.0, 1.0, 4),
                r([2, 3, 1, 1], -0.5, 0.5, 5),
                r([1, 2, 1, 1], -0.5, 0.5, 6),
            ],
            Box::new(|g, v| g.conv2d(v[0], v[1], v[2])),
        ),
        (
            "relu",
            vec![signed([1, 3, 8, 8], 7)],
            Box::new(|g, v| g.activation(v[0], Activation::Relu)),
        ),
        (
            "leaky_relu",
            vec![signed([1, 3, 8, 8], 8)],
            Box::new(|g, v| g.activation(v[0], Activation::LeakyRelu)),
        ),
        (
            "elu",
            vec![signed([1, 3, 8, 8], 9)],
            Box::new(|g, v| g.activation(v[0], Activation::Elu)),
        ),
        (
            "sigmoid",
            vec![r([1, 3, 8, 8], -4.0, 4.0, 10)],
            Box::new(|g, v| g.sigmoid(v[0])),
        ),
        (
            "avg_pool2",
            vec![r([1, 3, 8, 8], -1.0, 1.0, 11)],
            Box::new(|g, v| g.avg_pool2(v[0])),
        ),
        (
            "upsample2",
            vec![r([1, 3, 8, 8], -1.0, 1.0, 12)],
            Box::new(|g, v| g.upsample2(v[0])),
        ),
        (
            "concat",
            vec![r([1, 2, 8, 8], -1.0, 1.0, 13), r([1, 3, 8, 8], -1.0, 1.0, 14)],
            Box::new(|g, v| g.concat(&[v[0], v[1]])),
        ),
        (
            "mul",
            vec![r([1, 2, 8, 8], -1.0, 1.0, 15), r([1, 2, 8, 8], -1.0, 1.0, 16)],
            Box::new(|g, v| g.mul(v[0], v[1])),
        ),
        (
            "add_sub",
            vec![r([1, 2, 8, 8], -1.0, 1.0, 17), r([1, 2, 8, 8], -1.0, 1.0, 18)],
            Box::new(|g, v| {
                let a = g.add(v[0], v[1]);
                g.sub(a, v[1])
            }),
        ),
        (
            "square_scale",
            vec![r([1, 2, 8, 8], -1.0, 1.0, 19)],
            Box::new(|g, v| {
                let s = g.square(v[0]);
                g.scale(s, -1.7)
            }),
        ),
        (
            "mean",
            vec![r([1, 3, 8, 8], -1.0, 1.0, 20)],
            Box::new(|g, v| g.mean(v[0])),
        ),
        (
            "sum",
            vec![r([1, 3, 8, 8], -1.0, 1.0, 21)],
            Box::new(|g, v| g.sum(v[0])),
        ),
        (
            "diff_x",
            vec![r([1, 3, 8, 8], -1.0, 1.0, 22)],
            Box::new(|g, v| g.diff_x(v[0])),
        ),
        (
            "diff_y",
            vec![r([1, 3, 8, 8], -1.0, 1.0, 23)],
            Box::new(|g, v| g.diff_y(v[0])),
        ),
        (
            "mse_loss",
            vec![r([1, 3, 8, 8], 0.0, 1.0, 24), r([1, 3, 8, 8], 0.0, 1.0, 25)],
            Box::new(|g, v| mse_loss(g, v[0], v[1])),
        ),
        (
            "msg_loss",
            vec![r([1, 3, 8, 8], 0.0, 1.0, 26), r([1, 3, 8, 8], 0.0, 1.0, 27)],
            Box::new(|g, v| msg_loss(g, v[0], v[1], 4)),
        ),
    ];
    let mut worst = (0.0f64, String::new());
    let mut failed = Vec::new();
    let mut record = |name: &str, rep: &GradReport| {
        let e = rep.max_rel_error();
        if e > worst.0 {
            worst = (e, name.to_string());
        }
        if !rep.passes(1e-3) {
            failed.push(format!("{name} {e:.2e}"));
        }
    };
    for (name, inputs, build) in &cases {
        let named: Vec<(String, Tensor)> = inputs
            .iter()
            .enumerate()
            .map(|(i, t)| (format!("{name}.{i}"), t.clone()))
            .collect();
        record(name, &check_gradients(&named, build, 7));
    }
    let net = Network::new(NetSpec::new(3, 2, &[4, 6]).with_convs_per_block(2), 3).unwrap();
    record("two_layer_net", &grad_check(&net, &r([1, 3, 8, 8], 0.0, 1.0, 30), 11));
    let net = Network::new(NetSpec::new(7, 2, &[3, 4, 5]).with_out_level(2), 4).unwrap();
    record(
        "low_res_head_net",
        &grad_check(&net, &r([2, 7, 8, 8], 0.0, 1.0, 31), 12),
    );
    let t = start.elapsed();
    let n = cases.len() + 2;
    check(
        failed.is_empty() && t < Duration::from_secs(60),
        format!(
            "{n} cases on 8x8 inputs, worst {:.2e} ({}) (< 1e-3){}; {}",
            worst.0,
            worst.1,
            if failed.is_empty() {
                String::new()
            } else {
                format!(", failing: {}", failed.join(", "))
            },
            within(t, Duration::from_secs(60))
        ),
    )
}

fn loss_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    // Values on a 1/256 grid so that P + c is exact in f32.
    let mut worst_msg = 0.0f32;
    for trial in 0..20 {
        let shape = [2, 3, 16, 16];
        let n: usize = shape.iter().product();
        let p: Vec<f32> = (0..n).map(|_| rng.random_range(0..256) as f32 / 256.0).collect();
        let c = rng.random_range(-64..64) as f32 / 128.0;
        let q: Vec<f32> = p.iter().map(|v| v + c).collect();
        let (p, q) = (Tensor::from_vec(shape, p).unwrap(), Tensor::from_vec(shape, q).unwrap());
        worst_msg = worst_msg.max(msg(&p, &q, 1 + trial % 4).abs());
    }
    let mut worst_alpha = 0.0f64;
    for &alpha in &[0.5f32, 1.0, 2.0] {
        for _ in 0..10 {
            let gt = random_image(16, 16, 3, 0.0, 1.0, &mut rng);
            let reference = gt.map(ColorSpace::Linear, |v| alpha * v).unwrap();
            let est = ls_scale_align(&gt, &reference).unwrap();
            worst_alpha = worst_alpha.max((est - alpha as f64).abs());
        }
    }
    check(
        worst_msg == 0.0 && worst_alpha < 1e-6,
        format!(
            "msg_loss(P, P+c) max {worst_msg:e} (= 0); planted scales 0.5/1/2 recovered to {worst_alpha:.1e} (< 1e-6)"
        ),
    )
}

// Oracles for the metric check.

/// Minimiser of a convex 1-D function on [lo, hi] by golden-section search.
fn golden(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let a = hi - r * (hi - lo);
        let b = lo + r * (hi - lo);
        if f(a) < f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    (lo + hi) / 2.0
}

fn sse(p: &[f64], g: &[f64], alpha: f64) -> f64 {
    p.iter().zip(g).map(|(a, b)| (alpha * a - b).powi(2)).sum()
}

fn oracle_si_rmse(p: &LinearImage, g: &LinearImage) -> f64 {
    let pv: Vec<f64> = p.data().iter().map(|&v| v as f64).collect();
    let gv: Vec<f64> = g.data().iter().map(|&v| v as f64).collect();
    let alpha = golden(|a| sse(&pv, &gv, a), 0.0, 20.0);
    (sse(&pv, &gv, alpha) / pv.len() as f64).sqrt()
}

fn oracle_lmse(p: &LinearImage, g: &LinearImage, k: usize) -> f64 {
    let (w, h) = (p.width(), p.height());
    let (mut num, mut den) = (0.0, 0.0);
    for y0 in (0..).map(|i| i * (k / 2)).take_while(|y| y + k <= h) {
        for x0 in (0..).map(|i| i * (k / 2)).take_while(|x| x + k <= w) {
            let (mut pv, mut gv) = (Vec::new(), Vec::new());
            for c in 0..p.channels() {
                for y in y0..y0 + k {
                    for x in x0..x0 + k {
                        pv.push(p.get(c, x, y) as f64);
                        gv.push(g.get(c, x, y) as f64);
                    }
                }
            }
            let alpha = golden(|a| sse(&pv, &gv, a), 0.0, 100.0);
            num += sse(&pv, &gv, alpha);
            den += gv.iter().map(|v| v * v).sum::<f64>();
        }
    }
    num / den
}

fn oracle_ssim(p: &LinearImage, g: &LinearImage) -> f64 {
    let (w, h) = (p.width(), p.height());
    let k = 11.min(w).min(h);
    let mid = (k as f64 - 1.0) / 2.0;
    let mut wts = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            wts[i * k + j] = (-((i as f64 - mid).powi(2) + (j as f64 - mid).powi(2)) / (2.0 * 1.5 * 1.5)).exp();
        }
    }
    let s: f64 = wts.iter().sum();
    wts.iter_mut().for_each(|v| *v /= s);
    let gmax = g.data().iter().fold(f64::MIN, |m, &v| m.max(v as f64));
    let gmin = g.data().iter().fold(f64::MAX, |m, &v| m.min(v as f64));
    let l = if gmax > gmin { gmax - gmin } else { 1.0 };
    let (c1, c2) = ((0.01 * l).powi(2), (0.03 * l).powi(2));
    let (mut total, mut count) = (0.0, 0);
    for c in 0..p.channels() {
        for y0 in 0..=h - k {
            for x0 in 0..=w - k {
                let (mut mx, mut my) = (0.0, 0.0);
                for i in 0..k {
                    for j in 0..k {
                        let wt = wts[i * k + j];
                        mx += wt * p.get(c, x0 + j, y0 + i) as f64;
                        my += wt * g.get(c, x0 + j, y0 + i) as f64;
                    }
                }
                let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
                for i in 0..k {
                    for j in 0..k {
                        let wt = wts[i * k + j];
                        let dx = p.get(c, x0 + j, y0 + i) as f64 - mx;
                        let dy = g.get(c, x0 + j, y0 + i) as f64 - my;
                        vx += wt * dx * dx;
                        vy += wt * dy * dy;
                        cxy += wt * dx * dy;
                    }
                }
                total += (2.0 * mx * my + c1) * (2.0 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1;
            }
        }
    }
    total / count as f64
}

fn oracle_intensity_chroma(p: &LinearImage, g: &LinearImage, masks: &[Vec<bool>]) -> (f64, f64) {
    let n = p.pixels();
    let (mut pv, mut gv) = (Vec::new(), Vec::new());
    for c in 0..3 {
        for i in 0..n {
            if masks.iter().any(|m| m[i]) {
                pv.push(p.plane(c)[i] as f64);
                gv.push(g.plane(c)[i] as f64);
            }
        }
    }
    let alpha = golden(|a| sse(&pv, &gv, a), 0.0, 20.0);
    let (mut inten, mut ang) = (0.0, 0.0);
    for m in masks {
        let idx: Vec<usize> = (0..n).filter(|&i| m[i]).collect();
        let mean =
            |img: &LinearImage, c: usize| idx.iter().map(|&i| img.plane(c)[i] as f64).sum::<f64>() / idx.len() as f64;
        let mp = [mean(p, 0), mean(p, 1), mean(p, 2)];
        let mg = [mean(g, 0), mean(g, 1), mean(g, 2)];
        let lum = |v: [f64; 3]| 0.2126 * v[0] + 0.7152 * v[1] + 0.0722 * v[2];
        inten += (alpha * lum(mp) - lum(mg)).powi(2);
        let dot: f64 = (0..3).map(|c| mp[c] * mg[c]).sum();
        let norm = |v: [f64; 3]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        ang += (dot / (norm(mp) * norm(mg))).clamp(-1.0, 1.0).acos().to_degrees();
    }
    (100.0 * inten / masks.len() as f64, ang / masks.len() as f64)
}

/// 16x16 ground truth with 4x4-pixel blocks of constant colour, and the
/// matching masks.
fn blocky_pair(rng: &mut ChaCha8Rng) -> (LinearImage, LinearImage, Vec<Vec<bool>>) {
    let colors: Vec<[f32; 3]> = (0..16)
        .map(|_| std::array::from_fn(|_| rng.random_range(0.1f32..0.9)))
        .collect();
    let g = LinearImage::from_fn(16, 16, 3, ColorSpace::Linear, |c, x, y| colors[(y / 4) * 4 + x / 4][c]).unwrap();
    let s = rng.random_range(0.3f32..3.0);
    let noise = random_image(16, 16, 3, 0.0, 1.0, rng);
    let p = g
        .zip_map(&noise, ColorSpace::Linear, |a, b| s * (0.6 * a + 0.4 * b))
        .unwrap();
    let masks = (0..16)
        .map(|b| (0..256).map(|i| ((i / 16) / 4) * 4 + (i % 16) / 4 == b).collect())
        .collect();
    (p, g, masks)
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = [0.0f64; 6];
    let mut mask_mismatch = 0;
    for _ in 0..100 {
        let (p, g, masks) = blocky_pair(&mut rng);
        let w = lmse_window(16, 16);
        let errs = [
            (lmse(&p, &g, w).unwrap() - oracle_lmse(&p, &g, w)).abs(),
            (lmse(&p, &g, 4).unwrap() - oracle_lmse(&p, &g, 4)).abs(),
            (si_rmse(&p, &g).unwrap() - oracle_si_rmse(&p, &g)).abs(),
            (ssim(&p, &g).unwrap() - oracle_ssim(&p, &g)).abs(),
        ];
        let (i, c) = intensity_chroma_error(&p, &g, &masks).unwrap();
        let (oi, oc) = oracle_intensity_chroma(&p, &g, &masks);
        for (k, e) in errs.into_iter().chain([(i - oi).abs(), (c - oc).abs()]).enumerate() {
            worst[k] = worst[k].max(e);
        }
        if albedo_masks(&g, 16).unwrap() != masks {
            mask_mismatch += 1;
        }
    }
    let names = [
        "lmse(window 2)",
        "lmse(window 4)",
        "si_rmse",
        "ssim",
        "intensity",
        "chromaticity",
    ];
    let detail: Vec<String> = names.iter().zip(worst).map(|(n, e)| format!("{n} {e:.1e}")).collect();
    check(
        worst.iter().all(|&e| e < 1e-5) && mask_mismatch == 0,
        format!(
            "100 random 16x16 pairs, max |impl - oracle|: {} (< 1e-5); mask mismatches {mask_mismatch}",
            detail.join(", ")
        ),
    )
}

fn training_smoke(work: &Path) -> Outcome {
    let start = Instant::now();
    let params = SceneParams {
        resolution: 64,
        seed: 7,
        ..SceneParams::default()
    };
    let data = work.join("smoke_data");
    gen_dataset(&params, 500, &data).map_err(|e| e.to_string())?;
    let mut doc = KvDoc::new();
    doc.set("dataset", data.join("manifest.txt").display())
        .set("seed", 1)
        .set("iterations", 1500)
        .set("batch_size", 8)
        .set("eval_interval", 250)
        .set("samples", 0);
    let spec = ablation_variants("chroma").unwrap();
    let runs: Vec<_> = (0..2)
        .map(|k| {
            let dir = work.join(format!("smoke_run{k}"));
            train_stage(&spec, &doc, &dir).map(|o| (o, dir))
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let (a, b) = (&runs[0], &runs[1]);
    let same_ckpt = fs::read(&a.0.checkpoint).unwrap() == fs::read(&b.0.checkpoint).unwrap();
    let same_curve = a.0.curve == b.0.curve;
    let (v0, v1) = (a.0.initial_val_mse(), a.0.final_val_mse());
    let drop = 1.0 - v1 / v0;
    let t = start.elapsed();
    let limit = Duration::from_secs(15 * 60);
    check(
        drop >= 0.5 && same_ckpt && same_curve && t < limit,
        format!(
            "500 scenes 64x64, batch 8, 1500 iterations: val L_mse(C) {v0:.5} -> {v1:.5} ({:.0}% drop, need >= 50%); \
             re-run identical checkpoint {same_ckpt}, curve {same_curve}; {}",
            100.0 * drop,
            within(t, limit)
        ),
    )
}

fn trend_reproduction(work: &Path) -> Outcome {
    let start = Instant::now();
    let params = SceneParams {
        resolution: 32,
        seed: 11,
        ..SceneParams::default()
    };
    let data = work.join("trend_data");
    gen_dataset(&params, 300, &data).map_err(|e| e.to_string())?;
    let mut doc = KvDoc::new();
    doc.set("dataset", data.join("manifest.txt").display())
        .set("seed", 1)
        .set("iterations", 600)
        .set("eval_interval", 600)
        .set("val_limit", 16)
        .set("samples", 0);
    let report =
        run_ablation(&doc, &TREND_VARIANTS, &[1, 2, 3], &work.join("trend_runs"), 0).map_err(|e| e.to_string())?;
    let trends = report.trends();
    let t = start.elapsed();
    let limit = Duration::from_secs(2 * 3600);
    let detail: Vec<String> = trends
        .iter()
        .map(|r| {
            format!(
                "{} {:.4} vs {} {:.4} {}",
                r.pair.better,
                r.better_mean,
                r.pair.worse,
                r.worse_mean,
                if r.holds() { "ok" } else { "REVERSED" }
            )
        })
        .collect();
    check(
        trends.len() == 3 && trends.iter().all(|r| r.holds()) && t < limit,
        format!(
            "3 seeds, mean test si-RMSE: {}; {}",
            detail.join("; "),
            within(t, limit)
        ),
    )
}

fn application_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut spec_before, mut spec_after) = (0.0f64, 0.0f64);
    let (mut mask_scenes, mut mask_mismatch, mut clipped_seen) = (0, 0, 0);
    let mut chroma_dev = 0.0f32;
    let mut wb_clipped = 0usize;
    for i in 0..100 {
        let params = SceneParams {
            resolution: 32,
            light_chroma_strength: rng.random_range(0.3..1.0),
            specular_strength: rng.random_range(0.3..1.0),
            clip_probability: 0.5,
            ..SceneParams::default()
        };
        let scene = gen_scene(&params, scene_seed(123, i)).unwrap();
        let c = &scene.components;
        let n = c.image.pixels();

        let out = despecularize_linear(c).unwrap();
        let diffuse = c.albedo.mul(&c.shading).unwrap();
        for p in (0..n).filter(|&p| scene.specular_mask.data()[p] > 0.0) {
            for ch in 0..3 {
                spec_before += c.residual.plane(ch)[p].max(0.0) as f64;
                spec_after += (out.plane(ch)[p] - diffuse.plane(ch)[p]).max(0.0) as f64;
            }
        }

        let mask = clipped_mask(&c.residual, 0.0).unwrap();
        mask_scenes += 1;
        clipped_seen += usize::from(scene.clipped_mask.data().contains(&1.0));
        if mask.data() != scene.clipped_mask.data() {
            mask_mismatch += 1;
        }

        // Neutrality is a property of the linear output; display clipping comes after.
        let wb = whitebalance_linear(c, false).unwrap();
        let sc = divide(&wb, &c.albedo, EPS).unwrap();
        let (_, chroma) = shading_to_chroma(&sc, EPS).unwrap();
        for p in 0..n {
            let albedo_ok = (0..3).all(|ch| c.albedo.plane(ch)[p] >= EPS);
            if !albedo_ok {
                continue;
            }
            if (0..3).any(|ch| wb.plane(ch)[p] > 1.0) {
                wb_clipped += 1;
            }
            for ch in 0..2 {
                chroma_dev = chroma_dev.max((chroma.image().plane(ch)[p] - 0.5).abs());
            }
        }
    }
    let removed = if spec_before > 0.0 {
        1.0 - spec_after / spec_before
    } else {
        0.0
    };
    check(
        spec_after == 0.0 && spec_before > 0.0 && mask_mismatch == 0 && clipped_seen > 0 && chroma_dev <= EPS,
        format!(
            "100 oracle scenes: despecularize removed {:.1}% of positive residual in the specular mask; \
             clipped mask (tau 0) mismatches {mask_mismatch}/{mask_scenes} ({clipped_seen} scenes clip); \
             white-balance chroma max |C - 0.5| {chroma_dev:.1e} (<= eps {EPS:e}) before display clipping, {wb_clipped} pixels above 1",
            100.0 * removed
        ),
    )
}

fn main() -> ExitCode {
    let work = tempfile::tempdir().expect("temporary directory");
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("formation identities", Box::new(formation_identities)),
        ("bijection round-trips", Box::new(bijection_round_trips)),
        ("gradient correctness", Box::new(gradient_correctness)),
        ("loss properties", Box::new(loss_properties)),
        ("metric oracles", Box::new(metric_oracles)),
        ("training smoke", Box::new(|| training_smoke(work.path()))),
        ("trend reproduction", Box::new(|| trend_reproduction(work.path()))),
        ("application correctness", Box::new(application_correctness)),
    ];
    // Optional name filters: `cargo test --test acceptance -- smoke`.
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let selected: Vec<_> = criteria
        .iter()
        .filter(|(name, _)| filters.is_empty() || filters.iter().any(|f| name.contains(f.as_str())))
        .collect();
    let mut failures = 0;
    for (name, run) in &selected {
        match run() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", selected.len() - failures, selected.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
