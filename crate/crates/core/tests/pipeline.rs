use std::fs;
use std::path::Path;

use intrinsic_core::formation::{albedo_from_chroma, grayscale_oracle};
use intrinsic_core::kv::KvDoc;
use intrinsic_core::metrics::{evaluate_dataset, MetricConfig};
use intrinsic_core::nn::Checkpoint;
use intrinsic_core::pipeline::{
    ablation_variants, read_curves, run_ablation, train_baseline, train_stage, GrayInput, Pipeline, StageId, StageSpec,
};
use intrinsic_core::synth::{gen_dataset, Dataset, SceneParams, Split};
use intrinsic_core::EPS;

fn tiny_dataset(dir: &Path) -> Dataset {
    let params = SceneParams {
        resolution: 32,
        seed: 5,
        ..SceneParams::default()
    };
    gen_dataset(&params, 24, dir).unwrap()
}

fn tiny_config(data: &Path) -> KvDoc {
    let mut doc = KvDoc::new();
    doc.set("dataset", data.join("manifest.txt").display())
        .set("seed", 3)
        .set("iterations", 6)
        .set("batch_size", 4)
        .set("eval_interval", 3)
        .set("samples", 1);
    for name in ["gray0", "albedo", "diffuse", "baseline", "albedo_image_only"] {
        doc.set(&format!("{name}.net.channels"), "4,8");
    }
    // Quarter-resolution outputs need three levels.
    for name in ["chroma", "direct_albedo"] {
        doc.set(&format!("{name}.net.channels"), "4,8,8");
    }
    doc
}

#[test]
fn stages_train_load_and_decompose() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let ds = tiny_dataset(&data);
    let doc = tiny_config(&data);
    let run = tmp.path().join("run");
    for stage in [StageId::Gray0, StageId::Chroma, StageId::Albedo, StageId::Diffuse] {
        let out = train_stage(&StageSpec::for_stage(stage), &doc, &run).unwrap();
        assert!(out.checkpoint.exists());
        assert_eq!(out.curve.first().unwrap().iteration, 0);
        assert_eq!(out.curve.last().unwrap().iteration, 6);
        assert_eq!(read_curves(&run, stage.name()).unwrap(), out.curve);
    }
    assert!(fs::read_dir(run.join("samples")).unwrap().count() >= 2);

    let pipe = Pipeline::load(&run).unwrap();
    assert!(pipe.gray.is_some());
    assert!(pipe.param_count() > 0);
    let entry = ds.split(Split::Test).next().unwrap();
    let gt = ds.load_scene(entry).unwrap().components;
    let (ga, gs) = grayscale_oracle(&gt.image, &gt.albedo, EPS).unwrap();
    let given = GrayInput::Given {
        gray_albedo: &ga,
        gray_shading: &gs,
    };
    let out = pipe.decompose(&gt.image, given).unwrap();
    // The chain closes the residual model exactly and keeps its intermediates.
    assert!(out.residual_identity_error().unwrap() < 1e-6);
    let chroma = out.chroma.as_ref().unwrap();
    assert_eq!(chroma.width(), 8);
    assert!(chroma.image().data().iter().all(|&v| v > 0.0 && v < 1.0));
    let (ac, sc) = albedo_from_chroma(&gt.image, &gs, chroma, EPS).unwrap();
    assert_eq!(out.approx_albedo.as_ref().unwrap().data(), ac.data());
    assert_eq!(out.approx_shading.as_ref().unwrap().data(), sc.data());
    assert!(out
        .inverse_shading
        .as_ref()
        .unwrap()
        .data()
        .iter()
        .all(|&v| v > 0.0 && v <= 1.0));

    let again = pipe.decompose(&gt.image, given).unwrap();
    assert_eq!(out.albedo.data(), again.albedo.data());
    let via_net = pipe.decompose(&gt.image, GrayInput::Network).unwrap();
    assert!(via_net.residual_identity_error().unwrap() < 1e-6);

    // Predictions saved per scene evaluate against the dataset.
    let pred = tmp.path().join("pred");
    let mut n_test = 0;
    for entry in ds.split(Split::Test) {
        let gt = ds.load_scene(entry).unwrap().components;
        let (ga, gs) = grayscale_oracle(&gt.image, &gt.albedo, EPS).unwrap();
        let given = GrayInput::Given {
            gray_albedo: &ga,
            gray_shading: &gs,
        };
        pipe.decompose(&gt.image, given)
            .unwrap()
            .save(&pred.join(&entry.id))
            .unwrap();
        n_test += 1;
    }
    let report = evaluate_dataset(
        &data.join("manifest.txt"),
        &pred,
        Some(Split::Test),
        &MetricConfig::default(),
    )
    .unwrap();
    assert_eq!(report.rows.len(), n_test);
    assert!(report.means().iter().all(|m| m.is_finite()));
    assert!(evaluate_dataset(&data.join("manifest.txt"), &pred, None, &MetricConfig::default()).is_err());
}

#[test]
fn training_is_deterministic_and_isolated() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    tiny_dataset(&data);
    let doc = tiny_config(&data);
    let spec = StageSpec::for_stage(StageId::Albedo);
    let a = train_stage(&spec, &doc, &tmp.path().join("a")).unwrap();
    let b = train_stage(&spec, &doc, &tmp.path().join("b")).unwrap();
    assert_eq!(fs::read(&a.checkpoint).unwrap(), fs::read(&b.checkpoint).unwrap());
    assert_eq!(a.curve, b.curve);

    // Training another stage in the same run leaves albedo untouched.
    train_stage(&StageSpec::for_stage(StageId::Diffuse), &doc, &tmp.path().join("a")).unwrap();
    assert_eq!(fs::read(&a.checkpoint).unwrap(), fs::read(&b.checkpoint).unwrap());
    assert_eq!(read_curves(&tmp.path().join("a"), "albedo").unwrap(), a.curve);

    let mut other = doc.clone();
    other.set("seed", 4);
    let c = train_stage(&spec, &other, &tmp.path().join("c")).unwrap();
    assert_ne!(fs::read(&a.checkpoint).unwrap(), fs::read(&c.checkpoint).unwrap());

    let ckpt = Checkpoint::load(&a.checkpoint).unwrap();
    assert_eq!(ckpt.to_bytes(), fs::read(&a.checkpoint).unwrap());
}

#[test]
fn upstream_checkpoints_feed_downstream_training() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    tiny_dataset(&data);
    let mut doc = tiny_config(&data);
    let run = tmp.path().join("run");
    let chroma = train_stage(&StageSpec::for_stage(StageId::Chroma), &doc, &run).unwrap();
    doc.set("albedo.chroma_checkpoint", chroma.checkpoint.display());
    let oracle = train_stage(
        &StageSpec::for_stage(StageId::Albedo),
        &tiny_config(&data),
        &tmp.path().join("o"),
    )
    .unwrap();
    let fed = train_stage(&StageSpec::for_stage(StageId::Albedo), &doc, &run).unwrap();
    assert_ne!(oracle.curve, fed.curve);
}

#[test]
fn baseline_and_ablation_run() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    tiny_dataset(&data);
    let doc = tiny_config(&data);
    let base = train_baseline(&doc, &tmp.path().join("base")).unwrap();
    assert!(base.checkpoint.ends_with("checkpoints/baseline.iidc"));

    let out = tmp.path().join("ablate");
    let report = run_ablation(&doc, &["chroma", "direct_albedo"], &[1, 2], &out, 2).unwrap();
    assert_eq!(report.rows.len(), 4);
    assert!(report.rows.iter().all(|r| r.si_rmse.is_finite() && r.si_rmse >= 0.0));
    assert_eq!(report.trends().len(), 1);
    assert!(out.join("ablation.csv").exists());
    assert!(fs::read_to_string(out.join("summary.txt")).unwrap().contains("chroma"));
    assert!(ablation_variants("no_such_variant").is_err());
}
