use intrinsic_core::apps::{
    apply_edit, clipped_mask, despecularize_linear, mask_path, recover_highlights_linear, run_edit,
    whitebalance_linear, EditOp, EditRequest,
};
use intrinsic_core::formation::{divide, shading_to_chroma};
use intrinsic_core::image::read_image;
use intrinsic_core::synth::{gen_scene, SceneParams};
use intrinsic_core::EPS;

fn scene(seed: u64) -> intrinsic_core::synth::SceneGT {
    let params = SceneParams {
        resolution: 32,
        specular_strength: 0.8,
        clip_probability: 1.0,
        ..SceneParams::default()
    };
    gen_scene(&params, seed).unwrap()
}

#[test]
fn despecularize_drops_positive_residual() {
    for seed in 0..5 {
        let s = scene(seed);
        let out = despecularize_linear(&s.components).unwrap();
        let diffuse = s.components.diffuse().unwrap();
        for (o, d) in out.data().iter().zip(diffuse.data()) {
            assert!(*o <= d.max(0.0) + 1e-7);
            assert!((0.0..=1.0).contains(o));
        }
    }
}

#[test]
fn highlight_mask_matches_generator_at_zero_threshold() {
    let mut clipped = 0;
    for seed in 0..10 {
        let s = scene(seed);
        let (img, mask) = recover_highlights_linear(&s.components, 0.5, 0.0).unwrap();
        assert_eq!(mask.data(), s.clipped_mask.data());
        assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
        clipped += s.clipped_mask.data().iter().filter(|&&v| v > 0.0).count();
        // A larger threshold only removes pixels from the mask.
        let loose = clipped_mask(&s.components.residual, 0.1).unwrap();
        assert!(loose.data().iter().zip(mask.data()).all(|(l, m)| l <= m));
    }
    assert!(clipped > 0);
}

#[test]
fn whitebalance_output_is_neutral_relative_to_albedo() {
    let params = SceneParams {
        resolution: 32,
        light_chroma_strength: 1.0,
        clip_probability: 0.0,
        ..SceneParams::default()
    };
    let c = gen_scene(&params, 3).unwrap().components;
    let wb = whitebalance_linear(&c, false).unwrap();
    let (_, chroma) = shading_to_chroma(&divide(&wb, &c.albedo, EPS).unwrap(), EPS).unwrap();
    let (_, before) = shading_to_chroma(&c.shading, EPS).unwrap();
    let dev =
        |m: &intrinsic_core::formation::ChromaMap| m.image().data().iter().fold(0.0f32, |a, v| a.max((v - 0.5).abs()));
    assert!(dev(&chroma) < 1e-4, "{}", dev(&chroma));
    assert!(dev(&before) > 1e-2);
}

#[test]
fn edits_round_trip_through_files() {
    let tmp = tempfile::tempdir().unwrap();
    let s = scene(1);
    let comps = tmp.path().join("comps");
    s.components.save(&comps).unwrap();
    for (op, name) in [
        (EditOp::Despecularize, "d.png"),
        (EditOp::Whitebalance { keep_residual: true }, "w.iidf"),
        (
            EditOp::RecoverHighlights {
                exposure: 0.7,
                tau: 0.0,
            },
            "r.png",
        ),
    ] {
        let output = tmp.path().join(name);
        run_edit(&EditRequest {
            components: comps.clone(),
            op,
            output: output.clone(),
        })
        .unwrap();
        let img = read_image(&output).unwrap();
        assert_eq!((img.width(), img.height(), img.channels()), (32, 32, 3));
        assert_eq!(
            mask_path(&output).exists(),
            matches!(op, EditOp::RecoverHighlights { .. })
        );
    }
    assert!(apply_edit(
        &s.components,
        EditOp::RecoverHighlights {
            exposure: -1.0,
            tau: 0.0
        }
    )
    .is_err());
}
