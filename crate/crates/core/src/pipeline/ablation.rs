use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::config::TrainConfig;
use super::stage::{ablation_variants, StageSpec, TargetVar};
use super::train::train_stage;
use super::vars::{SceneVars, Upstream};
use crate::error::{Error, Result};
use crate::formation::{albedo_from_chroma, divide, inverse_shading, shading_from_inverse, ChromaMap};
use crate::image::{upsample_bilinear, ColorSpace, LinearImage};
use crate::kv::KvDoc;
use crate::metrics::si_rmse;
use crate::nn::Network;
use crate::synth::{Dataset, Split};
use crate::EPS;

/// Variants trained by default: the three pairwise comparisons.
pub const TREND_VARIANTS: [&str; 6] = [
    "chroma",
    "direct_albedo",
    "albedo",
    "albedo_image_only",
    "diffuse",
    "diffuse_image_only",
];

/// `better` should score lower than `worse` on the mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrendPair {
    pub label: &'static str,
    pub better: &'static str,
    pub worse: &'static str,
}

pub const TRENDS: [TrendPair; 3] = [
    TrendPair {
        label: "chroma then albedo vs direct low-res albedo (albedo si-RMSE)",
        better: "chroma",
        worse: "direct_albedo",
    },
    TrendPair {
        label: "albedo from (I, A_c, S_c) vs image only (albedo si-RMSE)",
        better: "albedo",
        worse: "albedo_image_only",
    },
    TrendPair {
        label: "diffuse from (I, A_d, S_c) vs image only (D si-RMSE)",
        better: "diffuse",
        worse: "diffuse_image_only",
    },
];

/// Name of the quantity a variant is scored on.
pub fn scored_quantity(spec: &StageSpec) -> &'static str {
    if spec.stage == super::StageId::Diffuse || spec.name.starts_with("diffuse") {
        "inverse_shading"
    } else {
        "albedo"
    }
}

/// Full-resolution estimate a variant's output implies, compared against
/// the ground truth of [`scored_quantity`]:
///
/// - chroma: `Â_c` from the predicted chroma and the grayscale input;
/// - low-res albedo: bilinearly upsampled to full resolution;
/// - inverse shading from an albedo-stage variant: albedo `I / S`;
/// - everything else: the prediction itself.
pub fn variant_estimate(spec: &StageSpec, vars: &SceneVars, pred: &LinearImage) -> Result<LinearImage> {
    let (w, h) = (vars.image.width(), vars.image.height());
    match spec.target {
        TargetVar::Chroma => {
            let chroma = ChromaMap::new(pred.clone())?;
            Ok(albedo_from_chroma(&vars.image, &vars.gray_shading, &chroma, EPS)?.0)
        }
        TargetVar::Albedo if pred.width() != w => upsample_bilinear(pred, w, h),
        TargetVar::InverseShading if scored_quantity(spec) == "albedo" => {
            let s = shading_from_inverse(pred)?;
            divide(&vars.image, &s, EPS)?.with_color_space(ColorSpace::Linear)
        }
        _ => Ok(pred.clone()),
    }
}

/// Ground truth the variant's estimate is compared with. Inverse shading
/// is compared without the training-time scale alignment.
pub fn variant_reference(spec: &StageSpec, vars: &SceneVars) -> Result<LinearImage> {
    if scored_quantity(spec) == "inverse_shading" {
        inverse_shading(&vars.gt_shading)
    } else {
        Ok(vars.gt_albedo.clone())
    }
}

/// Mean si-RMSE of a trained variant over a split, with oracle upstream
/// inputs.
pub fn score_variant(net: &Network, spec: &StageSpec, dataset: &Dataset, split: Split, limit: usize) -> Result<f64> {
    let entries: Vec<_> = dataset.split(split).collect();
    let entries = if limit > 0 {
        &entries[..limit.min(entries.len())]
    } else {
        &entries[..]
    };
    if entries.is_empty() {
        return Err(Error::Config(format!("no scenes in the {} split", split.name())));
    }
    let mut total = 0.0;
    for entry in entries {
        let scene = dataset.load_scene(entry)?;
        let vars = SceneVars::build(&scene.components, &Upstream::default())?;
        let y = net.predict(&vars.stage_input(spec)?)?;
        let pred = y.to_image(0, 0, y.channels(), ColorSpace::Data)?;
        let est = variant_estimate(spec, &vars, &pred)?;
        let gt = variant_reference(spec, &vars)?;
        total += si_rmse(&est.with_color_space(gt.color_space())?, &gt)?;
    }
    Ok(total / entries.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub seed: u64,
    pub variant: String,
    pub si_rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendResult {
    pub pair: TrendPair,
    pub better_mean: f64,
    pub worse_mean: f64,
}

impl TrendResult {
    pub fn holds(&self) -> bool {
        self.better_mean < self.worse_mean
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn mean(&self, variant: &str) -> Option<f64> {
        let v: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.variant == variant)
            .map(|r| r.si_rmse)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// The comparisons whose two variants were both run.
    pub fn trends(&self) -> Vec<TrendResult> {
        TRENDS
            .iter()
            .filter_map(|&pair| {
                Some(TrendResult {
                    pair,
                    better_mean: self.mean(pair.better)?,
                    worse_mean: self.mean(pair.worse)?,
                })
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("seed,variant,si_rmse\n");
        for r in &self.rows {
            writeln!(s, "{},{},{:.6}", r.seed, r.variant, r.si_rmse).unwrap();
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# Mean test-split si-RMSE per variant over seeds; lower is better.").unwrap();
        let mut seen: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !seen.contains(&r.variant.as_str()) {
                seen.push(&r.variant);
            }
        }
        for v in seen {
            writeln!(s, "{v} = {:.6}", self.mean(v).unwrap()).unwrap();
        }
        for t in self.trends() {
            let verdict = if t.holds() { "holds" } else { "reversed" };
            writeln!(
                s,
                "trend {}: {:.6} < {:.6} {verdict}",
                t.pair.label, t.better_mean, t.worse_mean
            )
            .unwrap();
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv = dir.join("ablation.csv");
        fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))?;
        let summary = dir.join("summary.txt");
        fs::write(&summary, self.summary()).map_err(|e| Error::io(&summary, e))
    }
}

/// Trains every variant once per seed under `<out_dir>/seed<k>/` and scores
/// each on the test split (`test_limit` scenes, 0 for all).
pub fn run_ablation(
    doc: &KvDoc,
    variants: &[&str],
    seeds: &[u64],
    out_dir: &Path,
    test_limit: usize,
) -> Result<AblationReport> {
    let mut report = AblationReport::default();
    for &seed in seeds {
        let mut d = doc.clone();
        d.set("seed", seed);
        let run_dir = out_dir.join(format!("seed{seed}"));
        for &name in variants {
            let spec = ablation_variants(name)?;
            let cfg = TrainConfig::from_kv(&d, name, Path::new("."))?;
            let outcome = train_stage(&spec, &d, &run_dir)?;
            let dataset = Dataset::load(&cfg.dataset)?;
            let score = score_variant(&outcome.network, &spec, &dataset, Split::Test, test_limit)?;
            log::info!("seed {seed} {name}: si-RMSE {score:.6}");
            report.rows.push(AblationRow {
                seed,
                variant: name.to_string(),
                si_rmse: score,
            });
        }
    }
    report.write(out_dir)?;
    Ok(report)
}
